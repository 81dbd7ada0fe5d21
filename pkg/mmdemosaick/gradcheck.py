"""
Central finite-difference checks of every analytic backward pass.

Each check uses the scalar objective L = sum(f(...) * R) for a fixed random
R, so the analytic gradient is the backward pass fed with R. A handful of
coordinates per array are perturbed and the two gradients compared by the
norm-wise relative error ||a - n|| / (||a|| + ||n||).
"""
import logging

import numpy as np
import pandas as pd

from .cfa_ops import make_pattern, mosaic
from .mm_cascade import demosaick_backward, demosaick_forward, init_cascade
from .resdnet import init_resdnet, materialize_weights, materialize_weights_backward, resdnet_backward, resdnet_forward
from .tensor_core import FilterBank, adjoint_of, clip, conv2d, conv_transpose2d, prelu, reflexive_pad

logger = logging.getLogger(__name__)

OP_TOLERANCE = 1e-6
MODEL_TOLERANCE = 1e-4
SUITES = ("ops", "resdnet", "cascade")


def _sample_coords(arr, samples, rng):
    n = arr.size
    picks = rng.choice(n, size=min(samples, n), replace=False)
    return [np.unravel_index(int(p), arr.shape) for p in picks]


def _relative_error(arr, analytic, objective, coords, step):
    numeric, exact = [], []
    for idx in coords:
        old = float(arr[idx])
        h = step * max(1.0, abs(old))
        arr[idx] = old + h
        f_plus = objective()
        arr[idx] = old - h
        f_minus = objective()
        arr[idx] = old
        numeric.append((f_plus - f_minus) / (2 * h))
        exact.append(float(analytic[idx]))
    numeric, exact = np.array(numeric), np.array(exact)
    scale = np.linalg.norm(numeric) + np.linalg.norm(exact)
    return float(np.linalg.norm(numeric - exact) / scale) if scale > 0 else 0.0


def _check(suite, arrays, analytic, objective, tolerance, rng, samples, step=1e-6):
    """Compare analytic and numeric gradients for every array in `arrays` (modified in place, restored)."""
    rows = []
    for name, arr in arrays.items():
        coords = _sample_coords(arr, samples, rng)
        err = _relative_error(arr, analytic[name], objective, coords, step)
        rows.append({"suite": suite, "array": name, "samples": len(coords),
                     "rel_error": err, "passed": err < tolerance})
        logger.debug("%s/%s: relative error %.3g", suite, name, err)
    return rows


def _weighted(out, r):
    return float((out * r).sum())


def check_ops(seed=0, samples=8, tolerance=OP_TOLERANCE):
    """Every tensor op on 5x5 inputs, plus the filter parametrisation."""
    rng = np.random.default_rng(seed)
    rows = []

    x = rng.normal(size=(5, 5, 2))
    w = rng.normal(size=(3, 2, 3, 3))
    b = rng.normal(size=3)
    r = rng.normal(size=(5, 5, 3))
    g = adjoint_of("conv2d", r, {"input": x, "filters": FilterBank(w, b)})
    rows += _check("conv2d", {"input": x, "weights": w, "bias": b}, g,
                   lambda: _weighted(conv2d(x, FilterBank(w, b)), r), tolerance, rng, samples)

    xt = rng.normal(size=(5, 5, 3))
    bt = rng.normal(size=2)
    rt = rng.normal(size=(5, 5, 2))
    g = adjoint_of("conv_transpose2d", rt, {"input": xt, "filters": FilterBank(w, bt)})
    rows += _check("conv_transpose2d", {"input": xt, "weights": w, "bias": bt}, g,
                   lambda: _weighted(conv_transpose2d(xt, FilterBank(w, bt)), rt), tolerance, rng, samples)

    xp = rng.normal(size=(5, 5, 3))
    xp[np.abs(xp) < 0.05] += 0.1
    slopes = rng.uniform(0.1, 0.5, size=3)
    g = adjoint_of("prelu", r, {"input": xp, "slopes": slopes})
    rows += _check("prelu", {"input": xp, "slopes": slopes}, g,
                   lambda: _weighted(prelu(xp, slopes), r), tolerance, rng, samples)

    xc = rng.uniform(-1.0, 1.0, size=(5, 5, 3))
    xc[np.abs(np.abs(xc) - 0.5) < 0.05] += 0.1
    g = adjoint_of("clip", r, {"input": xc, "lo": -0.5, "hi": 0.5})
    rows += _check("clip", {"input": xc}, g,
                   lambda: _weighted(clip(xc, -0.5, 0.5), r), tolerance, rng, samples)

    rp = rng.normal(size=(9, 9, 2))
    g = adjoint_of("reflexive_pad", rp, {"input": x, "pad": 2})
    rows += _check("reflexive_pad", {"input": x}, g,
                   lambda: _weighted(reflexive_pad(x, 2), rp), tolerance, rng, samples)

    for axis in (0, 1):
        u = rng.normal(size=(3, 2, 3, 3))
        s = rng.uniform(0.5, 2.0, size=u.shape[axis])
        rv = rng.normal(size=u.shape)
        gu, gs = materialize_weights_backward(rv, u, s, axis=axis)
        rows += _check(f"materialize_weights[axis={axis}]", {"u": u, "s": s}, {"u": gu, "s": gs},
                       lambda: _weighted(materialize_weights(u, s, axis=axis), rv), tolerance, rng, samples)
    return rows


def check_resdnet(seed=0, samples=6, tolerance=MODEL_TOLERANCE, depth=1, filters=8, size=8):
    rng = np.random.default_rng(seed)
    params = init_resdnet(depth, seed, filters)
    for arr in params.named_arrays().values():
        if arr.ndim == 1:
            arr += rng.uniform(-0.05, 0.05, size=arr.shape)
    x = rng.uniform(60.0, 190.0, size=(size, size, 3))
    sigma = np.array(2.0)
    r = rng.normal(size=x.shape)

    _, cache = resdnet_forward(x, float(sigma), params)
    gx, grads, g_sigma = resdnet_backward(r, cache, params)
    arrays = {"input": x, "sigma": sigma, **params.named_arrays()}
    analytic = {"input": gx, "sigma": np.array(g_sigma), **grads.named_arrays()}
    return _check("resdnet", arrays, analytic,
                  lambda: _weighted(resdnet_forward(x, float(sigma), params)[0], r), tolerance, rng, samples)


def check_cascade(seed=0, samples=4, tolerance=MODEL_TOLERANCE, K=3, filters=8, size=8):
    rng = np.random.default_rng(seed)
    params = init_cascade(init_resdnet(1, seed, filters), K, 15.0, 1.0)
    params.w[:] = rng.uniform(0.0, 0.5, size=K)
    clean = rng.uniform(40.0, 215.0, size=(size, size, 3))
    y = mosaic(clean, make_pattern("bayer_rggb"))
    r = rng.normal(size=clean.shape)

    _, traj = demosaick_forward(y, params)
    grads = demosaick_backward(r, traj, params)
    return _check("cascade", params.named_arrays(), grads.named_arrays(),
                  lambda: _weighted(demosaick_forward(y, params)[0], r), tolerance, rng, samples)


def run_gradchecks(suites=SUITES, seed=0):
    """Run the requested suites; returns a DataFrame with one row per checked array."""
    runners = {"ops": check_ops, "resdnet": check_resdnet, "cascade": check_cascade}
    rows = []
    for suite in suites:
        logger.info("running %s gradient checks", suite)
        rows += runners[suite](seed=seed)
    return pd.DataFrame(rows, columns=["suite", "array", "samples", "rel_error", "passed"])

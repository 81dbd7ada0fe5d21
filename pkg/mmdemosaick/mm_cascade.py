"""
Unrolled majorisation-minimisation cascade for joint demosaicking and denoising.

Starting from x0 = 0 and x1 = y, every step extrapolates
u = x_i + w_i (x_i - x_{i-1}), restores the observed samples and denoises the
result at noise level sigma_i with one shared denoiser.

The second half of the module holds exact oracles for the majorisation of the
quadratic data term, with a quadratic prior lambda ||x||^2 standing in for the
learned one so every quantity has a closed form.
"""
import copy
from dataclasses import dataclass, field

import numpy as np

from .cfa_ops import data_consistency
from .errors import ArgumentError, ShapeError
from .resdnet import ResDNetParams, resdnet_backward, resdnet_forward

SIGMA_FLOOR = 1e-3


def _as_float(values):
    arr = np.asarray(values)
    return arr if arr.dtype.kind == "f" else arr.astype(np.float64)


@dataclass
class CascadeParams:
    denoiser: ResDNetParams
    w: np.ndarray
    sigmas: np.ndarray

    def __post_init__(self):
        self.w = _as_float(self.w)
        self.sigmas = _as_float(self.sigmas)
        if self.w.ndim != 1 or self.w.shape != self.sigmas.shape or self.w.size < 1:
            raise ShapeError(
                f"w and sigmas must be non-empty vectors of equal length, got {self.w.shape} "
                f"and {self.sigmas.shape}")
        if np.any(self.sigmas <= 0):
            raise ArgumentError("cascade noise levels must be strictly positive")

    @property
    def K(self):
        return self.w.size

    def named_arrays(self):
        out = dict(self.denoiser.named_arrays())
        out["cascade.w"] = self.w
        out["cascade.sigmas"] = self.sigmas
        return out

    @classmethod
    def from_named_arrays(cls, arrays):
        rest = {k: v for k, v in arrays.items() if not k.startswith("cascade.")}
        try:
            return cls(denoiser=ResDNetParams.from_named_arrays(rest),
                       w=arrays["cascade.w"], sigmas=arrays["cascade.sigmas"])
        except KeyError as missing:
            raise ShapeError(f"parameter set is missing {missing}") from None

    def copy(self):
        return copy.deepcopy(self)

    def count(self):
        return self.denoiser.count() + self.w.size + self.sigmas.size

    def astype(self, dtype):
        return CascadeParams(denoiser=self.denoiser.astype(dtype), w=self.w.astype(dtype),
                             sigmas=self.sigmas.astype(dtype))


@dataclass
class Trajectory:
    """Everything the reverse sweep needs: states x0..x_{K+1}, extrapolations and caches."""

    observation: object
    states: list = field(default_factory=list)
    extrapolations: list = field(default_factory=list)
    caches: list = field(default_factory=list)

    @property
    def K(self):
        return len(self.caches)


@dataclass
class CascadeGradients:
    denoiser: ResDNetParams
    w: np.ndarray
    sigmas: np.ndarray

    def named_arrays(self):
        out = dict(self.denoiser.named_arrays())
        out["cascade.w"] = self.w
        out["cascade.sigmas"] = self.sigmas
        return out


def init_schedule(K, sigma_max, sigma_min):
    """Extrapolation weights (i - 1) / (i + 2) and a geometric sigma ramp from sigma_max to sigma_min."""
    if K < 1:
        raise ArgumentError(f"K must be at least 1, got {K}")
    if not sigma_max >= sigma_min > 0:
        raise ArgumentError(f"need sigma_max >= sigma_min > 0, got {sigma_max}, {sigma_min}")
    i = np.arange(1, K + 1, dtype=np.float64)
    w = (i - 1) / (i + 2)
    if K == 1:
        return w, np.array([float(sigma_max)])
    sigmas = sigma_max * (sigma_min / sigma_max) ** ((i - 1) / (K - 1))
    # pin the endpoints exactly
    sigmas[0], sigmas[-1] = sigma_max, sigma_min
    return w, sigmas


def init_cascade(denoiser, K, sigma_max, sigma_min):
    w, sigmas = init_schedule(K, sigma_max, sigma_min)
    return CascadeParams(denoiser=denoiser.copy(), w=w, sigmas=sigmas)


def demosaick_forward(y, params):
    """Run the K-step cascade on observation `y`; returns (estimate, trajectory)."""
    data = np.asarray(y.data)
    if data.ndim != 3 or data.shape[2] != 3:
        raise ShapeError(f"observation must be (H, W, 3), got {data.shape}")
    traj = Trajectory(observation=y, states=[np.zeros_like(data), data.copy()])
    for i in range(params.K):
        prev, cur = traj.states[-2], traj.states[-1]
        u = cur + params.w[i] * (cur - prev)
        z = data_consistency(u, y)
        nxt, cache = resdnet_forward(z, params.sigmas[i], params.denoiser)
        traj.extrapolations.append(u)
        traj.caches.append(cache)
        traj.states.append(nxt)
    return traj.states[-1], traj


def demosaick_backward(grad, trajectory, params):
    """Backpropagation through time over the whole cascade.

    Gradients of the shared denoiser are summed over all steps, from the last
    step to the first.
    """
    if trajectory.K != params.K or len(trajectory.states) != params.K + 2:
        raise ShapeError(f"trajectory holds {trajectory.K} steps, parameters expect {params.K}")
    if grad.shape != trajectory.states[-1].shape:
        raise ShapeError(f"gradient shape {grad.shape} does not match estimate {trajectory.states[-1].shape}")
    unobserved = 1.0 - trajectory.observation.mask()
    grads = CascadeGradients(denoiser=params.denoiser.zeros_like(),
                             w=np.zeros(params.K), sigmas=np.zeros(params.K))
    total = grads.denoiser.named_arrays()
    g_states = [np.zeros_like(s) for s in trajectory.states]
    g_states[-1] = np.asarray(grad, dtype=g_states[-1].dtype).copy()

    for i in reversed(range(params.K)):
        g_z, step_grads, g_sigma = resdnet_backward(g_states[i + 2], trajectory.caches[i], params.denoiser)
        for name, arr in step_grads.named_arrays().items():
            total[name] += arr
        grads.sigmas[i] = g_sigma
        g_u = g_z * unobserved
        x_cur, x_prev = trajectory.states[i + 1], trajectory.states[i]
        grads.w[i] = float((g_u * (x_cur - x_prev)).sum())
        g_states[i + 1] += (1.0 + params.w[i]) * g_u
        g_states[i] -= params.w[i] * g_u
    return grads


# --- majorisation oracles --------------------------------------------------

def _mask_and_data(y):
    m = y.mask().astype(np.float64)
    return m, m * np.asarray(y.data, dtype=np.float64)


def objective_value(x, y, sigma, lam):
    """Q(x) = ||y - Mx||^2 / (2 sigma^2) + lam ||x||^2."""
    x = np.asarray(x, dtype=np.float64)
    m, data = _mask_and_data(y)
    r = data - m * x
    return float((r * r).sum() / (2 * sigma ** 2) + lam * (x * x).sum())


def majorizer_gap(x, x0, y, sigma, alpha):
    """d(x, x0) = (x - x0)^T (alpha I - M) (x - x0) / (2 sigma^2)."""
    m, _ = _mask_and_data(y)
    d = np.asarray(x, dtype=np.float64) - x0
    return float(((alpha - m) * d * d).sum() / (2 * sigma ** 2))


def _denoising_target(x0, y, alpha):
    # z = y + (I - M) x0 is the target for alpha = 1; for general alpha the
    # minimiser of the completed square sits at z / alpha + (1 - 1/alpha) x0
    m, data = _mask_and_data(y)
    z = data + (1 - m) * x0
    return z / alpha + (1 - 1 / alpha) * x0


def surrogate_value(x, x0, y, sigma, alpha, lam):
    """Q~(x; x0) written as a denoising objective plus its constant.

    Equals objective_value(x) + majorizer_gap(x, x0) for every x, and touches
    the objective exactly at x = x0.
    """
    if alpha <= 0 or sigma <= 0:
        raise ArgumentError(f"need alpha > 0 and sigma > 0, got {alpha}, {sigma}")
    x = np.asarray(x, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    m, data = _mask_and_data(y)
    target = _denoising_target(x0, y, alpha)
    c = ((data * data).sum() - (m * x0 * x0).sum() + alpha * (x0 * x0).sum()
         - alpha * (target * target).sum()) / (2 * sigma ** 2)
    fit = (x - target)
    return float(alpha * (fit * fit).sum() / (2 * sigma ** 2) + lam * (x * x).sum() + c)


def mm_reference_iterate(y, sigma, alpha, lam, steps, x_init=None):
    """Exact MM iterations for the quadratic prior; returns [x_0, x_1, ..., x_T]."""
    if alpha <= 1:
        raise ArgumentError(f"the majoriser is only valid for alpha > 1, got {alpha}")
    if lam < 0:
        raise ArgumentError(f"lambda must be non-negative, got {lam}")
    x = np.asarray(y.data, dtype=np.float64).copy() if x_init is None else np.asarray(x_init, dtype=np.float64)
    shrink = 1.0 + 2.0 * lam * sigma ** 2 / alpha
    states = [x]
    for _ in range(steps):
        x = _denoising_target(x, y, alpha) / shrink
        states.append(x)
    return states


def dense_minimizer(y, sigma, lam):
    """Minimiser of Q from its normal equations, solved as a dense system."""
    m, data = _mask_and_data(y)
    n = m.size
    a = np.diag(m.ravel() / sigma ** 2) + 2.0 * lam * np.eye(n)
    b = (m * data).ravel() / sigma ** 2
    return np.linalg.solve(a, b).reshape(m.shape)

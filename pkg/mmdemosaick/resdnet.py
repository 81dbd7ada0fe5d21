"""
Residual denoising network with a variance-aware projection layer.

Pipeline: 5x5 head conv (3 -> F), 2*D non-linear blocks (PReLU then 3x3 conv)
with a shortcut around every pair, 5x5 transposed conv (F -> 3), projection of
the residual onto the ball of radius exp(gamma) * sigma * sqrt(N - 1), and
finally output = clip(input - residual, 0, 255).

Every filter is stored raw (u) with a scale (s) and materialised as the
zero-mean filter s * (u - mean(u)) / ||u - mean(u)||.
"""
import copy
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, DegenerateFilterError, ShapeError
from .tensor_core import (
    FilterBank,
    as_image,
    clip_backward,
    conv2d,
    conv2d_backward,
    conv_transpose2d,
    conv_transpose2d_backward,
    prelu,
    prelu_backward,
)

PIXEL_MAX = 255.0
DEGENERATE_TOL = 1e-12


# --- parameters ------------------------------------------------------------

@dataclass
class ConvLayer:
    """One convolution layer: raw filters, per-filter scales, bias and optional PReLU slopes.

    `filter_axis` is the axis of `u` that enumerates the separately
    normalised filters (0 for conv2d banks, 1 for the transposed tail).
    """

    u: np.ndarray
    s: np.ndarray
    bias: np.ndarray
    kappa: np.ndarray = None
    filter_axis: int = 0

    def arrays(self):
        out = {"u": self.u, "s": self.s, "bias": self.bias}
        if self.kappa is not None:
            out["kappa"] = self.kappa
        return out


@dataclass
class ResDNetParams:
    head: ConvLayer
    blocks: list
    tail: ConvLayer
    gamma: np.ndarray = field(default_factory=lambda: np.array(0.0))

    @property
    def depth(self):
        return len(self.blocks) // 2

    @property
    def filters(self):
        return self.head.u.shape[0]

    @property
    def dtype(self):
        return self.head.u.dtype

    def named_arrays(self):
        """Ordered {stable name: array} view; arrays are shared, not copied."""
        out = {}
        for key, arr in self.head.arrays().items():
            out[f"head.{key}"] = arr
        for i, layer in enumerate(self.blocks):
            for key, arr in layer.arrays().items():
                out[f"blocks.{i:02d}.{key}"] = arr
        for key, arr in self.tail.arrays().items():
            out[f"tail.{key}"] = arr
        out["gamma"] = self.gamma
        return out

    @classmethod
    def from_named_arrays(cls, arrays):
        def layer(prefix, axis, kappa=False):
            try:
                return ConvLayer(
                    u=np.asarray(arrays[f"{prefix}.u"]),
                    s=np.asarray(arrays[f"{prefix}.s"]),
                    bias=np.asarray(arrays[f"{prefix}.bias"]),
                    kappa=np.asarray(arrays[f"{prefix}.kappa"]) if kappa else None,
                    filter_axis=axis,
                )
            except KeyError as missing:
                raise ShapeError(f"parameter set is missing {missing}") from None

        block_ids = sorted({int(m.group(1)) for name in arrays
                            if (m := re.match(r"blocks\.(\d+)\.", name))})
        if block_ids != list(range(len(block_ids))) or not block_ids or len(block_ids) % 2:
            raise ShapeError(f"expected an even, contiguous set of blocks, got {block_ids}")
        if "gamma" not in arrays:
            raise ShapeError("parameter set is missing 'gamma'")
        return cls(
            head=layer("head", 0),
            blocks=[layer(f"blocks.{i:02d}", 0, kappa=True) for i in block_ids],
            tail=layer("tail", 1),
            gamma=np.asarray(arrays["gamma"]).reshape(()),
        )

    def map_arrays(self, fn):
        return type(self).from_named_arrays({k: fn(v) for k, v in self.named_arrays().items()})

    def zeros_like(self):
        return self.map_arrays(np.zeros_like)

    def copy(self):
        return copy.deepcopy(self)

    def astype(self, dtype):
        return self.map_arrays(lambda a: a.astype(dtype))

    def count(self):
        return sum(a.size for a in self.named_arrays().values())


@dataclass
class DenoiseCache:
    input: np.ndarray
    sigma: float
    head_weights: np.ndarray
    block_weights: list
    block_inputs: list
    activations: list
    tail_input: np.ndarray
    tail_weights: np.ndarray
    residual: np.ndarray
    residual_norm: float
    eps: float
    preclip: np.ndarray


# --- filter parametrisation ------------------------------------------------

def _flatten_filters(u, axis):
    moved = np.moveaxis(u, axis, 0)
    return moved.reshape(moved.shape[0], -1), moved.shape


def _unflatten_filters(flat, moved_shape, axis):
    return np.moveaxis(flat.reshape(moved_shape), 0, axis)


def _centered(u, axis):
    flat, moved_shape = _flatten_filters(np.asarray(u), axis)
    c = flat - flat.mean(axis=1, keepdims=True)
    norms = np.sqrt((c * c).sum(axis=1))
    if np.any(norms <= DEGENERATE_TOL):
        bad = np.flatnonzero(norms <= DEGENERATE_TOL).tolist()
        raise DegenerateFilterError(f"raw filters {bad} are constant and cannot be normalised")
    return c, norms, moved_shape


def materialize_weights(u, s, axis=0):
    """v = s (u - mean u) / ||u - mean u||, one filter per index along `axis`."""
    s = np.asarray(s)
    c, norms, moved_shape = _centered(u, axis)
    if s.shape != norms.shape:
        raise ShapeError(f"expected {norms.size} filter scales, got shape {s.shape}")
    v = (s / norms)[:, np.newaxis] * c
    return _unflatten_filters(v, moved_shape, axis)


def materialize_weights_backward(grad_v, u, s, axis=0):
    """Return (grad_u, grad_s) given the gradient w.r.t. the materialised filters."""
    s = np.asarray(s)
    c, norms, moved_shape = _centered(u, axis)
    g, _ = _flatten_filters(np.asarray(grad_v), axis)
    c_hat = c / norms[:, np.newaxis]
    along = (g * c_hat).sum(axis=1)
    grad_c = (s / norms)[:, np.newaxis] * (g - c_hat * along[:, np.newaxis])
    grad_u = grad_c - grad_c.mean(axis=1, keepdims=True)
    return _unflatten_filters(grad_u, moved_shape, axis), along


# --- projection ------------------------------------------------------------

def projection_radius(sigma, gamma, n):
    return float(np.exp(gamma) * sigma * np.sqrt(n - 1))


def project_noise(e, sigma, gamma):
    """Scale `e` onto the l2 ball of radius exp(gamma) * sigma * sqrt(N - 1) when it lies outside."""
    e = np.asarray(e)
    eps = projection_radius(sigma, gamma, e.size)
    norm = float(np.sqrt((e * e).sum()))
    if norm <= eps:
        return e.copy()
    return e * (eps / norm)


def _project_backward(grad_p, cache, gamma):
    r, norm, eps = cache.residual, cache.residual_norm, cache.eps
    if norm <= eps:
        # interior branch, also taken on the boundary itself
        return grad_p, 0.0, 0.0
    r_hat = r / norm
    along = float((r_hat * grad_p).sum())
    grad_r = (eps / norm) * (grad_p - r_hat * along)
    grad_gamma = along * eps
    grad_sigma = along * float(np.exp(gamma)) * np.sqrt(r.size - 1)
    return grad_r, grad_gamma, grad_sigma


# --- network ---------------------------------------------------------------

def init_resdnet(depth, seed, filters=64, channels=3, kappa=0.25):
    """He-initialised parameters with s set to each filter's own centred norm."""
    if depth < 1:
        raise ArgumentError(f"depth must be at least 1, got {depth}")
    if filters < 1:
        raise ArgumentError(f"filters must be at least 1, got {filters}")
    rng = np.random.default_rng(seed)

    def he_layer(shape, fan_in, axis=0, with_kappa=False):
        u = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
        _, norms, _ = _centered(u, axis)
        n_out = shape[0] if axis == 0 else shape[1]
        return ConvLayer(
            u=u,
            s=norms,
            bias=np.zeros(n_out),
            kappa=np.full(shape[1], kappa) if with_kappa else None,
            filter_axis=axis,
        )

    head = he_layer((filters, channels, 5, 5), channels * 25)
    blocks = [he_layer((filters, filters, 3, 3), filters * 9, with_kappa=True)
              for _ in range(2 * depth)]
    tail = he_layer((filters, channels, 5, 5), filters * 25, axis=1)
    return ResDNetParams(head=head, blocks=blocks, tail=tail, gamma=np.array(0.0))


def resdnet_forward(x, sigma, params):
    """Denoise `x` at noise level `sigma`; returns (output, cache)."""
    x = as_image(x)
    if x.shape[2] != 3:
        raise ShapeError(f"the denoiser expects 3 channels, got {x.shape[2]}")
    if sigma < 0:
        raise ArgumentError(f"sigma must be non-negative, got {sigma}")

    head_w = materialize_weights(params.head.u, params.head.s)
    feat = conv2d(x, FilterBank(head_w, params.head.bias))

    block_weights, block_inputs, activations = [], [], []
    for k in range(0, len(params.blocks), 2):
        h = feat
        for layer in params.blocks[k:k + 2]:
            w = materialize_weights(layer.u, layer.s)
            a = prelu(h, layer.kappa)
            block_inputs.append(h)
            activations.append(a)
            block_weights.append(w)
            h = conv2d(a, FilterBank(w, layer.bias))
        feat = feat + h

    tail_w = materialize_weights(params.tail.u, params.tail.s, axis=1)
    residual = conv_transpose2d(feat, FilterBank(tail_w, params.tail.bias))
    eps = projection_radius(sigma, params.gamma, residual.size)
    norm = float(np.sqrt((residual * residual).sum()))
    projected = residual if norm <= eps else residual * (eps / norm)
    preclip = x - projected
    out = np.clip(preclip, 0.0, PIXEL_MAX)

    cache = DenoiseCache(
        input=x, sigma=float(sigma), head_weights=head_w, block_weights=block_weights,
        block_inputs=block_inputs, activations=activations, tail_input=feat,
        tail_weights=tail_w, residual=residual, residual_norm=norm, eps=eps, preclip=preclip,
    )
    return out, cache


def resdnet_backward(grad_out, cache, params):
    """Reverse pass; returns (grad_input, grad_params, grad_sigma).

    grad_params is a ResDNetParams holding gradients w.r.t. the raw filters,
    scales, biases, PReLU slopes and gamma.
    """
    if grad_out.shape != cache.preclip.shape:
        raise ShapeError(f"grad_out shape {grad_out.shape} does not match cache {cache.preclip.shape}")
    if len(cache.block_weights) != len(params.blocks):
        raise ShapeError("cache was produced with a different number of blocks")
    grads = params.zeros_like()

    g_pre = clip_backward(grad_out, cache.preclip, 0.0, PIXEL_MAX)
    grad_x = g_pre.copy()
    g_residual, g_gamma, g_sigma = _project_backward(-g_pre, cache, params.gamma)
    grads.gamma[...] = g_gamma

    g_feat, g_w, g_b = conv_transpose2d_backward(
        g_residual, cache.tail_input, FilterBank(cache.tail_weights))
    grads.tail.bias[...] = g_b
    grads.tail.u[...], grads.tail.s[...] = materialize_weights_backward(
        g_w, params.tail.u, params.tail.s, axis=1)

    for pair in reversed(range(params.depth)):
        g_h = g_feat
        for idx in (2 * pair + 1, 2 * pair):
            layer, grad_layer = params.blocks[idx], grads.blocks[idx]
            g_a, g_w, g_b = conv2d_backward(g_h, cache.activations[idx],
                                            FilterBank(cache.block_weights[idx]))
            g_h, g_k = prelu_backward(g_a, cache.block_inputs[idx], layer.kappa)
            grad_layer.bias[...] = g_b
            grad_layer.kappa[...] = g_k
            grad_layer.u[...], grad_layer.s[...] = materialize_weights_backward(g_w, layer.u, layer.s)
        # shortcut: the pair input feeds both the branch and the sum
        g_feat = g_feat + g_h

    g_x, g_w, g_b = conv2d_backward(g_feat, cache.input, FilterBank(cache.head_weights))
    grads.head.bias[...] = g_b
    grads.head.u[...], grads.head.s[...] = materialize_weights_backward(g_w, params.head.u, params.head.s)
    grad_x += g_x
    return grad_x, grads, g_sigma

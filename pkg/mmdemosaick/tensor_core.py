"""
Small tensor kernels with hand-written adjoints.

Images and feature maps are numpy arrays laid out (row, column, channel).
Convolutions are correlations (no kernel flip) applied to a reflexive-padded
input, so the spatial size never changes.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DimensionError, NumericError, ShapeError


def as_image(data, dtype=None):
    """Return `data` as an (H, W, C) floating point array.

    2-D input is treated as a single channel image. Integer input is promoted
    to float64.
    """
    arr = np.asarray(data, dtype=dtype)
    if arr.dtype.kind != "f":
        arr = arr.astype(np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, np.newaxis]
    if arr.ndim != 3 or min(arr.shape) == 0:
        raise ShapeError(f"expected a non-empty (H, W, C) array, got shape {arr.shape}")
    return arr


def check_finite(arr, what="tensor"):
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values detected in {what}")
    return arr


@dataclass(frozen=True)
class FilterBank:
    """Convolution weights of shape (out_channels, in_channels, kernel_h, kernel_w).

    `bias` sits on the output side of whichever direction the bank is applied
    in: length out_channels for conv2d, length in_channels for
    conv_transpose2d. None means no bias.
    """

    weights: np.ndarray
    bias: np.ndarray = None

    def __post_init__(self):
        if self.weights.ndim != 4:
            raise ShapeError(f"filter weights must be 4-D, got shape {self.weights.shape}")
        kh, kw = self.weights.shape[2:]
        if kh % 2 == 0 or kw % 2 == 0:
            raise ShapeError(f"kernel size must be odd, got {kh}x{kw}")

    @property
    def out_channels(self):
        return self.weights.shape[0]

    @property
    def in_channels(self):
        return self.weights.shape[1]

    @property
    def kernel_h(self):
        return self.weights.shape[2]

    @property
    def kernel_w(self):
        return self.weights.shape[3]


# --- padding ---------------------------------------------------------------

def _check_pad(shape, pad_h, pad_w, strict=True):
    if pad_h < 0 or pad_w < 0:
        raise ArgumentError(f"padding must be non-negative, got ({pad_h}, {pad_w})")
    # a singleton axis reflects onto itself; convolutions (strict=False) reflect
    # repeatedly when the kernel overhang exceeds a short axis
    for n, pad in ((shape[0], pad_h), (shape[1], pad_w)):
        if strict and n > 1 and pad >= n:
            raise DimensionError(f"padding {pad} too large for an axis of length {n}")


def _pad2(x, pad_h, pad_w, strict=True):
    _check_pad(x.shape, pad_h, pad_w, strict)
    if pad_h == 0 and pad_w == 0:
        return x.copy()
    return np.pad(x, ((pad_h, pad_h), (pad_w, pad_w), (0, 0)), mode="reflect")


def _fold_matrix(n, pad, dtype):
    # row r of the result sums every padded position that mirrors onto r
    src = np.pad(np.arange(n), pad, mode="reflect")
    fold = np.zeros((n, n + 2 * pad), dtype=dtype)
    fold[src, np.arange(n + 2 * pad)] = 1.0
    return fold


def _pad2_adjoint(g, pad_h, pad_w):
    h = g.shape[0] - 2 * pad_h
    w = g.shape[1] - 2 * pad_w
    rows = _fold_matrix(h, pad_h, g.dtype)
    cols = _fold_matrix(w, pad_w, g.dtype)
    return np.einsum("ip,pqc,jq->ijc", rows, g, cols, optimize=True)


def reflexive_pad(x, pad):
    """Mirror-pad rows and columns by `pad` without repeating the edge pixel."""
    return _pad2(as_image(x), pad, pad)


def reflexive_pad_adjoint(grad_out, pad):
    """Fold a gradient on the padded grid back onto the original grid."""
    return _pad2_adjoint(as_image(grad_out), pad, pad)


# --- convolutions ----------------------------------------------------------

def _correlate(xp, weights, out_h, out_w):
    out = np.zeros((out_h, out_w, weights.shape[0]), dtype=np.result_type(xp, weights))
    for i in range(weights.shape[2]):
        for j in range(weights.shape[3]):
            out += xp[i:i + out_h, j:j + out_w, :] @ weights[:, :, i, j].T
    return out


def _correlate_adjoint(g, weights):
    kh, kw = weights.shape[2:]
    h, w = g.shape[:2]
    gp = np.zeros((h + kh - 1, w + kw - 1, weights.shape[1]), dtype=np.result_type(g, weights))
    for i in range(kh):
        for j in range(kw):
            gp[i:i + h, j:j + w, :] += g @ weights[:, :, i, j]
    return gp


def _weight_grad(a, bp, kh, kw):
    # d/dW of sum_{h,w} a[h,w,o] * bp[h+i,w+j,c]
    h, w, o = a.shape
    c = bp.shape[2]
    a2 = a.reshape(-1, o)
    gw = np.empty((o, c, kh, kw), dtype=np.result_type(a, bp))
    for i in range(kh):
        for j in range(kw):
            gw[:, :, i, j] = a2.T @ bp[i:i + h, j:j + w, :].reshape(-1, c)
    return gw


def _add_bias(out, bias, n, what):
    if bias is None:
        return out
    if bias.shape != (n,):
        raise ShapeError(f"{what} bias must have length {n}, got shape {bias.shape}")
    return out + bias


def conv2d(x, filters):
    """Same-size correlation of `x` with `filters` over a reflexive-padded input."""
    x = as_image(x)
    if x.shape[2] != filters.in_channels:
        raise ShapeError(f"conv2d expects {filters.in_channels} input channels, got {x.shape[2]}")
    h, w = x.shape[:2]
    xp = _pad2(x, filters.kernel_h // 2, filters.kernel_w // 2, strict=False)
    out = _correlate(xp, filters.weights, h, w)
    return _add_bias(out, filters.bias, filters.out_channels, "conv2d")


def conv2d_backward(grad_out, x, filters):
    """Return (grad_input, grad_weights, grad_bias) for conv2d."""
    x = as_image(x)
    h, w = x.shape[:2]
    if grad_out.shape != (h, w, filters.out_channels):
        raise ShapeError(f"grad_out shape {grad_out.shape} does not match conv2d output")
    ph, pw = filters.kernel_h // 2, filters.kernel_w // 2
    xp = _pad2(x, ph, pw, strict=False)
    grad_w = _weight_grad(grad_out, xp, filters.kernel_h, filters.kernel_w)
    grad_b = grad_out.sum(axis=(0, 1))
    grad_x = _pad2_adjoint(_correlate_adjoint(grad_out, filters.weights), ph, pw)
    return grad_x, grad_w, grad_b


def conv_transpose2d(x, filters):
    """Adjoint of the zero-bias conv2d map: out_channels -> in_channels, same spatial size."""
    x = as_image(x)
    if x.shape[2] != filters.out_channels:
        raise ShapeError(
            f"conv_transpose2d expects {filters.out_channels} input channels, got {x.shape[2]}")
    ph, pw = filters.kernel_h // 2, filters.kernel_w // 2
    _check_pad(x.shape, ph, pw, strict=False)
    out = _pad2_adjoint(_correlate_adjoint(x, filters.weights), ph, pw)
    return _add_bias(out, filters.bias, filters.in_channels, "conv_transpose2d")


def conv_transpose2d_backward(grad_out, x, filters):
    """Return (grad_input, grad_weights, grad_bias) for conv_transpose2d."""
    x = as_image(x)
    h, w = x.shape[:2]
    if grad_out.shape != (h, w, filters.in_channels):
        raise ShapeError(f"grad_out shape {grad_out.shape} does not match conv_transpose2d output")
    ph, pw = filters.kernel_h // 2, filters.kernel_w // 2
    gp = _pad2(grad_out, ph, pw, strict=False)
    grad_x = _correlate(gp, filters.weights, h, w)
    grad_w = _weight_grad(x, gp, filters.kernel_h, filters.kernel_w)
    grad_b = grad_out.sum(axis=(0, 1))
    return grad_x, grad_w, grad_b


# --- pointwise -------------------------------------------------------------

def _check_slopes(x, slopes):
    slopes = np.asarray(slopes)
    if slopes.shape != (x.shape[2],):
        raise ShapeError(f"PReLU needs {x.shape[2]} slopes, got shape {slopes.shape}")
    return slopes


def prelu(x, slopes):
    """max(0, x) + kappa_c * min(0, x), one slope per channel."""
    x = as_image(x)
    slopes = _check_slopes(x, slopes)
    return np.maximum(x, 0) + slopes * np.minimum(x, 0)


def prelu_backward(grad_out, x, slopes):
    """Return (grad_input, grad_slopes)."""
    x = as_image(x)
    slopes = _check_slopes(x, slopes)
    if grad_out.shape != x.shape:
        raise ShapeError(f"grad_out shape {grad_out.shape} does not match input {x.shape}")
    grad_x = grad_out * np.where(x > 0, 1.0, slopes)
    grad_slopes = (grad_out * np.minimum(x, 0)).sum(axis=(0, 1))
    return grad_x, grad_slopes


def _check_range(lo, hi):
    if not lo < hi:
        raise ArgumentError(f"clip needs lo < hi, got [{lo}, {hi}]")


def clip(x, lo, hi):
    _check_range(lo, hi)
    return np.clip(as_image(x), lo, hi)


def clip_backward(grad_out, x, lo, hi):
    # subgradient 0 on the boundary itself
    _check_range(lo, hi)
    x = as_image(x)
    if grad_out.shape != x.shape:
        raise ShapeError(f"grad_out shape {grad_out.shape} does not match input {x.shape}")
    return grad_out * ((x > lo) & (x < hi))


# --- dispatch --------------------------------------------------------------

def adjoint_of(op, grad_out, cache):
    """Backward pass of a named op given its forward inputs.

    `cache` holds the forward arguments by name: `input` plus `filters`,
    `slopes`, `lo`/`hi` or `pad` depending on the op. Returns a dict of
    gradients keyed like the inputs and parameters they belong to.
    """
    grad_out = np.asarray(grad_out)
    try:
        x = cache["input"]
        if op == "conv2d":
            gx, gw, gb = conv2d_backward(grad_out, x, cache["filters"])
            return {"input": gx, "weights": gw, "bias": gb}
        if op == "conv_transpose2d":
            gx, gw, gb = conv_transpose2d_backward(grad_out, x, cache["filters"])
            return {"input": gx, "weights": gw, "bias": gb}
        if op == "prelu":
            gx, gk = prelu_backward(grad_out, x, cache["slopes"])
            return {"input": gx, "slopes": gk}
        if op == "clip":
            return {"input": clip_backward(grad_out, x, cache["lo"], cache["hi"])}
        if op == "reflexive_pad":
            pad = cache["pad"]
            x = as_image(x)
            expected = (x.shape[0] + 2 * pad, x.shape[1] + 2 * pad, x.shape[2])
            if grad_out.shape != expected:
                raise ShapeError(f"grad_out shape {grad_out.shape} does not match padded {expected}")
            return {"input": reflexive_pad_adjoint(grad_out, pad)}
    except KeyError as missing:
        raise ShapeError(f"cache for {op} is missing {missing}") from None
    raise ArgumentError(f"unknown op {op!r}")

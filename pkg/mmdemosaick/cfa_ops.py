"""
Colour filter array patterns, the mosaic operator and the bilinear baseline.

A mosaicked observation keeps three channels: unsampled entries are exactly
zero, so the data-consistency step is a pure elementwise select.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import convolve

from .errors import ArgumentError, ShapeError
from .tensor_core import as_image

R, G, B = 0, 1, 2

_CELLS = {
    "bayer_rggb": [[R, G], [G, B]],
    "bayer_grbg": [[G, R], [B, G]],
    "bayer_gbrg": [[G, B], [R, G]],
    "bayer_bggr": [[B, G], [G, R]],
    # Fujifilm X-Trans
    "xtrans": [
        [G, G, R, G, G, B],
        [G, G, B, G, G, R],
        [B, R, G, R, B, G],
        [G, G, B, G, G, R],
        [G, G, R, G, G, B],
        [R, B, G, B, R, G],
    ],
}

PATTERN_KINDS = tuple(_CELLS)


@dataclass(frozen=True)
class CfaPattern:
    name: str
    cell: np.ndarray = field(repr=False)

    @property
    def period_h(self):
        return self.cell.shape[0]

    @property
    def period_w(self):
        return self.cell.shape[1]

    @property
    def is_bayer(self):
        return self.name.startswith("bayer")

    def channel_at(self, row, col):
        return int(self.cell[row % self.period_h, col % self.period_w])

    def channel_map(self, height, width):
        """(H, W) array of the sampled channel index at each pixel."""
        reps = (-(-height // self.period_h), -(-width // self.period_w))
        return np.tile(self.cell, reps)[:height, :width]

    def mask(self, height, width, dtype=np.float64):
        """(H, W, 3) binary mask: the diagonal of M."""
        chan = self.channel_map(height, width)
        return (chan[:, :, np.newaxis] == np.arange(3)).astype(dtype)

    def counts(self):
        return tuple(int((self.cell == c).sum()) for c in (R, G, B))


@dataclass
class MosaicObservation:
    data: np.ndarray
    pattern: CfaPattern
    sigma: float = 0.0

    @property
    def shape(self):
        return self.data.shape

    def mask(self):
        return self.pattern.mask(*self.data.shape[:2], dtype=self.data.dtype)


def make_pattern(kind):
    try:
        cell = _CELLS[kind]
    except KeyError:
        raise ArgumentError(
            f"unknown CFA pattern {kind!r}; expected one of {', '.join(PATTERN_KINDS)}") from None
    cell = np.array(cell, dtype=np.int8)
    cell.setflags(write=False)
    return CfaPattern(name=kind, cell=cell)


def _check_rgb(image):
    image = as_image(image)
    if image.shape[2] != 3:
        raise ShapeError(f"expected a 3-channel image, got {image.shape[2]} channels")
    return image


def mosaic(image, pattern, sigma=0.0):
    """Apply M: keep each pixel's sampled channel, zero the other two."""
    image = _check_rgb(image)
    data = image * pattern.mask(*image.shape[:2], dtype=image.dtype)
    return MosaicObservation(data=data, pattern=pattern, sigma=float(sigma))


def data_consistency(u, y):
    """(I - M)u + y: sampled positions from the observation, the rest from u."""
    u = as_image(u)
    if u.shape != y.data.shape:
        raise ShapeError(f"estimate shape {u.shape} does not match observation {y.data.shape}")
    return np.where(y.mask() > 0, y.data, u)


_GREEN_KERNEL = np.array([[0, 1, 0], [1, 4, 1], [0, 1, 0]], dtype=np.float64) / 4
_RB_KERNEL = np.array([[1, 2, 1], [2, 4, 2], [1, 2, 1]], dtype=np.float64) / 4


def _normalized_fill(values, mask, kernel):
    num = convolve(values, kernel, mode="mirror")
    den = convolve(mask, kernel, mode="mirror")
    filled = np.divide(num, den, out=np.zeros_like(num), where=den > 1e-12)
    return filled, den > 1e-12


def bilinear_demosaick(y):
    """Fill every missing sample with the average of its nearest same-channel neighbours.

    Bayer patterns use the classic 3x3 bilinear kernels. Other patterns use a
    mask-normalised box average, widened to 5x5 where a 3x3 window holds no
    sample of the channel.
    """
    data = y.data.astype(np.float64)
    mask = y.pattern.mask(*data.shape[:2])
    out = np.empty_like(data)
    for c in range(3):
        m = mask[:, :, c]
        v = data[:, :, c] * m
        if y.pattern.is_bayer:
            kernel = _GREEN_KERNEL if c == G else _RB_KERNEL
            filled, _ = _normalized_fill(v, m, kernel)
        else:
            filled, ok = _normalized_fill(v, m, np.ones((3, 3)))
            if not ok.all():
                wide, _ = _normalized_fill(v, m, np.ones((5, 5)))
                filled = np.where(ok, filled, wide)
        out[:, :, c] = np.where(m > 0, v, filled)
    return out.astype(y.data.dtype, copy=False)

"""
Reproducible synthetic sensor noise.

Gaussian draws come from a counter-based stream: the uniform for element i is
a SplitMix64 hash of (seed, stream, i), pushed through the inverse normal CDF.
Results therefore depend only on the seed and the element index, never on
generation order or thread count.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import ArgumentError, DomainError
from .tensor_core import as_image

NOISE_KINDS = ("iid_gaussian", "heteroscedastic")

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


@dataclass
class NoiseSpec:
    kind: str = "iid_gaussian"
    sigma: float = 0.0
    a_shot: float = 0.0
    b_read: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ArgumentError(f"unknown noise kind {self.kind!r}; expected one of {NOISE_KINDS}")
        for name in ("sigma", "a_shot", "b_read"):
            if getattr(self, name) < 0:
                raise ArgumentError(f"noise {name} must be non-negative, got {getattr(self, name)}")
        self.seed = int(self.seed)


def _splitmix64(z):
    z = z + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def standard_normal(shape, seed, stream=0):
    """Standard normal draws indexed by (seed, stream, element)."""
    counter = np.arange(int(np.prod(shape)), dtype=np.uint64)
    with np.errstate(over="ignore"):
        key = _splitmix64(np.array([int(seed) & _MASK64], dtype=np.uint64))
        key = _splitmix64(key ^ np.uint64(int(stream) & _MASK64))
        bits = _splitmix64(_splitmix64(counter ^ key[0]))
    # 53 random bits -> open interval (0, 1)
    u = ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    return ndtri(u).reshape(shape)


def add_noise(image, spec, stream=0):
    """Corrupt `image` according to `spec`. The result is not clipped."""
    image = as_image(image)
    g = standard_normal(image.shape, spec.seed, stream).astype(image.dtype, copy=False)
    if spec.kind == "iid_gaussian":
        if spec.sigma == 0:
            return image.copy()
        return image + spec.sigma * g
    if np.any(image < 0):
        raise DomainError("heteroscedastic noise needs non-negative intensities")
    return image + np.sqrt(spec.a_shot * image + spec.b_read) * g

"""Image quality metrics and the sRGB transfer curve."""
import numpy as np

from .errors import ShapeError

SRGB_KNEE = 0.0031308


def psnr(a, b, peak=255.0):
    """Peak signal-to-noise ratio in dB over all pixels and channels; +inf for identical inputs."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"cannot compare images of shape {a.shape} and {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return float("inf")
    return float(10.0 * np.log10(peak ** 2 / mse))


def linrgb_to_srgb(image):
    """Standard sRGB transfer curve on [0, 255] images. No colour matrix is applied."""
    u = np.clip(np.asarray(image, dtype=np.float64) / 255.0, 0.0, 1.0)
    encoded = np.where(u <= SRGB_KNEE, 12.92 * u, 1.055 * np.power(u, 1 / 2.4) - 0.055)
    return encoded * 255.0

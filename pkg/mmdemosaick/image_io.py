"""
Image and observation files.

Image files (PGM/PPM, PNG, 8 or 16 bit) are decoded and encoded with OpenCV,
numpy `.npy` holds float dumps, and `.npz` bundles hold mosaicked
observations. Every reader returns a float64 (H, W, C) RGB array on the
[0, 255] scale; 16-bit files are rescaled by 255 / 65535.
"""
from pathlib import Path

import cv2
import numpy as np

from .cfa_ops import MosaicObservation, make_pattern
from .errors import FormatError
from .tensor_core import as_image

CODEC_SUFFIXES = (".ppm", ".pgm", ".pnm", ".png")
IMAGE_SUFFIXES = CODEC_SUFFIXES + (".npy",)
OBSERVATION_SUFFIX = ".npz"

_SCALE = {np.dtype(np.uint8): 1.0, np.dtype(np.uint16): 255.0 / 65535.0}


def decode_image(raw, name="image"):
    """Decode encoded image bytes into a float64 RGB (or single-channel) array."""
    pixels = cv2.imdecode(np.frombuffer(raw, dtype=np.uint8), cv2.IMREAD_UNCHANGED)
    if pixels is None:
        raise FormatError(f"{name} is not a readable PNM/PNG image")
    if pixels.dtype not in _SCALE:
        raise FormatError(f"{name} has unsupported sample type {pixels.dtype}")
    scale = _SCALE[pixels.dtype]
    if pixels.ndim == 3:
        if pixels.shape[2] == 4:
            pixels = pixels[:, :, :3]
        pixels = cv2.cvtColor(pixels, cv2.COLOR_BGR2RGB)
    return as_image(pixels).astype(np.float64) * scale


def encode_image(image, suffix=".png", bits=8):
    """Encode a [0, 255] image as PNM or PNG bytes at 8 or 16 bits per sample."""
    image = as_image(image)
    if image.shape[2] not in (1, 3):
        raise FormatError(f"image files hold 1 or 3 channels, got {image.shape[2]}")
    if bits not in (8, 16):
        raise FormatError(f"bits must be 8 or 16, got {bits}")
    maxval = 255 if bits == 8 else 65535
    pixels = np.rint(np.clip(image, 0, 255) * (maxval / 255.0)).astype(np.uint8 if bits == 8 else np.uint16)
    if pixels.shape[2] == 3:
        pixels = cv2.cvtColor(pixels, cv2.COLOR_RGB2BGR)
    else:
        pixels = pixels[:, :, 0]
    if suffix == ".pnm":
        suffix = ".ppm" if image.shape[2] == 3 else ".pgm"
    ok, buf = cv2.imencode(suffix, pixels)
    if not ok:
        raise FormatError(f"could not encode a {bits}-bit {suffix} image")
    return buf.tobytes()


def read_image(path):
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in CODEC_SUFFIXES:
        return decode_image(path.read_bytes(), path.name)
    if suffix == ".npy":
        return as_image(np.load(path, allow_pickle=False)).astype(np.float64)
    raise FormatError(f"unsupported image format {suffix!r} for {path.name}")


def write_image(path, image, bits=8):
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in CODEC_SUFFIXES:
        path.write_bytes(encode_image(image, suffix, bits))
    elif suffix == ".npy":
        np.save(path, as_image(image))
    else:
        raise FormatError(f"unsupported image format {suffix!r} for {path.name}")


def write_observation(path, y):
    np.savez(path, data=y.data, pattern=np.array(y.pattern.name), sigma=np.array(y.sigma))


def read_observation(path):
    try:
        with np.load(path, allow_pickle=False) as bundle:
            data = as_image(bundle["data"]).astype(np.float64)
            pattern = make_pattern(str(bundle["pattern"]))
            sigma = float(bundle["sigma"])
    except (KeyError, ValueError, OSError) as err:
        raise FormatError(f"{Path(path).name} is not a valid observation bundle: {err}") from None
    return MosaicObservation(data=data, pattern=pattern, sigma=sigma)

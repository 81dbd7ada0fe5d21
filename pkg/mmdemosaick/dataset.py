"""Image collections for training and evaluation."""
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import ArgumentError
from .image_io import IMAGE_SUFFIXES, read_image, write_image

logger = logging.getLogger(__name__)


@dataclass
class ImageDataset:
    names: list = field(default_factory=list)
    images: list = field(default_factory=list)

    def __len__(self):
        return len(self.images)

    @classmethod
    def from_directory(cls, path):
        path = Path(path)
        if not path.is_dir():
            raise ArgumentError(f"dataset directory {path} does not exist")
        files = sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
        images = []
        for p in files:
            img = read_image(p)
            if img.shape[2] == 1:
                img = np.repeat(img, 3, axis=2)
            images.append(img)
        logger.info("loaded %d images from %s", len(images), path)
        return cls(names=[p.name for p in files], images=images)

    def split(self, val_fraction=0.2):
        """Deterministic split by sorted name: the last `val_fraction` goes to validation."""
        order = sorted(range(len(self)), key=lambda i: self.names[i])
        n_val = int(round(len(order) * val_fraction))
        if len(order) > 1:
            n_val = min(max(n_val, 1), len(order) - 1)
        else:
            n_val = 0
        train, val = order[:len(order) - n_val], order[len(order) - n_val:]
        pick = lambda idx: ImageDataset([self.names[i] for i in idx], [self.images[i] for i in idx])
        return pick(train), pick(val)


def synthetic_scene(size, rng):
    """A smooth colour scene: gradient background, random discs and bars, light blur."""
    h, w = size
    yy, xx = np.mgrid[0:h, 0:w] / max(h, w)
    img = np.empty((h, w, 3))
    for c in range(3):
        a, b, d = rng.uniform(-1, 1, size=3)
        img[:, :, c] = 128 + 60 * (a * yy + b * xx) + 20 * np.sin(2 * np.pi * (d * yy + a * xx))
    for _ in range(rng.integers(3, 8)):
        colour = rng.uniform(0, 255, size=3)
        if rng.random() < 0.5:
            cy, cx = rng.uniform(0, 1, size=2)
            radius = rng.uniform(0.05, 0.3)
            inside = (yy - cy * h / max(h, w)) ** 2 + (xx - cx * w / max(h, w)) ** 2 < radius ** 2
        else:
            lo, hi = np.sort(rng.uniform(0, 1, size=2))
            inside = (xx >= lo) & (xx < hi) if rng.random() < 0.5 else (yy >= lo) & (yy < hi)
        img[inside] = colour
    img = gaussian_filter(img, sigma=(rng.uniform(0.3, 1.2),) * 2 + (0,))
    return np.clip(img, 0, 255)


def synthetic_dataset(count, size=(48, 48), seed=0):
    rng = np.random.default_rng(seed)
    names = [f"synth_{i:04d}.ppm" for i in range(count)]
    return ImageDataset(names=names, images=[synthetic_scene(size, rng) for _ in range(count)])


def write_dataset(dataset, path, bits=8):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for name, img in zip(dataset.names, dataset.images):
        write_image(path / name, img, bits=bits)
    logger.info("wrote %d images to %s", len(dataset), path)

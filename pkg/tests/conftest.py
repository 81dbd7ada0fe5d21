import numpy as np
import pytest

from mmdemosaick.cfa_ops import make_pattern, mosaic
from mmdemosaick.dataset import synthetic_dataset
from mmdemosaick.mm_cascade import init_cascade
from mmdemosaick.resdnet import init_resdnet


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_denoiser():
    return init_resdnet(1, seed=0, filters=4)


@pytest.fixture
def tiny_cascade(tiny_denoiser):
    return init_cascade(tiny_denoiser, 3, 15.0, 1.0)


@pytest.fixture
def clean_image(rng):
    return rng.uniform(20.0, 235.0, size=(8, 8, 3))


@pytest.fixture
def observation(clean_image):
    return mosaic(clean_image, make_pattern("bayer_rggb"))


@pytest.fixture
def small_dataset():
    return synthetic_dataset(6, size=(20, 20), seed=3)

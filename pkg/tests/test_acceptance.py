"""Desk-scale quality checks. Several minutes of CPU each; run with `pytest -m slow`."""
import dataclasses
from pathlib import Path

import numpy as np
import pytest

from mmdemosaick.cfa_ops import bilinear_demosaick, make_pattern, mosaic
from mmdemosaick.config import load_config
from mmdemosaick.dataset import synthetic_dataset
from mmdemosaick.metrics import psnr
from mmdemosaick.mm_cascade import demosaick_forward
from mmdemosaick.noise_sim import NoiseSpec, add_noise
from mmdemosaick.resdnet import resdnet_forward
from mmdemosaick.training import pretrain_denoiser, train_joint

pytestmark = pytest.mark.slow

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture(scope="module")
def training_set():
    return synthetic_dataset(60, size=(48, 48), seed=1)


@pytest.fixture(scope="module")
def held_out():
    return synthetic_dataset(8, size=(48, 48), seed=99).images


@pytest.fixture(scope="module")
def pretrained(training_set):
    return pretrain_denoiser(training_set, load_config(CONFIGS / "desk_pretrain.cfg"))


def test_pretrained_denoiser_beats_noisy_input(pretrained, held_out):
    gains = []
    for i, clean in enumerate(held_out):
        noisy = add_noise(clean, NoiseSpec(sigma=15.0, seed=7), stream=i)
        out, _ = resdnet_forward(noisy, 15.0, pretrained)
        gains.append(psnr(out, clean) - psnr(noisy, clean))
    assert np.mean(gains) >= 1.0


@pytest.mark.parametrize("sigma, margin", [(0.0, 1.0), (10.0, 2.0)])
def test_joint_cascade_beats_bilinear(training_set, held_out, pretrained, sigma, margin):
    cfg = load_config(CONFIGS / "desk_joint.cfg")
    cfg = dataclasses.replace(cfg, noise=dataclasses.replace(cfg.noise, sigma=sigma))
    params = train_joint(training_set, pretrained, cfg)
    pattern = make_pattern(cfg.pattern)
    ours, baseline = [], []
    for i, clean in enumerate(held_out):
        noisy = add_noise(clean, NoiseSpec(sigma=sigma, seed=11), stream=i)
        y = mosaic(noisy, pattern, sigma=sigma)
        out, _ = demosaick_forward(y, params)
        ours.append(psnr(out, clean))
        baseline.append(psnr(bilinear_demosaick(y), clean))
    assert np.mean(ours) - np.mean(baseline) >= margin

"""
Two-phase training: denoiser pretraining on noisy patches (MSE), then joint
training of the whole cascade on mosaicked patches (L1, backpropagation
through time). Both phases use Adam with classic l2 weight decay and a step
learning-rate schedule.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .cfa_ops import make_pattern, mosaic
from .errors import ArgumentError, NumericError, ShapeError
from .metrics import psnr
from .mm_cascade import SIGMA_FLOOR, demosaick_backward, demosaick_forward, init_cascade
from .model_io import save_model
from .noise_sim import NoiseSpec, add_noise
from .resdnet import init_resdnet, resdnet_backward, resdnet_forward

logger = logging.getLogger(__name__)

PHASES = ("pretrain", "joint")
LOSS_KINDS = ("l1", "mse")


@dataclass
class TrainConfig:
    phase: str = "pretrain"
    depth: int = 1
    filters: int = 8
    patch_size: int = 32
    batch_size: int = 4
    lr: float = 1e-2
    lr_decay_every: int = 30
    lr_decay_factor: float = 0.1
    weight_decay: float = 1e-8
    epochs: int = 10
    steps_per_epoch: int = 20
    sigma_lo: float = 0.0
    sigma_hi: float = 15.0
    val_sigma: float = 15.0
    val_fraction: float = 0.2
    K: int = 5
    sigma_max: float = 15.0
    sigma_min: float = 1.0
    pattern: str = "bayer_rggb"
    flips: bool = True
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    threads: int = 1
    checkpoint_every: int = 0
    checkpoint_path: str = ""

    def __post_init__(self):
        if self.phase not in PHASES:
            raise ArgumentError(f"phase must be one of {PHASES}, got {self.phase!r}")
        for name in ("lr", "lr_decay_factor", "adam_eps"):
            if getattr(self, name) <= 0:
                raise ArgumentError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("depth", "filters", "patch_size", "batch_size", "lr_decay_every", "K", "threads"):
            if getattr(self, name) < 1:
                raise ArgumentError(f"{name} must be at least 1, got {getattr(self, name)}")
        if self.weight_decay < 0 or self.epochs < 0 or self.steps_per_epoch < 0:
            raise ArgumentError("weight_decay, epochs and steps_per_epoch must be non-negative")
        if not 0 <= self.sigma_lo <= self.sigma_hi:
            raise ArgumentError(f"invalid sigma range [{self.sigma_lo}, {self.sigma_hi}]")
        if not 0 <= self.val_fraction < 1:
            raise ArgumentError(f"val_fraction must lie in [0, 1), got {self.val_fraction}")

    @property
    def sigma_range(self):
        return self.sigma_lo, self.sigma_hi

    def learning_rate(self, epoch):
        return self.lr * self.lr_decay_factor ** (epoch // self.lr_decay_every)


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


class TrainingLog:
    """Rows of (step, epoch, lr, loss, val_psnr), optionally forwarded to a callback."""

    COLUMNS = ["step", "epoch", "lr", "loss", "val_psnr"]

    def __init__(self, callback=None):
        self.rows = []
        self.callback = callback

    def record(self, **row):
        self.rows.append(row)
        logger.info("step %d epoch %d lr %.3g loss %.6g val_psnr %s", row["step"], row["epoch"],
                    row["lr"], row["loss"], "-" if math.isnan(row["val_psnr"]) else f"{row['val_psnr']:.3f}")
        if self.callback is not None:
            self.callback(row)

    def to_frame(self):
        return pd.DataFrame(self.rows, columns=self.COLUMNS)

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False)


# --- building blocks -------------------------------------------------------

def loss(pred, target, kind):
    """Mean absolute or mean squared error and its gradient w.r.t. `pred`."""
    if pred.shape != target.shape:
        raise ShapeError(f"prediction shape {pred.shape} does not match target {target.shape}")
    diff = pred - target
    n = diff.size
    if kind == "l1":
        return float(np.abs(diff).sum() / n), np.sign(diff) / n
    if kind == "mse":
        return float((diff * diff).sum() / n), 2.0 * diff / n
    raise ArgumentError(f"loss kind must be one of {LOSS_KINDS}, got {kind!r}")


def adam_step(params, grads, state, lr, weight_decay=0.0):
    """One Adam update with bias correction, applied in place to the arrays in `params`.

    Weight decay is added to the gradient as weight_decay * theta.
    """
    if params.keys() != grads.keys():
        raise ShapeError("parameter and gradient sets name different arrays")
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for name, theta in params.items():
        g = grads[name]
        if g.shape != theta.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, parameter {theta.shape}")
        if weight_decay:
            g = g + weight_decay * theta
        if name not in state.m:
            state.m[name] = np.zeros_like(theta)
            state.v[name] = np.zeros_like(theta)
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        theta -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


def flip_patch(patch, flags):
    """Mirror a (P, P, C) patch: flags[0] flips left-right, flags[1] top-bottom."""
    if flags[0]:
        patch = patch[:, ::-1]
    if flags[1]:
        patch = patch[::-1, :]
    return patch


def patch_sampler(dataset, cfg, rng=None):
    """Endless stream of (patches, flips) batches.

    patches has shape (batch, P, P, 3); flips is a (batch, 2) bool array of
    (horizontal, vertical) flags, only ever set in the joint phase.
    """
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    p = cfg.patch_size
    usable = []
    for name, img in zip(dataset.names, dataset.images):
        if img.shape[0] < p or img.shape[1] < p:
            logger.warning("skipping %s: %dx%d is smaller than the %dx%d patch", name,
                           img.shape[0], img.shape[1], p, p)
        else:
            usable.append(img)
    if not usable:
        raise ArgumentError(f"no image is at least {p}x{p}")
    flip = cfg.phase == "joint" and cfg.flips
    while True:
        patches = np.empty((cfg.batch_size, p, p, 3))
        flags = np.zeros((cfg.batch_size, 2), dtype=bool)
        for b in range(cfg.batch_size):
            img = usable[rng.integers(len(usable))]
            top = rng.integers(img.shape[0] - p + 1)
            left = rng.integers(img.shape[1] - p + 1)
            patch = img[top:top + p, left:left + p, :3]
            if flip:
                flags[b] = rng.random(2) < 0.5
                patch = flip_patch(patch, flags[b])
            patches[b] = patch
        yield patches, flags


def _center_crops(dataset, size):
    crops = []
    for img in dataset.images:
        if img.shape[0] >= size and img.shape[1] >= size:
            top, left = (img.shape[0] - size) // 2, (img.shape[1] - size) // 2
            crops.append(img[top:top + size, left:left + size, :3].copy())
    return crops


def _map_items(fn, items, threads):
    # results come back in item order whatever the thread count
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _reduce(results, template):
    """Average per-item (loss, grads) pairs in item order."""
    total = template.zeros_like() if hasattr(template, "zeros_like") else template
    acc = total.named_arrays()
    for _, g in results:
        for name, arr in g.named_arrays().items():
            acc[name] += arr
    n = len(results)
    for arr in acc.values():
        arr /= n
    return sum(value for value, _ in results) / n, total


def _checkpoint(cfg, step, params):
    if cfg.checkpoint_every and cfg.checkpoint_path and step % cfg.checkpoint_every == 0:
        save_model(params, cfg.checkpoint_path)
        logger.info("checkpoint written to %s at step %d", cfg.checkpoint_path, step)


def _split(dataset, cfg):
    if len(dataset) == 0:
        raise ArgumentError("the training dataset is empty")
    return dataset.split(cfg.val_fraction)


# --- denoiser pretraining --------------------------------------------------

def _denoise_validation(params, crops, cfg):
    scores = []
    for i, clean in enumerate(crops):
        noisy = add_noise(clean, NoiseSpec(sigma=cfg.val_sigma, seed=cfg.seed + 1), stream=i)
        out, _ = resdnet_forward(noisy, cfg.val_sigma, params)
        scores.append(psnr(out, clean))
    return float(np.mean(scores)) if scores else math.nan


def pretrain_denoiser(dataset, cfg, init=None, log=None):
    """Train the denoiser on noisy patches; returns the best-validation parameters."""
    params = init.copy() if init is not None else init_resdnet(cfg.depth, cfg.seed, cfg.filters)
    train, val = _split(dataset, cfg)
    if cfg.epochs == 0:
        return params
    log = log if log is not None else TrainingLog()
    rng = np.random.default_rng(cfg.seed)
    sampler = patch_sampler(train, cfg, rng)
    val_crops = _center_crops(val, cfg.patch_size)
    state = AdamState(cfg.beta1, cfg.beta2, cfg.adam_eps)
    best_score, best = -math.inf, params.copy()

    def item_step(item):
        clean, sigma, seed = item
        noisy = add_noise(clean, NoiseSpec(sigma=float(sigma), seed=int(seed)))
        out, cache = resdnet_forward(noisy, sigma, params)
        value, grad = loss(out, clean, "mse")
        _, grads, _ = resdnet_backward(grad, cache, params)
        return value, grads

    step = 0
    for epoch in range(cfg.epochs):
        lr = cfg.learning_rate(epoch)
        value = math.nan
        for _ in range(cfg.steps_per_epoch):
            patches, _ = next(sampler)
            sigmas = rng.uniform(cfg.sigma_lo, cfg.sigma_hi, size=len(patches))
            seeds = rng.integers(0, 2 ** 62, size=len(patches))
            results = _map_items(item_step, list(zip(patches, sigmas, seeds)), cfg.threads)
            value, grads = _reduce(results, params)
            if not math.isfinite(value):
                raise NumericError(f"pretraining loss became {value} at step {step + 1}")
            adam_step(params.named_arrays(), grads.named_arrays(), state, lr, cfg.weight_decay)
            step += 1
            _checkpoint(cfg, step, params)
            if step % max(cfg.steps_per_epoch, 1) != 0:
                log.record(step=step, epoch=epoch, lr=lr, loss=value, val_psnr=math.nan)
        score = _denoise_validation(params, val_crops, cfg)
        log.record(step=step, epoch=epoch, lr=lr, loss=value, val_psnr=score)
        if math.isnan(score) or score > best_score:
            best_score, best = score, params.copy()
    return best


# --- joint training --------------------------------------------------------

def _observe(clean, pattern, spec, stream):
    noisy = add_noise(clean, spec, stream=stream) if (spec.sigma > 0 or spec.kind != "iid_gaussian") else clean
    y = mosaic(noisy, pattern, sigma=spec.sigma)
    return y


def _joint_validation(params, crops, pattern, cfg):
    spec = NoiseSpec(**{**cfg.noise.__dict__, "seed": cfg.seed + 1})
    scores = []
    for i, clean in enumerate(crops):
        out, _ = demosaick_forward(_observe(clean, pattern, spec, i), params)
        scores.append(psnr(out, clean))
    return float(np.mean(scores)) if scores else math.nan


def train_joint(dataset, denoiser_init, cfg, log=None):
    """End-to-end training of the denoiser, extrapolation weights and noise schedule."""
    params = init_cascade(denoiser_init, cfg.K, cfg.sigma_max, cfg.sigma_min)
    train, val = _split(dataset, cfg)
    if cfg.epochs == 0:
        return params
    log = log if log is not None else TrainingLog()
    pattern = make_pattern(cfg.pattern)
    rng = np.random.default_rng(cfg.seed)
    sampler = patch_sampler(train, cfg, rng)
    val_crops = _center_crops(val, cfg.patch_size)
    state = AdamState(cfg.beta1, cfg.beta2, cfg.adam_eps)
    best_score, best = -math.inf, params.copy()

    def item_step(item):
        clean, seed = item
        spec = NoiseSpec(**{**cfg.noise.__dict__, "seed": int(seed)})
        out, traj = demosaick_forward(_observe(clean, pattern, spec, 0), params)
        value, grad = loss(out, clean, "l1")
        return value, demosaick_backward(grad, traj, params)

    step = 0
    for epoch in range(cfg.epochs):
        lr = cfg.learning_rate(epoch)
        value = math.nan
        for _ in range(cfg.steps_per_epoch):
            patches, _ = next(sampler)
            seeds = rng.integers(0, 2 ** 62, size=len(patches))
            results = _map_items(item_step, list(zip(patches, seeds)), cfg.threads)
            template = type(results[0][1])(denoiser=params.denoiser.zeros_like(),
                                           w=np.zeros(params.K), sigmas=np.zeros(params.K))
            value, grads = _reduce(results, template)
            if not math.isfinite(value):
                raise NumericError(f"joint training loss became {value} at step {step + 1}")
            adam_step(params.named_arrays(), grads.named_arrays(), state, lr, cfg.weight_decay)
            np.maximum(params.sigmas, SIGMA_FLOOR, out=params.sigmas)
            step += 1
            _checkpoint(cfg, step, params)
            if step % max(cfg.steps_per_epoch, 1) != 0:
                log.record(step=step, epoch=epoch, lr=lr, loss=value, val_psnr=math.nan)
        score = _joint_validation(params, val_crops, pattern, cfg)
        log.record(step=step, epoch=epoch, lr=lr, loss=value, val_psnr=score)
        if math.isnan(score) or score > best_score:
            best_score, best = score, params.copy()
    return best


@dataclass
class TrainingResult:
    params: object
    history: pd.DataFrame
    best_val_psnr: float = math.nan

    def write_log(self, path):
        # +inf PSNR as the string "inf"
        self.history.to_csv(path, index=False)


def run_phase(dataset, cfg, init=None, callback=None):
    """Run `cfg.phase` and collect the parameters with the training log.

    The joint phase needs `init`, a pretrained ResDNetParams.
    """
    log = TrainingLog(callback)
    if cfg.phase == "pretrain":
        params = pretrain_denoiser(dataset, cfg, init=init, log=log)
    else:
        if init is None:
            raise ArgumentError("joint training needs a pretrained denoiser")
        params = train_joint(dataset, init, cfg, log=log)
    history = log.to_frame()
    scores = history["val_psnr"].dropna()
    return TrainingResult(params=params, history=history,
                          best_val_psnr=float(scores.max()) if len(scores) else math.nan)

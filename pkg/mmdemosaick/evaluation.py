"""
Evaluation over directories of (ground truth, observation) pairs and the
parameter-count audit.

A pair shares a file stem: `scene.npz` is the mosaicked observation and
`scene.ppm` (or any other readable image suffix) the ground truth.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .cfa_ops import bilinear_demosaick
from .errors import ArgumentError
from .image_io import IMAGE_SUFFIXES, OBSERVATION_SUFFIX, read_image, read_observation
from .metrics import linrgb_to_srgb, psnr
from .mm_cascade import CascadeParams, demosaick_forward
from .resdnet import ResDNetParams

logger = logging.getLogger(__name__)

METHODS = ("cascade", "bilinear")
REFERENCE_PARAMETER_COUNT = 380_356


@dataclass
class EvalReport:
    """Per-image PSNR table; the aggregate row is the arithmetic mean of each column."""

    per_image: pd.DataFrame
    method: str = "cascade"
    breakdown: pd.DataFrame = field(default=None)

    @property
    def mean_psnr_lin(self):
        return float(self.per_image["psnr_lin"].mean())

    @property
    def mean_psnr_srgb(self):
        return float(self.per_image["psnr_srgb"].mean())

    def table(self):
        mean = self.per_image.drop(columns="image").mean().to_dict()
        return pd.concat([self.per_image, pd.DataFrame([{"image": "mean", **mean}])], ignore_index=True)

    def to_csv(self, path):
        self.table().to_csv(path, index=False, float_format="%.6f")


def find_pairs(path):
    """Sorted (stem, truth path, observation path) triples found in `path`."""
    path = Path(path)
    if not path.is_dir():
        raise ArgumentError(f"evaluation directory {path} does not exist")
    truths = {p.stem: p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES}
    pairs = []
    for obs in sorted(path.glob(f"*{OBSERVATION_SUFFIX}")):
        if obs.stem in truths:
            pairs.append((obs.stem, truths[obs.stem], obs))
        else:
            logger.warning("no ground truth for %s", obs.name)
    if not pairs:
        raise ArgumentError(f"no (truth, observation) pairs found in {path}")
    return pairs


def reconstruct(y, method="cascade", model=None):
    if method == "bilinear":
        return bilinear_demosaick(y)
    if method != "cascade":
        raise ArgumentError(f"method must be one of {METHODS}, got {method!r}")
    if not isinstance(model, CascadeParams):
        raise ArgumentError("the cascade method needs a cascade model file")
    out, _ = demosaick_forward(y, model)
    return out


def evaluate_pair(truth, y, method="cascade", model=None):
    if truth.shape != y.data.shape:
        truth = truth[:, :, :3] if truth.shape[2] > 3 else np.repeat(truth, 3, axis=2)
    start = time.perf_counter()
    out = reconstruct(y, method, model)
    runtime = time.perf_counter() - start
    return {
        "psnr_lin": psnr(out, truth),
        "psnr_srgb": psnr(linrgb_to_srgb(out), linrgb_to_srgb(truth)),
        "runtime_s": runtime,
    }, out


def evaluate_directory(path, method="cascade", model=None, threads=1, dtype=np.float64):
    """Reconstruct every observation in `path` and score it against its ground truth."""
    pairs = find_pairs(path)
    if model is not None and dtype != np.float64:
        model = model.astype(dtype)

    def run(pair):
        stem, truth_path, obs_path = pair
        y = read_observation(obs_path)
        y.data = y.data.astype(dtype)
        scores, _ = evaluate_pair(read_image(truth_path), y, method, model)
        logger.info("%s: %.3f dB linRGB, %.3f dB sRGB", stem, scores["psnr_lin"], scores["psnr_srgb"])
        return {"image": stem, **scores}

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run, pairs))
    else:
        rows = [run(p) for p in pairs]
    breakdown = parameter_breakdown(model) if model is not None else None
    return EvalReport(per_image=pd.DataFrame(rows), method=method, breakdown=breakdown)


# --- parameter audit -------------------------------------------------------

def _group_of(name):
    if name.startswith("cascade."):
        return name.replace(".", " ")
    return name.split(".", 1)[0]


def parameter_breakdown(params, reference=REFERENCE_PARAMETER_COUNT):
    """Trainable-parameter counts per group, with and without biases.

    Every raw filter entry, filter scale, bias, PReLU slope and the projection
    gamma count as one parameter each; a cascade adds its K extrapolation
    weights and K noise levels.
    """
    if not isinstance(params, (CascadeParams, ResDNetParams)):
        raise ArgumentError(f"cannot audit {type(params).__name__}")
    counts = {}
    for name, arr in params.named_arrays().items():
        group = _group_of(name)
        total, no_bias = counts.get(group, (0, 0))
        counts[group] = (total + arr.size, no_bias + (0 if name.endswith(".bias") else arr.size))
    frame = pd.DataFrame([{"group": g, "count": c, "count_without_bias": nb} for g, (c, nb) in counts.items()])
    total = {"group": "total", "count": int(frame["count"].sum()),
             "count_without_bias": int(frame["count_without_bias"].sum())}
    frame = pd.concat([frame, pd.DataFrame([total])], ignore_index=True)
    frame["relative_to_reference"] = (frame["count"] - reference) / reference
    frame.loc[frame["group"] != "total", "relative_to_reference"] = np.nan
    return frame

"""
Plain-text training configuration.

One `key = value` per line, `#` starts a comment, blank lines are ignored.
Keys are TrainConfig field names; `noise.<field>` addresses the NoiseSpec.
"""
import dataclasses
import logging
from pathlib import Path

from .errors import ArgumentError
from .noise_sim import NoiseSpec
from .training import TrainConfig

logger = logging.getLogger(__name__)

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(key, raw, kind):
    try:
        if kind is bool:
            lowered = raw.lower()
            if lowered not in _TRUE | _FALSE:
                raise ValueError(raw)
            return lowered in _TRUE
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError:
        raise ArgumentError(f"{key}: cannot read {raw!r} as {kind.__name__}") from None


def parse_config(text):
    """Parse config text into {key: raw string}, keeping dotted keys as written."""
    entries = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ArgumentError(f"line {lineno}: expected 'key = value', got {line!r}")
        entries[key] = value
    return entries


def _typed_fields(cls):
    return {f.name: f.type for f in dataclasses.fields(cls)}


def build_config(entries, base=None):
    """Apply {key: raw value} entries on top of `base` and return a new TrainConfig."""
    base = base or TrainConfig()
    train_fields = _typed_fields(TrainConfig)
    noise_fields = _typed_fields(NoiseSpec)
    updates, noise_updates = {}, {}
    for key, raw in entries.items():
        if key.startswith("noise."):
            name = key[len("noise."):]
            if name not in noise_fields:
                raise ArgumentError(f"unknown config key {key!r}")
            noise_updates[name] = _coerce(key, raw, noise_fields[name])
        elif key in train_fields and key != "noise":
            updates[key] = _coerce(key, raw, train_fields[key])
        else:
            raise ArgumentError(f"unknown config key {key!r}")
    noise = dataclasses.replace(base.noise, **noise_updates)
    return dataclasses.replace(base, noise=noise, **updates)


def load_config(path, base=None):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ArgumentError(f"cannot read config {path}: {err.strerror}") from None
    cfg = build_config(parse_config(text), base)
    logger.debug("loaded config from %s: %s", path, cfg)
    return cfg

import pytest

from mmdemosaick.config import build_config, load_config, parse_config
from mmdemosaick.errors import ArgumentError
from mmdemosaick.training import TrainConfig

CONFIG = """
# full-size joint training
phase = joint
depth = 5
filters = 64
patch_size = 180   # crop size
K = 10
lr = 1e-2
flips = no
noise.kind = heteroscedastic
noise.a_shot = 0.05
noise.b_read = 4
"""


def test_parse_keeps_dotted_keys():
    entries = parse_config(CONFIG)
    assert entries["patch_size"] == "180"
    assert entries["noise.a_shot"] == "0.05"


def test_build_coerces_types():
    cfg = build_config(parse_config(CONFIG))
    assert cfg.phase == "joint" and cfg.depth == 5 and cfg.K == 10
    assert cfg.lr == pytest.approx(1e-2)
    assert cfg.flips is False
    assert cfg.noise.kind == "heteroscedastic"
    assert cfg.noise.b_read == 4.0
    assert cfg.batch_size == TrainConfig().batch_size


def test_load_from_file(tmp_path):
    path = tmp_path / "train.cfg"
    path.write_text(CONFIG)
    assert load_config(path).filters == 64


@pytest.mark.parametrize("text", ["learning_rate = 1", "noise.gain = 2", "depth = five",
                                  "flips = maybe", "just a line", "noise = 3"])
def test_rejects_bad_entries(text):
    with pytest.raises(ArgumentError):
        build_config(parse_config(text))


def test_values_are_validated():
    with pytest.raises(ArgumentError):
        build_config({"lr": "-1"})


def test_missing_file(tmp_path):
    with pytest.raises(ArgumentError):
        load_config(tmp_path / "absent.cfg")

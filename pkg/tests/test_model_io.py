import struct

import numpy as np
import pytest

from mmdemosaick.errors import FormatError
from mmdemosaick.evaluation import parameter_breakdown
from mmdemosaick.mm_cascade import CascadeParams
from mmdemosaick.model_io import load_denoiser, load_model, save_model
from mmdemosaick.resdnet import ResDNetParams


@pytest.fixture
def cascade_file(tmp_path, tiny_cascade):
    tiny_cascade.w[:] = [0.0, 0.3, 0.55]
    tiny_cascade.denoiser.gamma[...] = 0.125
    path = tmp_path / "cascade.rdnc"
    save_model(tiny_cascade, path)
    return path


def test_round_trip_at_single_precision(cascade_file, tiny_cascade):
    loaded = load_model(cascade_file)
    assert isinstance(loaded, CascadeParams)
    original = tiny_cascade.named_arrays()
    restored = loaded.named_arrays()
    assert list(restored) == list(original)
    for name, arr in original.items():
        np.testing.assert_array_equal(restored[name], arr.astype(np.float32).astype(np.float64), err_msg=name)
    assert loaded.denoiser.tail.filter_axis == 1


def test_denoiser_only_file(tmp_path, tiny_denoiser):
    path = tmp_path / "denoiser.rdnc"
    save_model(tiny_denoiser, path)
    loaded = load_model(path)
    assert isinstance(loaded, ResDNetParams)
    assert loaded.count() == tiny_denoiser.count()


def test_load_denoiser_from_cascade(cascade_file, tiny_cascade):
    assert load_denoiser(cascade_file).count() == tiny_cascade.denoiser.count()


def test_single_precision_load(cascade_file):
    loaded = load_model(cascade_file, dtype=np.float32)
    assert loaded.denoiser.dtype == np.float32
    assert loaded.w.dtype == np.float32


def test_saving_is_deterministic(tmp_path, tiny_cascade):
    a, b = tmp_path / "a.rdnc", tmp_path / "b.rdnc"
    save_model(tiny_cascade, a)
    save_model(tiny_cascade, b)
    assert a.read_bytes() == b.read_bytes()


def test_element_count_matches_breakdown(cascade_file):
    raw = cascade_file.read_bytes()
    payload_floats = (len(raw) - _header_bytes(raw)) // 4
    breakdown = parameter_breakdown(load_model(cascade_file))
    assert payload_floats == breakdown.loc[breakdown["group"] == "total", "count"].iloc[0]


def _header_bytes(raw):
    # everything that is not float payload
    pos, count = 24, struct.unpack_from("<I", raw, 20)[0]
    header = 24
    for _ in range(count):
        (name_len,) = struct.unpack_from("<I", raw, pos)
        (rank,) = struct.unpack_from("<I", raw, pos + 4 + name_len)
        dims = struct.unpack_from(f"<{rank}I", raw, pos + 8 + name_len)
        meta = 8 + name_len + 4 * rank
        header += meta
        pos += meta + 4 * int(np.prod(dims, dtype=np.int64))
    return header


def test_bad_magic(cascade_file):
    raw = bytearray(cascade_file.read_bytes())
    raw[:4] = b"XXXX"
    cascade_file.write_bytes(bytes(raw))
    with pytest.raises(FormatError) as err:
        load_model(cascade_file)
    assert err.value.offset == 0


def test_unknown_version(cascade_file):
    raw = bytearray(cascade_file.read_bytes())
    raw[4:8] = struct.pack("<I", 2)
    cascade_file.write_bytes(bytes(raw))
    with pytest.raises(FormatError, match="version"):
        load_model(cascade_file)


@pytest.mark.parametrize("keep", [3, 10, 30, -5])
def test_truncation(cascade_file, keep):
    raw = cascade_file.read_bytes()
    cascade_file.write_bytes(raw[:keep])
    with pytest.raises(FormatError) as err:
        load_model(cascade_file)
    assert err.value.offset is not None


def test_trailing_bytes(cascade_file):
    cascade_file.write_bytes(cascade_file.read_bytes() + b"\0")
    with pytest.raises(FormatError):
        load_model(cascade_file)

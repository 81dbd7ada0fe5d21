import numpy as np
import pytest

from mmdemosaick.cfa_ops import make_pattern, mosaic
from mmdemosaick.errors import FormatError
from mmdemosaick.image_io import (
    decode_image,
    encode_image,
    read_image,
    read_observation,
    write_image,
    write_observation,
)


@pytest.mark.parametrize("suffix", [".ppm", ".png"])
def test_8bit_round_trip_is_exact(tmp_path, rng, suffix):
    img = rng.integers(0, 256, size=(48, 48, 3)).astype(float)
    write_image(tmp_path / f"a{suffix}", img)
    np.testing.assert_array_equal(read_image(tmp_path / f"a{suffix}"), img)


@pytest.mark.parametrize("suffix", [".ppm", ".png"])
def test_16bit_round_trip(tmp_path, rng, suffix):
    levels = rng.integers(0, 65536, size=(6, 5, 3))
    img = levels * (255.0 / 65535.0)
    write_image(tmp_path / f"a{suffix}", img, bits=16)
    back = read_image(tmp_path / f"a{suffix}")
    np.testing.assert_array_equal(np.rint(back * (65535.0 / 255.0)), levels)
    np.testing.assert_allclose(back, img, atol=1e-9)


def test_channel_order_is_rgb(tmp_path):
    img = np.zeros((2, 2, 3))
    img[..., 0] = 255.0
    write_image(tmp_path / "red.png", img)
    back = read_image(tmp_path / "red.png")
    assert np.all(back[..., 0] == 255) and np.all(back[..., 1:] == 0)


def test_grayscale(tmp_path):
    img = np.arange(12, dtype=float).reshape(3, 4, 1) * 20
    write_image(tmp_path / "g.pgm", img)
    back = read_image(tmp_path / "g.pgm")
    assert back.shape == (3, 4, 1)
    np.testing.assert_array_equal(back, img)


def test_pgm_with_header_comment(tmp_path):
    path = tmp_path / "g.pgm"
    path.write_bytes(b"P5\n# made by hand\n2 1\n255\n" + bytes([0, 200]))
    img = read_image(path)
    assert img.shape == (1, 2, 1)
    np.testing.assert_array_equal(img[0, :, 0], [0.0, 200.0])


def test_not_an_image():
    with pytest.raises(FormatError):
        decode_image(b"XX\n1 1\n255\n" + bytes(3), "junk.ppm")


def test_truncated_payload(tmp_path):
    full = encode_image(np.full((16, 16, 3), 90.0), ".ppm")
    path = tmp_path / "x.ppm"
    path.write_bytes(full[:-100])
    with pytest.raises(FormatError):
        read_image(path)


def test_missing_file(tmp_path):
    with pytest.raises(OSError):
        read_image(tmp_path / "absent.png")


def test_npy_round_trip(tmp_path, rng):
    img = rng.normal(size=(3, 4, 3))
    write_image(tmp_path / "a.npy", img)
    np.testing.assert_array_equal(read_image(tmp_path / "a.npy"), img)


@pytest.mark.parametrize("name", ["a.tiff", "a.jpg"])
def test_unsupported_suffix(tmp_path, name):
    with pytest.raises(FormatError):
        write_image(tmp_path / name, np.zeros((2, 2, 3)))


def test_observation_round_trip(tmp_path, clean_image):
    y = mosaic(clean_image, make_pattern("xtrans"), sigma=4.0)
    write_observation(tmp_path / "obs.npz", y)
    loaded = read_observation(tmp_path / "obs.npz")
    assert loaded.pattern.name == "xtrans" and loaded.sigma == 4.0
    np.testing.assert_array_equal(loaded.data, y.data)


def test_bad_observation(tmp_path):
    np.savez(tmp_path / "obs.npz", data=np.zeros((2, 2, 3)))
    with pytest.raises(FormatError):
        read_observation(tmp_path / "obs.npz")

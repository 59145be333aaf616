import numpy as np
import pytest

from pureconf.data import (
    PGMError,
    generate_phantoms,
    load_directory,
    load_image_pgm,
    save_image_pgm,
    write_directory,
)
from pureconf.linops import ImageGrid


def test_phantoms_deterministic_and_in_range():
    a = generate_phantoms(2, (32, 32, 1), 5)
    b = generate_phantoms(2, (32, 32, 1), 5)
    assert a == b
    assert a[0] != a[1]
    for img in generate_phantoms(20, (24, 20, 1), 1):
        assert img.values.min() >= 0 and img.values.max() <= 1


def test_phantom_indexing_is_stable():
    full = generate_phantoms(5, (16, 16, 1), 3)
    assert generate_phantoms(2, (16, 16, 1), 3, start=3) == full[3:]


def test_phantom_mean_intensity_band():
    means = [img.values.mean() for img in generate_phantoms(1000, (32, 32, 1), 0)]
    assert 0.15 <= np.mean(means) <= 0.55


def test_generate_rejects_zero_count():
    with pytest.raises(ValueError):
        generate_phantoms(0, (4, 4, 1), 0)


def test_pgm_known_bytes(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 255, 128, 64]))
    img = load_image_pgm(p)
    np.testing.assert_allclose(img.values, [0, 1, 128 / 255, 64 / 255])


def test_pgm_header_comments(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# made by hand\n3 # width\n1\n# maxval next\n255\n" + bytes([10, 20, 30]))
    img = load_image_pgm(p)
    assert img.dims == (1, 3, 1)
    np.testing.assert_allclose(img.values, np.array([10, 20, 30]) / 255)


def test_pgm_16bit_big_endian(tmp_path):
    p = tmp_path / "w.pgm"
    p.write_bytes(b"P5 2 1 1000\n" + bytes([0x01, 0xF4, 0x03, 0xE8]))
    np.testing.assert_allclose(load_image_pgm(p).values, [0.5, 1.0])


@pytest.mark.parametrize("maxval", [255, 65535])
def test_pgm_roundtrip(tmp_path, rng, maxval):
    img = ImageGrid.from_array(rng.random((7, 5)))
    save_image_pgm(img, tmp_path / "r.pgm", maxval)
    back = load_image_pgm(tmp_path / "r.pgm")
    assert back.dims == img.dims
    assert np.max(np.abs(back.values - img.values)) <= 1 / (2 * maxval) + 1e-15


@pytest.mark.parametrize(
    "payload",
    [b"P2\n1 1\n255\n0", b"P5\n2 2\n255\n" + bytes([1, 2]), b"P5\n2 x\n255\n", b"P5\n2", b"P5\n1 1\n0\n\x00"],
)
def test_pgm_malformed(tmp_path, payload):
    p = tmp_path / "bad.pgm"
    p.write_bytes(payload)
    with pytest.raises(PGMError):
        load_image_pgm(p)


def test_directory_roundtrip(tmp_path):
    imgs = generate_phantoms(3, (8, 8, 1), 2)
    write_directory(imgs, tmp_path / "d")
    back = load_directory(tmp_path / "d")
    assert len(back) == 3
    for a, b in zip(imgs, back):
        assert np.max(np.abs(a.values - b.values)) <= 1 / 510 + 1e-15

import numpy as np
import pytest
from hypothesis import given, strategies as st
from PIL import Image

from bbsrc import imgio
from bbsrc.errors import DataError, ValidationError


def write_pgm8(path, arr):
    h, w = arr.shape
    path.write_bytes(f"P5\n{w} {h}\n255\n".encode() + arr.astype(np.uint8).tobytes())


def test_pgm8_all_white_and_black(tmp_path):
    write_pgm8(tmp_path / "w.pgm", np.full((3, 4), 255))
    write_pgm8(tmp_path / "b.pgm", np.zeros((3, 4)))
    assert np.all(imgio.load_image(tmp_path / "w.pgm").pixels == 1.0)
    assert np.all(imgio.load_image(tmp_path / "b.pgm").pixels == 0.0)


def test_png16_rescale(tmp_path):
    arr = np.full((2, 2), 32768, dtype=np.uint16)
    Image.fromarray(arr).save(tmp_path / "a.png")
    img = imgio.load_image(tmp_path / "a.png")
    assert img.pixels[0, 0] == pytest.approx(32768 / 65535, abs=1e-12)


def test_ascii_pgm_with_comment(tmp_path):
    (tmp_path / "a.pgm").write_text("P2\n# comment\n2 1\n15\n0 15\n")
    assert np.allclose(imgio.load_image(tmp_path / "a.pgm").pixels, [[0.0, 1.0]])


def test_color_png_rejected(tmp_path):
    Image.fromarray(np.zeros((2, 2, 3), dtype=np.uint8)).save(tmp_path / "c.png")
    with pytest.raises(DataError):
        imgio.load_image(tmp_path / "c.png")


def test_missing_file_names_path(tmp_path):
    with pytest.raises(DataError, match="nope.pgm"):
        imgio.load_image(tmp_path / "nope.pgm")


def test_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    a = np.round(rng.random((5, 7)) * 65535) / 65535
    imgio.save_pgm(tmp_path / "r.pgm", a)
    assert np.allclose(imgio.load_image(tmp_path / "r.pgm").pixels, a, atol=1e-12)


def test_vector_layout():
    assert list(imgio.to_vector([[1.0, 2.0], [3.0, 4.0]])) == [1.0, 2.0, 3.0, 4.0]
    assert list(imgio.to_vector([[0.5]])) == [0.5]
    v = imgio.to_vector(np.arange(6.0).reshape(3, 2) / 10)
    assert v.size == 6 and v[3] == pytest.approx(0.3)


@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 1000))
def test_vector_roundtrip(h, w, seed):
    a = np.random.default_rng(seed).random((h, w))
    assert np.array_equal(imgio.from_vector(imgio.to_vector(a), h, w).pixels, a)


def test_block_counts():
    assert imgio.block_decompose(np.zeros((400, 400)), 25, 25).nb == 256
    assert imgio.block_decompose(np.zeros((400, 400)), 400, 400).nb == 1
    g = imgio.block_decompose(np.arange(25.0).reshape(5, 5) / 24, 2, 2)
    assert g.nb == 4
    covered = np.concatenate([b.pixels.ravel() for b in g.blocks]) * 24
    assert 4 not in np.round(covered) % 5  # column 4 dropped
    assert np.all(np.round(covered) < 20)  # row 4 dropped


def test_block_errors():
    with pytest.raises(ValidationError):
        imgio.block_decompose(np.zeros((4, 4)), 0, 2)
    with pytest.raises(ValidationError):
        imgio.block_decompose(np.zeros((4, 4)), 5, 2)


@given(st.sampled_from([(1, 1), (2, 2), (2, 4), (4, 2)]), st.integers(0, 100))
def test_blocks_permute_pixels(mn, seed):
    a = np.random.default_rng(seed).random((8, 8))
    flat = np.sort(imgio.block_vectors(a, *mn).ravel())
    assert np.array_equal(flat, np.sort(a.ravel()))


def test_downsample_examples():
    assert list(imgio.downsample(np.array([1.0, 3.0, 5.0, 7.0]), "1/2")) == [2.0, 6.0]
    a = np.random.default_rng(1).random((6, 6))
    assert np.array_equal(imgio.downsample(a, 1), imgio.to_vector(a))
    assert imgio.downsample(np.zeros((400, 400)), "1/20").size == 8000
    assert list(imgio.downsample(np.arange(6.0), "1/2", "decimate")) == [0.0, 2.0, 4.0]
    for bad in (0, "3/2", -1):
        with pytest.raises(ValidationError):
            imgio.downsample(a, bad)


def test_manifest(tmp_path):
    m = tmp_path / "m.csv"
    m.write_text("path,label\na.pgm,healthy\nb.pgm,osteo\nc.pgm,healthy\n")
    man = imgio.load_manifest(m)
    assert man.classes == ("healthy", "osteo") and man.counts == (2, 1) and man.k == 2 and man.s == 3
    assert list(man.label_indices()) == [0, 1, 0]
    assert man.paths[0] == tmp_path / "a.pgm"


def test_manifest_single_class_accepted(tmp_path):
    m = tmp_path / "m.csv"
    m.write_text("path,label\na.pgm,x\n")
    assert imgio.load_manifest(m).k == 1


@pytest.mark.parametrize("body", ["", "path,label\na.pgm,x\na.pgm,y\n", "path,label\na.pgm,\n"])
def test_manifest_errors(tmp_path, body):
    m = tmp_path / "m.csv"
    m.write_text(body)
    with pytest.raises(DataError):
        imgio.load_manifest(m)


def test_manifest_roundtrip(tmp_path):
    man = imgio.manifest_from_entries([(tmp_path / "x" / "a.pgm", "p"), (tmp_path / "b.pgm", "q")], tmp_path)
    imgio.write_manifest(tmp_path / "m.csv", man)
    assert imgio.load_manifest(tmp_path / "m.csv").entries == man.entries

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from skimage.filters import threshold_multiotsu

from bbsrc.errors import ValidationError
from bbsrc.texture import (ExtractConfig, extract_all, feature_names, read_feature_table,
                           write_feature_table)
from bbsrc.texture import edges, fractal, gabor, glcm, laws, lbp, spectral, stats, wavelet

from oracles import sierpinski_carpet

RNG = np.random.default_rng(1234)


# ---------------------------------------------------------------- stats

def test_stats_constant():
    st_, deg = stats.subband_stats([5, 5, 5, 5])
    assert deg
    assert st_["variance"] == 0 and st_["entropy"] == 0 and st_["skewness"] == 0
    assert st_["energy"] == 100


def test_stats_symmetric_skew_zero():
    st_, _ = stats.subband_stats([-1, 1] * 50)
    assert st_["skewness"] == 0


def test_stats_gaussian_kurtosis():
    st_, _ = stats.subband_stats(np.random.default_rng(0).standard_normal(100_000))
    assert abs(st_["kurtosis"] - 3) < 0.1


# -------------------------------------------------------------- fractal

def test_box_count_square_line_carpet():
    assert abs(fractal.box_count_dimension(np.ones((256, 256), bool)).dimension - 2) < 0.05
    line = np.zeros((256, 256), bool)
    line[100, :] = True
    assert abs(fractal.box_count_dimension(line).dimension - 1) < 0.05
    d = fractal.box_count_dimension(sierpinski_carpet(5)).dimension
    assert abs(d - math.log(8) / math.log(3)) < 0.05


def test_box_count_too_few_ladder_points():
    with pytest.raises(ValidationError):
        fractal.box_count_dimension(np.ones((5, 5), bool))
    with pytest.raises(ValidationError):
        fractal.box_count_dimension(np.eye(64, dtype=bool) & False)


@settings(max_examples=60, deadline=None)
@given(arrays(bool, st.tuples(st.integers(8, 40), st.integers(8, 40))))
def test_box_count_slope_in_range(mask):
    if mask.sum() < 2:
        return
    r = fractal.box_count_dimension(mask)
    assert 0.0 <= r.dimension <= 2.0
    assert np.isfinite(r.residual)


def test_otsu_two_valued():
    img = np.where(np.arange(100).reshape(10, 10) % 3 == 0, 0.2, 0.8)
    r = fractal.multi_otsu(img, 2)
    assert 0.2 < r.thresholds[0] < 0.8
    assert np.array_equal(r.masks[0], img == 0.2)


def test_otsu_constant_flagged():
    r = fractal.multi_otsu(np.full((10, 10), 0.3), 8)
    assert "constant" in r.flags and len(r.masks) == 1


def test_otsu_matches_exhaustive_oracle():
    rng = np.random.default_rng(7)
    vals = np.concatenate([rng.normal(m, 0.04, 4000) for m in (0.15, 0.4, 0.62, 0.85)])
    img = np.clip(vals, 0, 1).reshape(80, 200)
    got = fractal.multi_otsu(img, 4).thresholds
    ref = threshold_multiotsu(img, classes=4, nbins=256)
    assert np.all(np.abs(got - ref) <= 0.02)


def test_fractal_features_constant_and_checkerboard():
    r = fractal.fractal_features(np.full((32, 32), 0.5))
    assert len(r.names) == 24 and np.all(r.values == 0) and "constant" in r.flags
    cb = (np.indices((64, 64)).sum(axis=0) % 2).astype(float)
    r = fractal.fractal_features(cb)
    areas = r.values[1::3]
    assert np.count_nonzero(areas) == 2
    assert sorted(areas[areas > 0]) == [0.5, 0.5]


def test_fractal_features_noise_partition():
    r = fractal.fractal_features(RNG.random((64, 64)))
    areas = r.values[1::3]
    assert np.all(areas > 0)
    assert abs(areas.sum() - 1) < 1e-12


# -------------------------------------------------------------- wavelet

def test_wavelet_constant_highpass_zero():
    levels, _ = wavelet.wavelet_frames(np.full((32, 32), 0.7))
    for bands in levels:
        for b in ("HG", "GH", "GG"):
            assert np.all(bands[b] == 0)


def test_wavelet_step_edge():
    img = np.zeros((16, 16))
    img[:, 8:] = 1.0
    levels, _ = wavelet.wavelet_frames(img, wavelet.WaveletConfig(maxlevel=1))
    gh = levels[0]["GH"]
    assert np.all(gh[:, 7] != 0) and np.count_nonzero(gh[:, [c for c in range(16) if c != 7]]) == 0
    assert np.max(np.abs(levels[0]["HG"])) < 1e-15


def test_wavelet_energy_periodic():
    x = RNG.random((8, 8))
    levels, _ = wavelet.wavelet_frames(x, wavelet.WaveletConfig(maxlevel=1, boundary="periodic"))
    total = sum(float((b ** 2).sum()) for b in levels[0].values())
    assert abs(total - float((x ** 2).sum())) < 1e-9


def test_wavelet_shapes_and_depth():
    levels, low = wavelet.wavelet_frames(RNG.random((20, 24)))
    assert all(b.shape == (20, 24) for lv in levels for b in lv.values()) and low.shape == (20, 24)
    with pytest.raises(ValidationError):
        wavelet.wavelet_frames(RNG.random((8, 8)), wavelet.WaveletConfig(maxlevel=3))


# ---------------------------------------------------------------- gabor

def test_gabor_bank_size_and_constant():
    maps = gabor.gabor_bank(np.full((100, 100), 0.4))
    assert len(maps) == 24
    assert max(m.max() for *_, m in maps) < 1e-12


def test_gabor_grating_selectivity():
    cfg = gabor.GaborConfig()
    y, x = np.mgrid[:128, :128]
    for s_t, o_t in [(1, 2), (0, 0), (2, 4)]:
        lam, th = cfg.wavelength(s_t), cfg.theta(o_t)
        img = 0.5 + 0.4 * np.cos(2 * np.pi * (x * np.cos(th) + y * np.sin(th)) / lam)
        means = {(s, o): m.mean() for s, o, m in gabor.gabor_bank(img, cfg)}
        target = means[(s_t, o_t)]
        for (s, o), v in means.items():
            dist = min((o - o_t) % 6, (o_t - o) % 6)
            if dist >= 2:
                assert target > v


def test_gabor_kernel_too_large():
    with pytest.raises(ValidationError):
        gabor.gabor_bank(RNG.random((30, 30)))


# ------------------------------------------------------------------ LBP

def test_lbp_constant():
    h = lbp.lbp_histogram(np.full((10, 10), 0.3))
    assert h[0] == 1.0


def test_lbp_dark_center():
    patch = np.full((3, 3), 0.9)
    patch[1, 1] = 0.1
    assert lbp.lbp_codes(patch)[0, 0] == 255


def test_lbp_hand_patch():
    patch = np.array([[5, 9, 1], [3, 4, 7], [6, 2, 8]]) / 10.0
    # order: TL=5 T=9 TR=1 R=7 BR=8 B=2 BL=6 L=3 -> bits 1 1 0 1 1 0 1 0
    assert lbp.lbp_codes(patch)[0, 0] == 0b11011010


def test_lbp_conventions_differ_on_ties():
    patch = np.full((3, 3), 0.5)
    assert lbp.lbp_codes(patch)[0, 0] == 0
    assert lbp.lbp_codes(patch, "standard")[0, 0] == 255


def test_lbp_small_image():
    with pytest.raises(ValidationError):
        lbp.lbp_histogram(np.zeros((2, 5)))


# ------------------------------------------------------------- spectral

def _dft_direct(f):
    M, N = f.shape
    m = np.arange(M)[:, None]
    n = np.arange(N)[None, :]
    out = np.zeros((M, N), complex)
    for k in range(M):
        for l in range(N):
            out[k, l] = (f * np.exp(-2j * np.pi * (k * m / M + l * n / N))).sum() / (M * N)
    return out


def test_dft_constant_and_dct_constant():
    v = spectral.dft_features(np.full((16, 16), 0.3)).values.reshape(8, 8)
    assert v[0, 0] == pytest.approx(0.3) and np.abs(v).sum() - v[0, 0] < 1e-14
    c = spectral.dct_features(np.full((16, 16), 0.3)).values.reshape(8, 8)
    assert abs(c[0, 0]) > 0 and np.abs(c).sum() - abs(c[0, 0]) < 1e-12


def test_dft_matches_direct_sum_and_parseval():
    m = np.arange(16)[:, None] * np.ones((1, 16))
    f = 0.5 + 0.5 * np.cos(2 * np.pi * 3 * m / 16)
    ref = _dft_direct(f)
    F = spectral.dft2(f)
    assert np.allclose(F, ref, atol=1e-12)
    mag = np.abs(F)
    assert mag[3, 0] == pytest.approx(0.25) and mag[13, 0] == pytest.approx(0.25)
    g = RNG.random((16, 16))
    assert abs((np.abs(spectral.dft2(g)) ** 2).sum() - (g ** 2).mean()) < 1e-12


def test_spectral_small_image():
    with pytest.raises(ValidationError):
        spectral.dft_features(np.zeros((7, 9)))


# ----------------------------------------------------------------- Laws

def test_laws_constant_and_count():
    r = laws.laws_features(np.full((20, 20), 0.6))
    assert len(r.names) == 144 and np.all(r.values == 0)
    assert len(laws.MASKS) == 24


def test_laws_e5l5_on_step():
    img = np.full((30, 30), 0.2)
    img[:, 15:] = 0.8
    resp = laws.laws_maps(img)["E5L5"]
    cols = np.flatnonzero(np.abs(resp).max(axis=0) > 1e-12)
    # level normalization and the 5-tap mask each spread the edge by 2 px
    assert cols.min() >= 11 and cols.max() <= 18


# ---------------------------------------------------------------- edges

def test_edge_constant_and_ramp():
    assert edges.edge_histogram(np.full((10, 10), 0.5))[0] == 1.0
    ramp = np.tile(np.arange(20) * 0.01, (20, 1))
    h = edges.edge_histogram(ramp, 8)
    assert np.count_nonzero(h) == 1 and h[-1] == 1.0


def test_edge_random_sum():
    h = edges.edge_histogram(RNG.random((16, 16)))
    assert abs(h.sum() - 1) < 1e-12
    with pytest.raises(ValidationError):
        edges.edge_histogram(RNG.random((16, 16)), 1)


# ----------------------------------------------------------------- GLCM

def test_glcm_hand_count():
    P = glcm.glcm(np.array([[0.0, 0.0], [1.0, 1.0]]), glcm.GlcmConfig(levels=2, angles=(0,)))[0]
    assert np.allclose(P, [[0.5, 0], [0, 0.5]])
    assert glcm.glcm_stats(P)[0]["contrast"] == 0


def test_glcm_constant():
    P = glcm.glcm(np.full((6, 6), 0.4))[0]
    s, deg = glcm.glcm_stats(P)
    assert deg and s["energy"] == 1 and s["contrast"] == 0 and s["homogeneity"] == 1
    assert s["correlation"] == 0


@settings(max_examples=30, deadline=None)
@given(arrays(float, st.tuples(st.integers(2, 12), st.integers(2, 12)), elements=st.floats(0, 1)))
def test_histograms_sum_to_one(img):
    for P in glcm.glcm(img).values():
        assert abs(P.sum() - 1) < 1e-12
    if min(img.shape) >= 3:
        assert abs(lbp.lbp_histogram(img).sum() - 1) < 1e-12
        assert abs(edges.edge_histogram(img).sum() - 1) < 1e-12


# -------------------------------------------------------------- extract

def test_extract_default_length_and_determinism():
    img = RNG.random((96, 96))
    a = extract_all(img)
    b = extract_all(img.copy())
    assert len(a) == 764 and a.names == feature_names()
    assert a.values.tobytes() == b.values.tobytes()
    assert len(set(a.names)) == len(a.names)


def test_extract_lbp_only():
    assert len(extract_all(RNG.random((40, 40)), ExtractConfig(families=("lbp",)))) == 256


def test_extract_error_names_family():
    with pytest.raises(ValidationError, match="gabor"):
        extract_all(RNG.random((40, 40)))


def test_extract_constant_is_finite_and_flagged():
    v = extract_all(np.full((96, 96), 0.5))
    assert np.all(np.isfinite(v.values)) and v.flags


def test_feature_table_roundtrip(tmp_path):
    cfg = ExtractConfig(families=("lbp", "glcm"))
    vecs = [extract_all(RNG.random((20, 20)), cfg) for _ in range(3)]
    p = tmp_path / "f.csv"
    write_feature_table(p, ["a.pgm", "b.pgm", "c.pgm"], vecs)
    t = read_feature_table(p)
    assert t.paths == ("a.pgm", "b.pgm", "c.pgm") and t.names == vecs[0].names
    assert np.array_equal(t.values, np.stack([v.values for v in vecs]))

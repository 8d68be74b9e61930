from types import SimpleNamespace

import numpy as np
import pytest

from bbsrc import ensemble as ens
from bbsrc.errors import DataError, SolverError, ValidationError
from bbsrc.sparse import SolverConfig
from bbsrc.srcclf import InputTransform, build_src, classify_src

from oracles import block_vote_tally, tau_dense_oracle

OMP2 = SolverConfig(method="omp", epsilon=0.0, max_iterations=2)


def outcome(j, label, residuals=(1.0, 1.0), masses=(1.0, 1.0)):
    rep = SimpleNamespace(label_index=label, residuals=np.array(residuals), masses=np.array(masses))
    return ens.BlockOutcome(j, rep)


def rand_images(n, shape=(8, 8), seed=0):
    rng = np.random.default_rng(seed)
    return [rng.random(shape) for _ in range(n)], np.array([0, 1] * (n // 2))


# ------------------------------------------------------------- training

def test_block_dictionary_shapes():
    imgs, y = rand_images(6, (8, 12))
    m = ens.train_block_ensemble(imgs, y, ("a", "b"), 4, solver=OMP2)
    assert m.nb == 6
    assert all(D.atoms.shape == (16, 6) for D in m.dictionaries)
    assert all(np.array_equal(D.column_class, m.column_class) for D in m.dictionaries)


def test_constant_block_error_names_block():
    imgs, y = rand_images(4)
    for im in imgs:
        im[4:, 4:] = 0.0
    with pytest.raises(DataError, match="block 3"):
        ens.train_block_ensemble(imgs, y, ("a", "b"), 4)


def test_size_mismatch():
    with pytest.raises(ValidationError):
        ens.train_block_ensemble([np.ones((4, 4)), np.ones((4, 5))], [0, 1], ("a", "b"), 2)


# ------------------------------------------------------------- block solve

def test_training_image_votes_own_class_everywhere():
    imgs, y = rand_images(6, seed=2)
    m = ens.train_block_ensemble(imgs, y, ("a", "b"), 4, solver=SolverConfig(method="omp", epsilon_rel=1e-9))
    for i in (0, 1):
        outs = ens.block_solve(m, imgs[i])
        assert all(o.rep.label_index == y[i] for o in outs)
        r = ens.classify_bbmap(m, imgs[i])
        assert r.posterior[y[i]] == 1.0


def test_two_block_synthetic_labels():
    P = np.array([[1.0, 0.0], [0.0, 0.0]])
    R = np.array([[0.0, 0.0], [0.0, 1.0]])
    a = np.hstack([P, P])
    b = np.hstack([R, R])
    m = ens.train_block_ensemble([a, b], [0, 1], ("a", "b"), 2, solver=SolverConfig(method="omp", epsilon=0.0))
    outs = ens.block_solve(m, np.hstack([P, R]))
    assert [o.rep.label_index for o in outs] == [0, 1]


def test_zero_test_block_is_excluded_with_warning():
    imgs, y = rand_images(4, seed=3)
    m = ens.train_block_ensemble(imgs, y, ("a", "b"), 4, solver=OMP2)
    t = imgs[0].copy()
    t[:4, :4] = 0.0
    with pytest.warns(RuntimeWarning, match="1 of 4"):
        outs = ens.block_solve(m, t)
    assert not outs[0].ok
    with pytest.warns(RuntimeWarning):
        assert ens.classify_bbmap(m, t).posterior.sum() == pytest.approx(1.0)
    with pytest.raises(SolverError), pytest.warns(RuntimeWarning):
        ens.classify_bbmap(m, np.zeros((8, 8)))


def test_identical_images_in_both_classes_flagged():
    img = np.random.default_rng(4).random((4, 4))
    m = ens.train_block_ensemble([img, img], [0, 1], ("a", "b"), 4, solver=OMP2)
    assert "cross_class_duplicates" in m.flags
    d = ens.classify(m, img, "bbmap")
    assert "cross_class_duplicates" in d.flags
    other = ens.train_block_ensemble([img, img[::-1]], [0, 1], ("a", "b"), 4, solver=OMP2)
    assert not other.flags


@pytest.mark.parametrize("method", ["omp", "bpdn"])
def test_single_block_equals_src(method):
    imgs, y = rand_images(20, (8, 8), seed=5)
    cfg = SolverConfig(method=method, epsilon_rel=0.3)
    m = ens.train_block_ensemble(imgs[:16], y[:16], ("a", "b"), 8, solver=cfg)
    src = build_src(imgs[:16], y[:16], ("a", "b"), cfg, InputTransform(keep_fraction=1))
    assert m.nb == 1
    for im in imgs:
        a = ens.classify_bbmap(m, im)
        b = classify_src(src, im)
        assert a.label_index == b.label_index


def test_bbmap_matches_bruteforce_tally():
    for seed in range(5):
        imgs, y = rand_images(8, (8, 8), seed=10 + seed)
        m = ens.train_block_ensemble(imgs[:6], y[:6], ("a", "b"), 4, solver=OMP2)
        for t in imgs[6:]:
            votes = block_vote_tally(imgs[:6], list(y[:6]), t, 4, 4, n_atoms=2)
            r = ens.classify_bbmap(m, t)
            assert np.array_equal(r.posterior * m.nb, votes)


# ------------------------------------------------------------- fusion

def test_vote_counts():
    r = ens.bbmap_fuse([outcome(0, 0), outcome(1, 0), outcome(2, 0), outcome(3, 1)], 2)
    assert r.posterior[0] == 0.75 and r.label_index == 0 and not r.tie
    r = ens.bbmap_fuse([outcome(j, 1) for j in range(5)], 2)
    assert r.posterior[1] == 1.0
    r = ens.bbmap_fuse([outcome(j, j % 2) for j in range(256)], 2)
    assert r.tie and r.label_index == 0 and r.posterior[0] == 0.5


def test_lls_residual_values():
    assert ens.lls_residual_fuse([outcome(0, 0, (0.1, 1.0))]).value == pytest.approx(np.log(10), abs=1e-12)
    outs = [outcome(j, 0, (0.3, 0.3)) for j in range(3)]
    assert ens.lls_residual_fuse(outs).value == 0.0
    outs = [outcome(0, 0, (0.2, 0.7)), outcome(1, 1, (0.9, 0.4))]
    assert ens.lls_residual_fuse(outs, 1, 0).value == -ens.lls_residual_fuse(outs).value


def test_lls_residual_floor():
    v = ens.lls_residual_fuse([outcome(0, 0, (0.0, 1.0))]).value
    assert v == pytest.approx(-np.log(1e-12))


def test_lls_sparsity_values():
    s = ens.lls_sparsity_fuse([outcome(0, 0, masses=(0.9, 0.1))])
    assert s.value == pytest.approx(np.log(9), abs=1e-12)
    assert ens.lls_sparsity_fuse([outcome(0, 0, masses=(0.5, 0.5))]).value == 0.0
    outs = [outcome(0, 0, masses=(0.9, 0.1)), outcome(1, 0, masses=(0.2, 0.6))]
    assert ens.lls_sparsity_fuse(outs, 1, 0).value == pytest.approx(-ens.lls_sparsity_fuse(outs).value)
    assert ens.lls_sparsity_fuse(outs, literal_sign=True).value == pytest.approx(
        -ens.lls_sparsity_fuse(outs).value)


def test_classify_bbll_rule():
    assert ens.classify_bbll(0.5, 0.0) == 0
    assert ens.classify_bbll(0.25, 0.25) == 0
    assert ens.classify_bbll(-0.1, 0.0) == 1
    assert ens.classify_bbll(ens.LlsScore(1.0, np.array([1.0])), 2.0) == 1


# ------------------------------------------------------------- calibration

def test_tau_separable_midpoint():
    c = ens.calibrate_tau([1.0, 1.0, -1.0, -1.0], [True, True, False, False])
    assert c.tau == 0.0 and "separable" in c.flags


def test_tau_symmetric_near_zero():
    rng = np.random.default_rng(0)
    m = rng.normal(0.5, 1.0, 200)
    scores = np.concatenate([m, -m])
    c = ens.calibrate_tau(scores, np.arange(400) < 200)
    assert abs(c.tau) <= 0.02


@pytest.mark.parametrize("scores", [
    [0.3, 1.0, -0.2, -1.0, 0.1, 0.5],
    [0.25, 0.8, -0.4, -0.7, 0.35, 0.6],
    [2.0, -0.5, 0.9, 0.1, -1.5, 1.2],
])
def test_tau_matches_dense_sweep(scores):
    is_m = np.array([True, True, True, False, False, False])
    c = ens.calibrate_tau(scores, is_m)
    step = c.grid[1] - c.grid[0]
    assert abs(c.tau - tau_dense_oracle(scores, is_m)) <= step


def test_tau_one_class_rejected():
    with pytest.raises(ValidationError):
        ens.calibrate_tau([0.1, 0.2], [True, True])


def test_pds_contract():
    p = ens.fit_pds(0.0, -2.0, 0.05)
    assert p.slope == pytest.approx(np.log(19) / 2, abs=1e-12)
    assert ens.pds(0.0, p) == 0.5
    assert abs(ens.pds(-2.0, p) - 0.05) < 1e-9
    xs = np.linspace(-50, 50, 101)
    v = ens.pds(xs, p)
    assert np.all(np.diff(v) >= 0) and np.all((v >= 0) & (v <= 1))
    q = ens.fit_pds(0.37, -1.3, 0.1)
    assert ens.pds(0.37, q) == 0.5 and abs(ens.pds(-1.3, q) - 0.1) < 1e-9


def test_pds_errors():
    with pytest.raises(ValidationError):
        ens.fit_pds(0.0, 0.5, 0.05)
    with pytest.raises(ValidationError):
        ens.fit_pds(0.0, -1.0, 0.5)


def test_training_scores_never_use_own_column():
    imgs, y = rand_images(6, seed=6)
    m = ens.train_block_ensemble(imgs, y, ("a", "b"), 4, solver=OMP2)
    order = np.argsort(y, kind="stable")
    ordered = [imgs[i] for i in order]
    s = ens.training_scores(m, ordered, "bbll-r")
    # with its own column available, a training image would be coded exactly
    assert np.all(np.isfinite(s)) and np.all(np.abs(s) < 20)
    assert ens.training_scores(m, ordered, "bbll-r", exclude=[0]).size == 5


# ------------------------------------------------------------- persistence

def test_save_load_roundtrip(tmp_path):
    imgs, y = rand_images(6, (8, 8), seed=7)
    m = ens.train_block_ensemble(imgs, y, ("a", "b"), 4, solver=SolverConfig(method="bpdn", epsilon_rel=0.2))
    m = ens.replace(m, tau=0.125, pds=ens.fit_pds(0.125, -1.0, 0.05))
    ens.save_model(tmp_path / "model", m)
    m2 = ens.load_model(tmp_path / "model")
    assert m2.nb == m.nb and m2.tau == m.tau and m2.pds == m.pds and m2.solver == m.solver
    for D1, D2 in zip(m.dictionaries, m2.dictionaries):
        assert np.array_equal(D1.atoms, D2.atoms) and np.array_equal(D1.norms, D2.norms)
    a, b = ens.classify(m, imgs[0]), ens.classify(m2, imgs[0])
    assert a.score == b.score and a.probability == b.probability


def test_matrix_file_layout(tmp_path):
    M = np.arange(6.0).reshape(2, 3)
    ens.write_matrix(tmp_path / "m.bin", M)
    raw = (tmp_path / "m.bin").read_bytes()
    assert raw[:16] == (2).to_bytes(8, "little") + (3).to_bytes(8, "little")
    assert np.frombuffer(raw[16:], "<f8")[4] == 4.0
    (tmp_path / "bad.bin").write_bytes(raw[:-1])
    with pytest.raises(DataError):
        ens.read_matrix(tmp_path / "bad.bin")

import numpy as np
import pytest

from bbsrc import srcclf
from bbsrc.errors import DataError, ValidationError
from bbsrc.sparse import SolverConfig
from bbsrc.srcclf import InputTransform, build_src, classify_src

FEAT = InputTransform(kind="features")


def random_set(n=6, l=12, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, l))
    y = np.array([0, 1] * (n // 2))
    return X, y


def test_build_shapes_and_order():
    X, y = random_set(n=6)
    m = build_src(X, y, ("a", "b"), transform=FEAT)
    assert m.dictionary.atoms.shape == (12, 6)
    assert list(m.dictionary.column_class) == [0, 0, 0, 1, 1, 1]
    assert m.sample_names == ("sample 0", "sample 2", "sample 4", "sample 1", "sample 3", "sample 5")


def test_build_two_samples():
    m = build_src([[1.0, 0.0], [0.0, 1.0]], [0, 1], ("a", "b"), transform=FEAT)
    assert [list(r) for r in m.dictionary.class_ranges] == [[0], [1]]


def test_duplicates_flagged():
    m = build_src([[1.0, 2.0], [1.0, 2.0]], [0, 1], ("a", "b"), transform=FEAT)
    assert "duplicate_columns" in m.flags


def test_build_errors():
    with pytest.raises(ValidationError):
        build_src([[1.0, 2.0], [1.0]], [0, 1], ("a", "b"), transform=FEAT)
    with pytest.raises(DataError, match="sample 1"):
        build_src([[1.0, 2.0], [0.0, 0.0]], [0, 1], ("a", "b"), transform=FEAT)
    with pytest.raises(ValidationError):
        build_src([[1.0, 2.0], [3.0, 1.0]], [0, 0], ("a", "b"), transform=FEAT)


def test_class_residual_cases():
    m = build_src([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], [0, 1], ("a", "b"), transform=FEAT)
    y = np.array([2.0, 0.0, 0.0])
    x = np.array([2.0, 0.0])
    assert srcclf.class_residual(m, x, y, 0) == 0.0
    assert srcclf.class_residual(m, x, y, 1) == pytest.approx(2.0)
    assert srcclf.class_residual(m, np.zeros(2), y, 1) == pytest.approx(2.0)


def test_class_residual_hand_two_atoms():
    # atoms (3,4)/5 and (1,0); y = (1, 2); x = (0.5, 0.25)
    m = build_src([[3.0, 4.0], [1.0, 0.0]], [0, 1], ("a", "b"), transform=FEAT)
    y, x = np.array([1.0, 2.0]), np.array([0.5, 0.25])
    assert abs(srcclf.class_residual(m, x, y, 0) - np.hypot(1 - 0.3, 2 - 0.4)) < 1e-12
    assert abs(srcclf.class_residual(m, x, y, 1) - np.hypot(1 - 0.25, 2.0)) < 1e-12


@pytest.mark.parametrize("method", ["mp", "omp", "bpdn"])
def test_training_sample_classified_as_own_class(method):
    X, y = random_set(n=8, l=20, seed=3)
    m = build_src(X, y, ("a", "b"), SolverConfig(method=method, epsilon_rel=1e-7), FEAT)
    for i in range(8):
        r = classify_src(m, X[i])
        assert r.label_index == y[i]
        assert r.residuals[y[i]] < 1e-5


def test_scale_invariance():
    X, y = random_set(n=8, l=10, seed=4)
    m = build_src(X, y, ("a", "b"), SolverConfig(method="bpdn", epsilon_rel=0.2), FEAT)
    t = np.random.default_rng(9).normal(size=10)
    a, b = classify_src(m, t), classify_src(m, 37.5 * t)
    assert a.label == b.label
    assert np.allclose(a.residuals, b.residuals, atol=1e-9)


def test_class_permutation_relabels():
    X, y = random_set(n=8, l=10, seed=5)
    cfg = SolverConfig(method="omp", epsilon_rel=0.3)
    m1 = build_src(X, y, ("a", "b"), cfg, FEAT)
    m2 = build_src(X, 1 - y, ("b", "a"), cfg, FEAT)
    for seed in range(10):
        t = np.random.default_rng(100 + seed).normal(size=10)
        r1, r2 = classify_src(m1, t), classify_src(m2, t)
        assert r1.label == r2.label
        assert np.allclose(r1.residuals, r2.residuals[::-1], atol=1e-9)


def test_tie_goes_to_first_class():
    m = build_src([[1.0, 0.0], [0.0, 1.0]], [0, 1], ("a", "b"), SolverConfig(method="omp", epsilon=0.0),
                  FEAT)
    r = classify_src(m, [1.0, 1.0])
    assert r.label == "a" and "tie" in r.flags


def test_zero_code_flags_sci():
    m = build_src([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], [0, 1], ("a", "b"),
                  SolverConfig(method="omp", epsilon=0.0), FEAT)
    r = classify_src(m, [0.0, 0.0, 1.0])
    assert "sci_undefined" in r.flags and "tie" in r.flags


def test_downsample_transform():
    imgs = [np.random.default_rng(i).random((8, 8)) for i in range(4)]
    m = build_src(imgs, [0, 1, 0, 1], ("a", "b"), transform=InputTransform(keep_fraction="1/4"))
    assert m.dictionary.l == 16
    assert classify_src(m, imgs[1]).label == "b"


def test_write_predictions(tmp_path):
    m = build_src([[1.0, 0.0], [0.0, 1.0]], [0, 1], ("a", "b"), transform=FEAT)
    r = classify_src(m, [1.0, 0.1])
    srcclf.write_predictions(tmp_path / "p.csv", [("img.pgm", "a", r)])
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "path,true_label,predicted_label,r_class1,r_class2,sci"
    assert lines[1].startswith("img.pgm,a,a,")

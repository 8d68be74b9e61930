"""Sparse representation classification over a whole-ROI dictionary."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import sparse
from .errors import DataError, ValidationError
from .imgio import downsample, parse_fraction
from .sparse import Dictionary, SolverConfig

TIE_RTOL = 1e-12


@dataclass(frozen=True)
class InputTransform:
    """How a raw sample becomes a dictionary-length vector.

    ``kind="downsample"`` block-averages (or decimates) the lexicographic
    image vector; ``kind="features"`` passes feature vectors through.
    """

    kind: str = "downsample"
    keep_fraction: Fraction = Fraction(1)
    mode: str = "average"

    def __post_init__(self):
        if self.kind not in ("downsample", "features"):
            raise ValidationError(f"unknown input transform {self.kind!r}")
        object.__setattr__(self, "keep_fraction", parse_fraction(self.keep_fraction))

    def apply(self, sample) -> np.ndarray:
        if self.kind == "features":
            return np.asarray(sample, dtype=np.float64).reshape(-1)
        return downsample(sample, self.keep_fraction, self.mode)


@dataclass(frozen=True)
class SrcModel:
    dictionary: Dictionary
    solver: SolverConfig
    transform: InputTransform = field(default_factory=InputTransform)
    sample_names: tuple = ()
    flags: frozenset = frozenset()
    gram: np.ndarray | None = field(default=None, repr=False)

    @property
    def classes(self) -> tuple:
        return self.dictionary.classes


@dataclass(frozen=True)
class Representation:
    """Sparse code of one signal plus its per-class evidence."""

    x: np.ndarray
    residuals: np.ndarray   # r_i = ||y - D delta_i(x)||
    masses: np.ndarray      # ||delta_i(x)||_1
    label_index: int
    tie: bool
    solution: sparse.SparseSolution


@dataclass(frozen=True)
class SrcResult:
    label: object
    label_index: int
    residuals: np.ndarray
    sci: float
    x: np.ndarray
    flags: tuple

    @property
    def score(self) -> float:
        """r_2 - r_1: positive values favour the first class (two-class only)."""
        return float(self.residuals[1] - self.residuals[0])


def class_order(labels) -> np.ndarray:
    """Stable permutation putting samples class by class, manifest order within a class."""
    return np.argsort(np.asarray(labels, dtype=int), kind="stable")


def build_src(vectors, labels, classes, solver: SolverConfig | None = None,
              transform: InputTransform | None = None, sample_names=None) -> SrcModel:
    """Stack transformed training vectors class by class and normalize the columns."""
    transform = transform or InputTransform()
    solver = solver or SolverConfig()
    labels = np.asarray(labels, dtype=int)
    classes = tuple(classes)
    cols = [transform.apply(v) for v in vectors]
    if not cols:
        raise ValidationError("no training samples")
    if len({c.size for c in cols}) != 1:
        raise ValidationError("training vectors differ in length")
    if labels.size != len(cols):
        raise ValidationError("one label per training sample required")
    missing = [c for i, c in enumerate(classes) if not np.any(labels == i)]
    if missing:
        raise ValidationError(f"classes without training samples: {missing}")
    names = list(sample_names) if sample_names is not None else [f"sample {i}" for i in range(len(cols))]
    order = class_order(labels)
    raw = np.stack([cols[i] for i in order], axis=1)
    D = sparse.normalize_columns(raw, labels[order], classes, [names[i] for i in order])
    flags = set()
    G = D.gram()
    off = G - np.diag(np.diag(G))
    if np.any(off >= 1.0 - 1e-12):
        flags.add("duplicate_columns")
    return SrcModel(D, solver, transform, tuple(names[i] for i in order), frozenset(flags), G)


def represent(D: Dictionary, y, cfg: SolverConfig, gram=None, columns=None) -> Representation:
    """Solve for the code of unit-normalized ``y`` and collect class evidence.

    ``columns`` restricts the dictionary to a subset of atoms (the others
    get zero coefficients), which is how leave-out folds reuse one model.
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.size != D.l:
        raise ValidationError(f"signal length {y.size} != dictionary rows {D.l}")
    ynorm = float(np.linalg.norm(y))
    if not np.isfinite(ynorm):
        raise DataError("non-finite test signal")
    if ynorm == 0.0:
        raise DataError("all-zero test signal cannot be normalized")
    y = y / ynorm
    cols = np.arange(D.s) if columns is None else np.asarray(columns, dtype=int)
    A = D.atoms[:, cols]
    cc = D.column_class[cols]
    if cfg.method == "bpdn":
        G = D.gram() if gram is None else gram
        G = G[np.ix_(cols, cols)] if columns is not None else G
        sol = sparse.bpdn_gram(G, A.T @ y, 1.0, cfg.eps_for(1.0), cfg, check=False)
    elif cfg.method == "omp":
        sol = sparse.omp(A, y, cfg)
    else:
        sol = sparse.mp(A, y, cfg)
    x = np.zeros(D.s)
    x[cols] = sol.x
    k = D.k
    res = np.empty(k)
    for i in range(k):
        xi = np.where(cc == i, sol.x, 0.0)
        res[i] = np.linalg.norm(y - A @ xi)
    masses = np.bincount(cc, weights=np.abs(sol.x), minlength=k)
    best = int(np.argmin(res))
    tie = bool(np.sum(res <= res[best] * (1 + TIE_RTOL) + 1e-300) > 1)
    return Representation(x, res, masses, best, tie, sol)


def class_residual(model: SrcModel, x, y, i: int) -> float:
    """||y - M delta_i(x)|| on the raw (un-normalized) ``y``."""
    D = model.dictionary
    return float(np.linalg.norm(np.asarray(y, float) - D.atoms @ sparse.delta(x, i, D)))


def classify_vector(model: SrcModel, y, columns=None) -> SrcResult:
    """Classify an already transformed vector."""
    rep = represent(model.dictionary, y, model.solver, model.gram, columns)
    flags = list(rep.solution.flags)
    if rep.tie:
        flags.append("tie")
    total = rep.masses.sum()
    if total > 0:
        sci = sparse.sci(rep.x, model.dictionary)
    else:
        sci = 0.0
        flags.append("sci_undefined")
    return SrcResult(model.classes[rep.label_index], rep.label_index, rep.residuals, sci,
                     rep.x, tuple(flags))


def classify_src(model: SrcModel, sample) -> SrcResult:
    """Minimum class residual; ties go to the lowest class index and are flagged."""
    return classify_vector(model, model.transform.apply(sample))


PREDICTION_HEADER_BASE = ("path", "true_label", "predicted_label")


def write_predictions(path, rows, k: int = 2) -> None:
    """Rows of ``(path, true_label, SrcResult)``; header ``path,true_label,predicted_label,r_class1..,sci``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*PREDICTION_HEADER_BASE, *(f"r_class{i + 1}" for i in range(k)), "sci"])
        for p, true, res in rows:
            w.writerow([str(p), true, res.label, *(repr(float(r)) for r in res.residuals),
                        repr(float(res.sci))])

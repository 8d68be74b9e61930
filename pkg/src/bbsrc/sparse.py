"""Sparse approximation over class-labelled dictionaries.

Three solvers share one result type: matching pursuit (``mp``), orthogonal
matching pursuit (``omp``) and residual-constrained basis pursuit denoising
(``bpdn``). BPDN is solved in its Lagrangian form by coordinate descent, with
a bisection on the penalty until the residual sits on the constraint.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .errors import DataError, SolverError, ValidationError

METHODS = ("mp", "omp", "bpdn")
# 10*s sweeps alone stalls on near-basis-pursuit problems (lambda close to 0)
MIN_CD_SWEEPS = 2000


@dataclass(frozen=True)
class Dictionary:
    """Unit-norm atoms (columns) with one class index per column."""

    atoms: np.ndarray
    column_class: np.ndarray
    classes: tuple
    norms: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("atoms", "column_class", "norms"):
            arr = np.array(getattr(self, name), copy=True)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def l(self) -> int:
        return self.atoms.shape[0]

    @property
    def s(self) -> int:
        return self.atoms.shape[1]

    @property
    def k(self) -> int:
        return len(self.classes)

    @property
    def class_ranges(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.column_class == i) for i in range(self.k)]

    def class_index(self, label) -> int:
        try:
            return self.classes.index(label)
        except ValueError:
            raise ValidationError(f"unknown class {label!r}") from None

    def gram(self) -> np.ndarray:
        return np.ascontiguousarray(self.atoms.T @ self.atoms)


def normalize_columns(raw, column_class=None, classes: Sequence | None = None,
                      sample_names: Sequence | None = None) -> Dictionary:
    """Scale every column of ``raw`` to unit l2 norm.

    A zero column raises, naming the training sample it came from.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2:
        raise ValidationError("dictionary must be a 2-D matrix")
    if not np.all(np.isfinite(raw)):
        raise DataError("dictionary contains non-finite values")
    s = raw.shape[1]
    if column_class is None:
        column_class = np.zeros(s, dtype=int)
    column_class = np.asarray(column_class, dtype=int)
    if column_class.shape != (s,):
        raise ValidationError("column_class must have one entry per column")
    if classes is None:
        classes = tuple(range(int(column_class.max(initial=-1)) + 1))
    norms = np.linalg.norm(raw, axis=0)
    bad = np.flatnonzero(norms == 0.0)
    if bad.size:
        j = int(bad[0])
        who = sample_names[j] if sample_names is not None else f"column {j}"
        raise DataError(f"zero dictionary column from training sample {who}")
    return Dictionary(raw / norms, column_class, tuple(classes), norms)


@dataclass(frozen=True)
class SolverConfig:
    """Solver choice and stopping rules.

    ``epsilon`` is the absolute residual bound; when it is ``None`` the bound
    is ``epsilon_rel * ||y||``. ``max_iterations`` of ``None`` selects the
    per-method default: s for OMP, 10*s for MP, and max(10*s, MIN_CD_SWEEPS)
    coordinate-descent sweeps per penalty value in BPDN.
    """

    method: str = "omp"
    epsilon: float | None = None
    epsilon_rel: float = 0.05
    max_iterations: int | None = None
    tol: float = 1e-8
    lam_floor_rel: float = 1e-10
    max_bisect: int = 200

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"unknown solver method {self.method!r}")
        if self.epsilon is not None and self.epsilon < 0:
            raise ValidationError("epsilon must be >= 0")
        if self.epsilon_rel < 0:
            raise ValidationError("epsilon_rel must be >= 0")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")

    def eps_for(self, ynorm: float) -> float:
        return float(self.epsilon) if self.epsilon is not None else self.epsilon_rel * ynorm


@dataclass(frozen=True)
class SparseSolution:
    x: np.ndarray
    residual_norm: float
    iterations: int
    method: str
    lam: float | None = None
    flags: tuple = ()

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.x)


def _atoms(D) -> np.ndarray:
    return D.atoms if isinstance(D, Dictionary) else np.asarray(D, dtype=np.float64)


def _check_signal(A, y):
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != A.shape[0]:
        raise ValidationError(f"signal length {y.shape[0]} != dictionary rows {A.shape[0]}")
    if not np.all(np.isfinite(y)) or not np.all(np.isfinite(A)):
        raise DataError("non-finite input to sparse solver")
    return y


def mp(D, y, cfg: SolverConfig | None = None) -> SparseSolution:
    """Matching pursuit: one greedy atom per step, coefficients accumulate."""
    cfg = cfg or SolverConfig(method="mp")
    A = _atoms(D)
    y = _check_signal(A, y)
    s = A.shape[1]
    ynorm = float(np.linalg.norm(y))
    eps = cfg.eps_for(ynorm)
    max_it = cfg.max_iterations or 10 * s
    floor = 1e-14 * max(ynorm, 1.0)
    x = np.zeros(s)
    r = y.copy()
    rn = ynorm
    it = 0
    while rn > eps and it < max_it:
        c = A.T @ r
        j = int(np.argmax(np.abs(c)))
        if abs(c[j]) <= floor:
            break
        x[j] += c[j]
        r -= c[j] * A[:, j]
        rn = float(np.linalg.norm(r))
        it += 1
    return SparseSolution(x, rn, it, "mp")


def omp(D, y, cfg: SolverConfig | None = None) -> SparseSolution:
    """Orthogonal matching pursuit with a least-squares refit on the support."""
    cfg = cfg or SolverConfig(method="omp")
    A = _atoms(D)
    y = _check_signal(A, y)
    l, s = A.shape
    ynorm = float(np.linalg.norm(y))
    eps = cfg.eps_for(ynorm)
    max_it = min(cfg.max_iterations or s, s)
    floor = 1e-12 * max(ynorm, 1.0)
    x = np.zeros(s)
    r = y.copy()
    rn = ynorm
    support: list[int] = []
    chosen = np.zeros(s, dtype=bool)
    flags = []
    while rn > eps and len(support) < max_it:
        c = np.abs(A.T @ r)
        c[chosen] = -1.0
        j = int(np.argmax(c))
        if c[j] <= floor:
            break
        support.append(j)
        chosen[j] = True
        sub = A[:, support]
        coef, _, rank, _ = np.linalg.lstsq(sub, y, rcond=None)
        if rank < len(support) and "rank_deficient" not in flags:
            flags.append("rank_deficient")
        x[:] = 0.0
        x[support] = coef
        r = y - sub @ coef
        rn = float(np.linalg.norm(r))
    return SparseSolution(x, rn, len(support), "omp", flags=tuple(flags))


def residual_tolerance(eps: float) -> float:
    return max(1e-4, 1e-3 * eps)


_STATUS_FLAGS = {0: (), 1: ("zero_solution",), 2: ("infeasible",), 3: ("bisection_exhausted",)}


def bpdn_gram(G, b, yy: float, eps: float, cfg: SolverConfig | None = None,
              check=True) -> SparseSolution:
    """BPDN on precomputed ``G = D'D``, ``b = D'y``, ``yy = y'y``.

    The residual reported is the Gram-form value, accurate to roughly
    ``1e-8 * ||y||``.
    """
    cfg = cfg or SolverConfig(method="bpdn")
    if eps < 0:
        raise ValidationError("epsilon must be >= 0")
    G = np.ascontiguousarray(G, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    s = G.shape[0]
    if check and s and np.min(G.diagonal()) <= 0:
        raise DataError("Gram matrix has a non-positive diagonal (zero atom)")
    sweeps = cfg.max_iterations or max(10 * s, MIN_CD_SWEEPS)
    x, lam, res, n_sw, _, status, conv = kernels.bpdn_gram(
        G, b, float(yy), float(eps), residual_tolerance(eps),
        cfg.lam_floor_rel, cfg.tol, sweeps, cfg.max_bisect)
    flags = _STATUS_FLAGS[status]
    if not conv:
        flags = flags + ("cd_not_converged",)
    return SparseSolution(np.asarray(x), float(res), int(n_sw), "bpdn", float(lam), flags)


def bpdn(D, y, eps: float | None = None, cfg: SolverConfig | None = None) -> SparseSolution:
    """Minimize ||x||_1 subject to ||Dx - y||_2 <= eps.

    When the bound is unreachable the minimal-residual solution (penalty at
    its floor) comes back flagged ``infeasible``.
    """
    cfg = cfg or SolverConfig(method="bpdn")
    A = _atoms(D)
    y = _check_signal(A, y)
    if eps is None:
        eps = cfg.eps_for(float(np.linalg.norm(y)))
    sol = bpdn_gram(A.T @ A, A.T @ y, float(y @ y), eps, cfg)
    res = float(np.linalg.norm(A @ sol.x - y))
    return SparseSolution(sol.x, res, sol.iterations, "bpdn", sol.lam, sol.flags)


def solve(D, y, cfg: SolverConfig) -> SparseSolution:
    if cfg.method == "mp":
        return mp(D, y, cfg)
    if cfg.method == "omp":
        return omp(D, y, cfg)
    return bpdn(D, y, None, cfg)


def delta(x, i: int, D: Dictionary) -> np.ndarray:
    """Keep the coefficients on class ``i``'s columns, zero the rest."""
    if not 0 <= i < D.k:
        raise ValidationError(f"unknown class index {i}")
    x = np.asarray(x, dtype=np.float64)
    return np.where(D.column_class == i, x, 0.0)


def class_masses(x, D: Dictionary) -> np.ndarray:
    """Per-class l1 mass ``||delta_i(x)||_1``."""
    return np.bincount(D.column_class, weights=np.abs(x), minlength=D.k)


def sci(x, D: Dictionary) -> float:
    """Sparsity concentration index in [0, 1]."""
    x = np.asarray(x, dtype=np.float64)
    total = float(np.abs(x).sum())
    if total == 0.0:
        raise SolverError("SCI undefined for an all-zero coefficient vector")
    k = D.k
    if k < 2:
        return 1.0
    frac = class_masses(x, D).max() / total
    return float(np.clip((k * frac - 1.0) / (k - 1.0), 0.0, 1.0))

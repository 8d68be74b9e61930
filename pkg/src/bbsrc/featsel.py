"""Feature selection: CFS merit with best-first or genetic search, information gain with a ranker."""
from __future__ import annotations

import heapq
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, ValidationError

SELECTORS = ("cfs-bestfirst", "cfs-genetic", "infogain")
IG_BINS = 10
DUPLICATE_TOL = 1e-12


@dataclass(frozen=True)
class FeatureMatrix:
    """Samples by features, with one class index per row."""

    X: np.ndarray
    names: tuple
    labels: np.ndarray
    classes: tuple

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64, copy=True)
        labels = np.asarray(self.labels, dtype=int)
        if X.ndim != 2 or X.shape[0] != labels.shape[0]:
            raise ValidationError("feature matrix rows and labels differ")
        if len(self.names) != X.shape[1] or len(set(self.names)) != len(self.names):
            raise ValidationError("feature names must be unique and match the columns")
        if not np.all(np.isfinite(X)):
            raise DataError("feature matrix has missing or non-finite values")
        if labels.size and (labels.min() < 0 or labels.max() >= len(self.classes)):
            raise ValidationError("labels outside the class list")
        X.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "classes", tuple(self.classes))

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def subset(self, indices) -> "FeatureMatrix":
        idx = list(indices)
        return FeatureMatrix(self.X[:, idx], [self.names[i] for i in idx], self.labels, self.classes)


# ------------------------------------------------------------------- CFS

def _abs_corr_matrix(X):
    Z = X - X.mean(axis=0)
    sd = np.sqrt((Z * Z).sum(axis=0))
    ok = sd > 1e-12 * np.maximum(1.0, np.abs(X).max(axis=0)) * np.sqrt(X.shape[0])
    Z[:, ok] /= sd[ok]
    Z[:, ~ok] = 0.0
    return np.abs(Z.T @ Z), Z, ok


class CfsEvaluator:
    """Correlation-based subset merit with precomputed correlations.

    Feature-feature correlation is |Pearson|. Feature-class correlation is
    the point-biserial magnitude; with more than two classes it is the
    prior-weighted mean over one-vs-rest indicators. Zero-variance features
    correlate 0 with everything. Perfectly correlated features (|r| = 1)
    count once, so adding an exact duplicate leaves the merit unchanged.
    """

    def __init__(self, data: FeatureMatrix):
        self.rff, Z, ok = _abs_corr_matrix(data.X)
        np.fill_diagonal(self.rff, 1.0)
        k = len(data.classes)
        rcf = np.zeros(data.n_features)
        binaries = range(1) if k == 2 else range(k)
        for c in binaries:
            ind = (data.labels == c).astype(float)
            prior = ind.mean()
            d = ind - prior
            nd = np.linalg.norm(d)
            if nd == 0:
                continue
            w = 1.0 if k == 2 else prior
            rcf += w * np.abs(Z.T @ d) / nd
        rcf[~ok] = 0.0
        self.rcf = rcf
        self.n_features = data.n_features

    def __call__(self, subset) -> float:
        keep: list[int] = []
        for j in sorted(subset):
            if not any(self.rff[j, i] >= 1.0 - DUPLICATE_TOL for i in keep):
                keep.append(j)
        if not keep:
            raise ValidationError("CFS merit needs a non-empty subset")
        idx = np.asarray(keep, dtype=int)
        k = idx.size
        num = self.rcf[idx].sum()
        denom = k + (self.rff[np.ix_(idx, idx)].sum() - k)
        return float(num / np.sqrt(denom))


def cfs_merit(subset, data: FeatureMatrix) -> float:
    return CfsEvaluator(data)(subset)


# ------------------------------------------------------------ best-first

def best_first(n_features: int, evaluator, stall_limit: int = 5) -> list[int]:
    """Forward best-first search over subsets, starting from the empty set.

    The open list is ordered by merit, then by smaller size, then by the
    lexicographically smallest index tuple. The search stops after
    ``stall_limit`` consecutive expansions that do not improve the best
    subset, or when the open list empties.
    """
    if n_features < 1:
        raise ValidationError("no features to select from")
    if stall_limit < 1:
        raise ValidationError("stall_limit must be >= 1")
    best, best_m = (), -np.inf
    open_: list = [(0.0, 0, ())]
    seen = {()}
    stall = 0
    while open_ and stall < stall_limit:
        _, _, node = heapq.heappop(open_)
        improved = False
        members = set(node)
        for j in range(n_features):
            if j in members:
                continue
            child = tuple(sorted(node + (j,)))
            if child in seen:
                continue
            seen.add(child)
            m = evaluator(child)
            heapq.heappush(open_, (-m, len(child), child))
            if m > best_m + 1e-12:
                best, best_m, improved = child, m, True
        stall = 0 if improved else stall + 1
    return list(best)


# ------------------------------------------------------------------ GA

@dataclass(frozen=True)
class GaParams:
    population: int = 50
    generations: int = 20
    crossover: float = 0.6
    mutation: float = 0.033
    seed: int = 0
    # probability that a bit of an initial chromosome is set; None picks
    # min(0.5, 20 / n_features) so wide feature sets start from small subsets
    init_density: float | None = None

    def __post_init__(self):
        if self.population < 2:
            raise ValidationError("GA population must be >= 2")
        if self.generations < 0:
            raise ValidationError("GA generations must be >= 0")
        for name in ("crossover", "mutation"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"GA {name} probability must be in [0, 1]")
        if self.init_density is not None and not 0.0 < self.init_density <= 1.0:
            raise ValidationError("GA init_density must be in (0, 1]")


def genetic_search(n_features: int, evaluator, params: GaParams | None = None,
                   initial=None) -> list[int]:
    """Bitmask GA: size-2 tournaments, single-point crossover, per-bit mutation, elitism 1.

    Returns the best chromosome seen in any generation. When that is empty
    or scores below the best single feature, the single feature is returned
    instead.
    """
    p = params or GaParams()
    if n_features < 1:
        raise ValidationError("no features to select from")
    rng = np.random.default_rng(p.seed)
    if initial is not None:
        pop = np.array(initial, dtype=bool)
        if pop.ndim != 2 or pop.shape[1] != n_features:
            raise ValidationError("initial population must be (population, n_features)")
    else:
        dens = p.init_density or min(0.5, 20.0 / n_features)
        pop = rng.random((p.population, n_features)) < dens
    cache: dict = {}

    def fitness(ch):
        key = ch.tobytes()
        if key not in cache:
            idx = np.flatnonzero(ch)
            cache[key] = evaluator(list(idx)) if idx.size else 0.0
        return cache[key]

    fit = np.array([fitness(c) for c in pop])
    b = int(np.argmax(fit))
    best, best_f = pop[b].copy(), fit[b]
    npop = pop.shape[0]
    for _ in range(p.generations):
        elite = pop[int(np.argmax(fit))].copy()
        children = [elite]
        while len(children) < npop:
            parents = []
            for _ in range(2):
                i, j = rng.integers(npop, size=2)
                parents.append(pop[i] if fit[i] >= fit[j] else pop[j])
            a, c = parents[0].copy(), parents[1].copy()
            if n_features > 1 and rng.random() < p.crossover:
                cut = int(rng.integers(1, n_features))
                a[cut:], c[cut:] = parents[1][cut:], parents[0][cut:]
            for ch in (a, c):
                ch ^= rng.random(n_features) < p.mutation
                if len(children) < npop:
                    children.append(ch)
        pop = np.array(children)
        fit = np.array([fitness(c) for c in pop])
        b = int(np.argmax(fit))
        if fit[b] > best_f:
            best, best_f = pop[b].copy(), fit[b]
    chosen = list(np.flatnonzero(best))
    singles = [evaluator([j]) for j in range(n_features)]
    top = int(np.argmax(singles))
    if not chosen or singles[top] > best_f:
        return [top]
    return [int(j) for j in chosen]


# ------------------------------------------------------ information gain

def _entropy_bits(counts) -> float:
    counts = np.asarray(counts, dtype=float)
    counts = counts[counts > 0]
    if counts.size == 0:
        return 0.0
    p = counts / counts.sum()
    return float(-(p * np.log2(p)).sum())


def equal_frequency_bins(x, bins: int = IG_BINS) -> np.ndarray:
    """Bin index per value; tied values always share a bin."""
    x = np.asarray(x, dtype=np.float64)
    edges = np.unique(np.quantile(x, np.arange(1, bins) / bins))
    return np.searchsorted(edges, x, side="right")


def info_gain(feature, labels, bins: int = IG_BINS) -> float:
    """H(class) - H(class | binned feature), in bits."""
    labels = np.unique(np.asarray(labels), return_inverse=True)[1]
    b = equal_frequency_bins(feature, bins)
    h = _entropy_bits(np.bincount(labels))
    table = np.zeros((b.max() + 1, labels.max() + 1))
    np.add.at(table, (b, labels), 1.0)
    n = labels.size
    cond = sum(row.sum() / n * _entropy_bits(row) for row in table if row.sum() > 0)
    return float(min(max(h - cond, 0.0), h))


def ranker(scores, threshold: float = 0.0) -> list[int]:
    """Indices by descending score (ties by index); scores <= threshold dropped."""
    scores = np.asarray(scores, dtype=np.float64)
    order = sorted(range(scores.size), key=lambda i: (-scores[i], i))
    kept = [i for i in order if scores[i] > threshold]
    if not kept:
        warnings.warn(f"no feature scores above threshold {threshold}", RuntimeWarning,
                      stacklevel=2)
    return kept


# ------------------------------------------------------------- drivers

def select(data: FeatureMatrix, method: str = "cfs-bestfirst", *, stall_limit: int = 5,
           ga: GaParams | None = None, ig_threshold: float = 0.0,
           top: int | None = None) -> list[int]:
    """Run one selector and return chosen column indices in reproducible order.

    CFS searches return ascending indices; the ranker returns rank order.
    """
    if method not in SELECTORS:
        raise ValidationError(f"unknown selector {method!r}; choose from {SELECTORS}")
    if method == "infogain":
        scores = [info_gain(data.X[:, j], data.labels) for j in range(data.n_features)]
        out = ranker(scores, ig_threshold)
        return out[:top] if top else out
    ev = CfsEvaluator(data)
    if method == "cfs-bestfirst":
        return sorted(best_first(data.n_features, ev, stall_limit))
    return sorted(genetic_search(data.n_features, ev, ga))


def write_subset(path, names) -> None:
    Path(path).write_text("".join(f"{n}\n" for n in names), encoding="utf-8")


def read_subset(path) -> list[str]:
    names = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines()]
    names = [n for n in names if n]
    if not names:
        raise DataError(f"{path}: empty feature subset")
    if len(set(names)) != len(names):
        raise DataError(f"{path}: duplicate feature names in subset")
    return names

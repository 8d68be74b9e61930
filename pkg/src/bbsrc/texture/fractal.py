"""Box-counting fractal dimension of multi-Otsu intensity bands."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..imgio import as_array
from .common import FamilyResult

HIST_BINS = 256
N_SETS = 8


@dataclass(frozen=True)
class BoxCount:
    dimension: float
    residual: float
    sizes: np.ndarray
    counts: np.ndarray


def _box_count(mask: np.ndarray, eps: int) -> float:
    # boxes hanging over the far edges count by the fraction of their area
    # inside the image, so a filled non-dyadic rectangle still scales as eps^-2
    h, w = mask.shape
    ph, pw = -h % eps, -w % eps
    if ph or pw:
        mask = np.pad(mask, ((0, ph), (0, pw)))
    hh, ww = mask.shape
    occupied = mask.reshape(hh // eps, eps, ww // eps, eps).any(axis=(1, 3))
    fy = np.minimum(eps, h - eps * np.arange(hh // eps)) / eps
    fx = np.minimum(eps, w - eps * np.arange(ww // eps)) / eps
    return float(fy @ occupied @ fx)


def box_count_dimension(mask) -> BoxCount:
    """Least-squares slope of log N(eps) against -log eps.

    Box sizes follow the dyadic ladder 1, 2, 4, ... up to half the shorter
    side, with the grid anchored at the top-left corner. The slope is
    clipped to [0, 2], the range of a planar set's dimension.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise ValidationError("box counting needs a 2-D binary set")
    if mask.sum() < 2:
        raise ValidationError("box counting needs at least 2 occupied cells")
    limit = min(mask.shape) / 2
    sizes = []
    e = 1
    while e <= limit:
        sizes.append(e)
        e *= 2
    if len(sizes) < 3:
        raise ValidationError(f"only {len(sizes)} box sizes fit a {mask.shape} set; need 3")
    sizes = np.array(sizes)
    counts = np.array([_box_count(mask, int(e)) for e in sizes])
    x = -np.log(sizes.astype(float))
    y = np.log(counts)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return BoxCount(float(np.clip(slope, 0.0, 2.0)), float(np.sqrt(np.mean(resid ** 2))),
                    sizes, counts)


# ------------------------------------------------------------ multi-Otsu

@dataclass(frozen=True)
class MultiOtsu:
    thresholds: np.ndarray   # intensity values separating consecutive bands
    boundaries: np.ndarray   # histogram bin index where each band starts
    masks: list
    flags: frozenset


def _exhaustive(hist, n_thr):
    # maximizes sum_k m_k^2 / w_k, which differs from the between-class
    # variance only by the constant total mean squared
    nb = hist.size
    p = hist / hist.sum()
    P = np.concatenate([[0.0], np.cumsum(p)])
    S = np.concatenate([[0.0], np.cumsum(p * np.arange(nb))])

    def term(lo, hi):
        w = P[hi] - P[lo]
        m = S[hi] - S[lo]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(w > 0, m * m / np.where(w > 0, w, 1.0), 0.0)

    t = np.arange(1, nb)
    if n_thr == 1:
        score = term(0, t) + term(t, nb)
        return [int(t[np.argmax(score)])]
    if n_thr == 2:
        a, b = np.meshgrid(t, t, indexing="ij")
        score = term(0, a) + term(a, b) + term(b, nb)
        score = np.where(a < b, score, -np.inf)
        i, j = np.unravel_index(np.argmax(score), score.shape)
        return [int(t[i]), int(t[j])]
    best, best_cuts = -np.inf, None
    b, c = np.meshgrid(t, t, indexing="ij")
    tail = term(b, c) + term(c, nb)
    valid_bc = b < c
    for a in t[:-2]:
        score = term(0, a) + term(a, b) + tail
        score = np.where(valid_bc & (b > a), score, -np.inf)
        k = int(np.argmax(score))
        if score.flat[k] > best + 1e-15:
            best = score.flat[k]
            i, j = np.unravel_index(k, score.shape)
            best_cuts = [int(a), int(t[i]), int(t[j])]
    return best_cuts


def _lloyd(hist, n_thr, max_iter=200):
    nb = hist.size
    centers = np.arange(nb) + 0.5
    cdf = np.cumsum(hist) / hist.sum()
    cuts = np.searchsorted(cdf, np.arange(1, n_thr + 1) / (n_thr + 1), side="right") + 1
    cuts = np.clip(np.maximum.accumulate(cuts + np.arange(n_thr)) - np.arange(n_thr), 1, nb - 1)
    cuts = np.unique(cuts)
    for _ in range(max_iter):
        edges = np.concatenate([[0], cuts, [nb]])
        means = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            w = hist[lo:hi].sum()
            means.append((hist[lo:hi] * centers[lo:hi]).sum() / w if w > 0 else 0.5 * (lo + hi))
        mids = 0.5 * (np.array(means[:-1]) + np.array(means[1:]))
        new = np.clip(np.searchsorted(centers, mids, side="right"), 1, nb - 1)
        new = np.unique(new)
        if np.array_equal(new, cuts):
            break
        cuts = new
    return [int(c) for c in cuts]


def multi_otsu(img, sets: int = N_SETS) -> MultiOtsu:
    """Split intensities into ``sets`` bands maximizing between-class variance.

    Up to three thresholds are found by exhaustive search over a 256-bin
    histogram of [0, 1]; more thresholds use Lloyd iterations (1-D k-means on
    the histogram). Images with fewer occupied bins than ``sets`` yield one
    band per occupied bin and the ``fewer_sets`` flag; a constant image
    yields a single band and the ``constant`` flag.
    """
    if sets < 1:
        raise ValidationError("sets must be >= 1")
    arr = as_array(img)
    bins = np.minimum((arr * HIST_BINS).astype(np.intp), HIST_BINS - 1)
    hist = np.bincount(bins.ravel(), minlength=HIST_BINS).astype(float)
    occupied = np.flatnonzero(hist)
    flags = set()
    if occupied.size == 1:
        flags.add("constant")
    if occupied.size <= sets:
        if occupied.size < sets:
            flags.add("fewer_sets")
        cuts = [int(b) for b in occupied[1:]]
    elif sets - 1 <= 3:
        cuts = _exhaustive(hist, sets - 1)
    else:
        cuts = _lloyd(hist, sets - 1)
        if len(cuts) < sets - 1:
            flags.add("fewer_sets")
    cuts = np.array(cuts, dtype=np.intp)
    band = np.searchsorted(cuts, bins, side="right")
    masks = [band == j for j in range(cuts.size + 1)]
    return MultiOtsu(cuts / HIST_BINS, cuts, masks, frozenset(flags))


def fractal_features(img, sets: int = N_SETS) -> FamilyResult:
    """Dimension, area fraction and mean intensity for each Otsu band."""
    arr = as_array(img)
    mo = multi_otsu(arr, sets)
    flags = set(mo.flags)
    constant = "constant" in flags
    names, values = [], []
    for j in range(sets):
        mask = mo.masks[j] if j < len(mo.masks) and not constant else None
        dim = area = mean = 0.0
        if mask is None or not mask.any():
            flags.add(f"set{j}_empty")
        else:
            area = float(mask.mean())
            mean = float(arr[mask].mean())
            try:
                dim = box_count_dimension(mask).dimension
            except ValidationError:
                flags.add(f"set{j}_dimension_undefined")
        names += [f"fractal_set{j}_dimension", f"fractal_set{j}_area", f"fractal_set{j}_mean"]
        values += [dim, area, mean]
    return FamilyResult(names, np.array(values), flags)

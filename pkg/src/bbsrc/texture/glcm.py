"""Gray-level co-occurrence matrices and their Haralick-style statistics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..imgio import as_array
from .common import FamilyResult

# (row step, col step) at distance 1
OFFSETS = {0: (0, 1), 45: (-1, 1), 90: (-1, 0), 135: (-1, -1)}


@dataclass(frozen=True)
class GlcmConfig:
    levels: int = 8
    angles: tuple = (0, 45, 90, 135)

    def __post_init__(self):
        if self.levels < 2:
            raise ValidationError("GLCM needs at least 2 gray levels")
        bad = [a for a in self.angles if a not in OFFSETS]
        if bad or not self.angles:
            raise ValidationError(f"GLCM angles must be drawn from {sorted(OFFSETS)}")


def quantize(arr, levels: int, value_range=(0.0, 1.0)) -> np.ndarray:
    """Map values to ``levels`` equal-width bins over ``value_range``.

    ``value_range=None`` uses the array's own min/max; a constant array maps
    to level 0.
    """
    a = np.asarray(arr, dtype=np.float64)
    lo, hi = (a.min(), a.max()) if value_range is None else value_range
    if hi <= lo:
        return np.zeros(a.shape, dtype=np.intp)
    q = np.floor((a - lo) / (hi - lo) * levels).astype(np.intp)
    return np.clip(q, 0, levels - 1)


def cooccurrence(q, levels: int, angle: int = 0) -> np.ndarray:
    """Symmetric, normalized co-occurrence matrix of a quantized image."""
    dr, dc = OFFSETS[angle]
    h, w = q.shape
    r0, r1 = max(0, -dr), h - max(0, dr)
    c0, c1 = max(0, -dc), w - max(0, dc)
    a = q[r0:r1, c0:c1].ravel()
    b = q[r0 + dr:r1 + dr, c0 + dc:c1 + dc].ravel()
    counts = np.bincount(a * levels + b, minlength=levels * levels).reshape(levels, levels)
    counts = counts + counts.T
    total = counts.sum()
    if total == 0:
        raise ValidationError(f"image too small for a {angle} degree offset")
    return counts / total


def glcm(img, cfg: GlcmConfig | None = None, value_range=(0.0, 1.0)) -> dict:
    cfg = cfg or GlcmConfig()
    q = quantize(as_array(img), cfg.levels, value_range)
    return {a: cooccurrence(q, cfg.levels, a) for a in cfg.angles}


def glcm_stats(P) -> tuple[dict, bool]:
    """Contrast, correlation, energy and homogeneity of a normalized GLCM.

    Returns ``(stats, degenerate)``; correlation is 0 and ``degenerate`` True
    when either marginal has zero variance.
    """
    P = np.asarray(P, dtype=np.float64)
    n = P.shape[0]
    i, j = np.indices((n, n))
    contrast = float(((i - j) ** 2 * P).sum())
    energy = float((P * P).sum())
    homogeneity = float((P / (1.0 + np.abs(i - j))).sum())
    mu_i = (i * P).sum()
    mu_j = (j * P).sum()
    sd_i = np.sqrt(((i - mu_i) ** 2 * P).sum())
    sd_j = np.sqrt(((j - mu_j) ** 2 * P).sum())
    degenerate = sd_i < 1e-12 or sd_j < 1e-12
    corr = 0.0 if degenerate else float(((i - mu_i) * (j - mu_j) * P).sum() / (sd_i * sd_j))
    return {"contrast": contrast, "correlation": corr, "energy": energy,
            "homogeneity": homogeneity}, bool(degenerate)


def glcm_features(img, cfg: GlcmConfig | None = None) -> FamilyResult:
    cfg = cfg or GlcmConfig()
    names, values, flags = [], [], set()
    for angle, P in glcm(img, cfg).items():
        st, degenerate = glcm_stats(P)
        if degenerate:
            flags.add(f"glcm_{angle}_correlation_undefined")
        for k in ("contrast", "correlation", "energy", "homogeneity"):
            names.append(f"glcm_{angle}_{k}")
            values.append(st[k])
    return FamilyResult(names, np.array(values), flags)

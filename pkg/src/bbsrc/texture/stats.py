"""Distribution signatures of filter responses."""
from __future__ import annotations

import numpy as np

ENTROPY_BINS = 64
STAT_KEYS = ("energy", "variance", "entropy", "skewness", "kurtosis")


def histogram_entropy(values, bins: int = ENTROPY_BINS) -> float:
    """Shannon entropy (nats) of an equal-width histogram over the value range."""
    v = np.asarray(values, dtype=np.float64).ravel()
    lo, hi = v.min(), v.max()
    if hi <= lo:
        return 0.0
    counts, _ = np.histogram(v, bins=bins, range=(lo, hi))
    p = counts[counts > 0] / v.size
    return float(-(p * np.log(p)).sum())


def subband_stats(values, bins: int = ENTROPY_BINS) -> tuple[dict, bool]:
    """Energy, variance, entropy, skewness and kurtosis of a response.

    Returns ``(stats, degenerate)``. A zero-variance input has no defined
    standardized moments; skewness and kurtosis are then reported as 0 and
    ``degenerate`` is True.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("subband_stats needs at least one value")
    mu = v.mean()
    d = v - mu
    m2 = float(np.mean(d * d))
    out = {"energy": float(np.dot(v, v)), "variance": m2,
           "entropy": histogram_entropy(v, bins)}
    degenerate = m2 <= 1e-30 * max(1.0, mu * mu)
    if degenerate:
        out["variance"] = 0.0
        out["skewness"] = 0.0
        out["kurtosis"] = 0.0
    else:
        out["skewness"] = float(np.mean(d ** 3) / m2 ** 1.5)
        out["kurtosis"] = float(np.mean(d ** 4) / m2 ** 2)
    return out, bool(degenerate)

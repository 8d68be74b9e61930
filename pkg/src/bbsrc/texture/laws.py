"""Laws texture energy masks."""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..errors import ValidationError
from ..imgio import as_array
from .common import FamilyResult
from .stats import histogram_entropy, subband_stats

VECTORS = {
    "L5": np.array([1.0, 4.0, 6.0, 4.0, 1.0]),
    "E5": np.array([-1.0, -2.0, 0.0, 2.0, 1.0]),
    "S5": np.array([-1.0, 0.0, 2.0, 0.0, -1.0]),
    "W5": np.array([-1.0, 2.0, 0.0, -2.0, 1.0]),
    "R5": np.array([1.0, -4.0, 6.0, -4.0, 1.0]),
}
# mask "AB" applies A along x (columns) and B along y (rows)
MASKS = tuple(a + b for a in VECTORS for b in VECTORS if a + b != "L5L5")
LAWS_STATS = ("mean", "variance", "energy", "skewness", "kurtosis", "entropy")
LEVEL_FLOOR = 1e-6


def _separable(a, vx, vy):
    # ndimage "reflect" is half-sample symmetric, matching np.pad "symmetric"
    out = ndimage.correlate1d(a, vx, axis=1, mode="reflect")
    return ndimage.correlate1d(out, vy, axis=0, mode="reflect")


def laws_maps(img) -> dict:
    """The 24 filtered maps of the level-normalized image, keyed by mask name.

    The image is divided by its local intensity level (the L5L5 response
    scaled to unit gain, floored at ``LEVEL_FLOOR``) before filtering.
    """
    a = as_array(img)
    if min(a.shape) < 5:
        raise ValidationError(f"Laws masks need at least 5x5, got {a.shape}")
    l5 = VECTORS["L5"]
    level = _separable(a, l5, l5) / 256.0
    norm = a / np.maximum(level, LEVEL_FLOOR)
    return {m: _separable(norm, VECTORS[m[:2]], VECTORS[m[2:]]) for m in MASKS}


def laws_features(img) -> FamilyResult:
    names: list = []
    values: list = []
    flags: set = set()
    for m, resp in laws_maps(img).items():
        st, degenerate = subband_stats(resp)
        if degenerate:
            flags.add(f"laws_{m}_degenerate")
        row = {"mean": float(resp.mean()), "variance": st["variance"], "energy": st["energy"],
               "skewness": st["skewness"], "kurtosis": st["kurtosis"],
               "entropy": histogram_entropy(resp)}
        names += [f"laws_{m}_{k}" for k in LAWS_STATS]
        values += [row[k] for k in LAWS_STATS]
    return FamilyResult(names, np.array(values), flags)

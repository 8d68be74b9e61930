"""Histogram of gradient magnitudes."""
from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from ..imgio import as_array
from .common import FamilyResult, is_constant

EDGE_BINS = 16


def gradient_magnitude(img) -> np.ndarray:
    """Central-difference gradient magnitude on interior pixels."""
    a = as_array(img)
    if min(a.shape) < 3:
        raise ValidationError(f"gradient needs at least 3x3, got {a.shape}")
    gx = 0.5 * (a[1:-1, 2:] - a[1:-1, :-2])
    gy = 0.5 * (a[2:, 1:-1] - a[:-2, 1:-1])
    return np.hypot(gx, gy)


def edge_histogram(img, bins: int = EDGE_BINS) -> np.ndarray:
    """``bins``-bin histogram of magnitudes over [0, max], normalized to sum 1."""
    if bins < 2:
        raise ValidationError("edge histogram needs at least 2 bins")
    mag = gradient_magnitude(img)
    top = float(mag.max())
    counts = np.zeros(bins)
    if top == 0.0:
        counts[0] = mag.size
    else:
        counts, _ = np.histogram(mag, bins=bins, range=(0.0, top))
    return counts / mag.size


def edge_features(img, bins: int = EDGE_BINS) -> FamilyResult:
    names = [f"edge_{i:02d}" for i in range(bins)]
    flags = {"edge_constant_image"} if is_constant(as_array(img)) else set()
    return FamilyResult(names, edge_histogram(img, bins), flags)

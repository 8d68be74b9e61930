"""Local binary pattern histogram over the 8-neighbourhood."""
from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from ..imgio import as_array
from .common import FamilyResult, is_constant

# clockwise from the top-left neighbour; the first bit is the most significant
NEIGHBOURS = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))
CONVENTIONS = ("inverted", "standard")


def lbp_codes(img, convention: str = "inverted") -> np.ndarray:
    """Codes for interior pixels.

    ``inverted``: a bit is 0 when the centre is >= the neighbour, 1 otherwise.
    ``standard``: a bit is 1 when the neighbour is >= the centre.
    """
    if convention not in CONVENTIONS:
        raise ValidationError(f"unknown LBP convention {convention!r}")
    a = as_array(img)
    h, w = a.shape
    if h < 3 or w < 3:
        raise ValidationError(f"LBP needs an image of at least 3x3, got {a.shape}")
    c = a[1:-1, 1:-1]
    codes = np.zeros(c.shape, dtype=np.intp)
    for dr, dc in NEIGHBOURS:
        nb = a[1 + dr:h - 1 + dr, 1 + dc:w - 1 + dc]
        bit = nb > c if convention == "inverted" else nb >= c
        codes = (codes << 1) | bit
    return codes


def lbp_histogram(img, convention: str = "inverted") -> np.ndarray:
    codes = lbp_codes(img, convention)
    return np.bincount(codes.ravel(), minlength=256) / codes.size


def lbp_features(img, convention: str = "inverted") -> FamilyResult:
    flags = {"lbp_constant_image"} if is_constant(as_array(img)) else set()
    return FamilyResult([f"lbp_{i:03d}" for i in range(256)], lbp_histogram(img, convention), flags)

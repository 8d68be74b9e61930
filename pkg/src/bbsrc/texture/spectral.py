"""Low-frequency DFT magnitudes and DCT coefficients."""
from __future__ import annotations

import numpy as np
from scipy import fft

from ..errors import ValidationError
from ..imgio import as_array
from .common import FamilyResult, is_constant

BLOCK = 8


def _check(a, block):
    if a.shape[0] < block or a.shape[1] < block:
        raise ValidationError(f"spectral features need at least {block}x{block}, got {a.shape}")


def dft2(img) -> np.ndarray:
    """2-D DFT scaled by 1/(MN), so bin (0, 0) is the mean intensity."""
    a = as_array(img)
    return fft.fft2(a) / a.size


def dft_features(img, block: int = BLOCK) -> FamilyResult:
    a = as_array(img)
    _check(a, block)
    mag = np.abs(dft2(a)[:block, :block])
    names = [f"dft_{k}_{l}" for k in range(block) for l in range(block)]
    return FamilyResult(names, mag.ravel(), {"dft_constant_image"} if is_constant(a) else set())


def dct_features(img, block: int = BLOCK) -> FamilyResult:
    """Orthonormal DCT-II coefficients of the lowest ``block`` x ``block`` frequencies."""
    a = as_array(img)
    _check(a, block)
    c = fft.dctn(a, type=2, norm="ortho")[:block, :block]
    names = [f"dct_{k}_{l}" for k in range(block) for l in range(block)]
    return FamilyResult(names, c.ravel(), {"dct_constant_image"} if is_constant(a) else set())

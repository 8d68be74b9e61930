"""Undecimated (a-trous) Haar wavelet frames."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..imgio import as_array
from .common import FamilyResult
from .glcm import cooccurrence, glcm_stats, quantize
from .stats import STAT_KEYS, subband_stats

DETAIL_BANDS = ("HG", "GH", "GG")
CONTRAST_LEVELS = 8


@dataclass(frozen=True)
class WaveletConfig:
    maxlevel: int = 3
    boundary: str = "symmetric"   # or "periodic"

    def __post_init__(self):
        if self.maxlevel < 1:
            raise ValidationError("maxlevel must be >= 1")
        if self.boundary not in ("symmetric", "periodic"):
            raise ValidationError(f"unknown boundary mode {self.boundary!r}")


def _haar_pair(a, axis: int, step: int, boundary: str):
    """Low and high outputs of h=(1/2, 1/2), g=(1/2, -1/2) with taps ``step`` apart."""
    if boundary == "periodic":
        shifted = np.roll(a, -step, axis=axis)
    else:
        pad = [(0, 0), (0, 0)]
        pad[axis] = (0, step)
        padded = np.pad(a, pad, mode="symmetric")
        shifted = padded[step:, :] if axis == 0 else padded[:, step:]
    return 0.5 * (a + shifted), 0.5 * (a - shifted)


def wavelet_frames(img, cfg: WaveletConfig | None = None) -> tuple[list[dict], np.ndarray]:
    """Decompose into per-level subbands plus the final low-pass image.

    Band names give the x filter first: ``GH`` is high-pass along x and
    low-pass along y. Level ``L`` spaces the filter taps ``2**(L-1)`` apart
    and filters the previous level's ``HH`` band. Every band keeps the input
    size.
    """
    cfg = cfg or WaveletConfig()
    a = as_array(img)
    side = 2 ** cfg.maxlevel
    if min(a.shape) <= side:
        raise ValidationError(
            f"maxlevel {cfg.maxlevel} needs an image larger than {side} px, got {a.shape}")
    levels = []
    for lev in range(1, cfg.maxlevel + 1):
        step = 2 ** (lev - 1)
        lx, hx = _haar_pair(a, 1, step, cfg.boundary)
        bands = {}
        for xname, part in (("H", lx), ("G", hx)):
            ly, hy = _haar_pair(part, 0, step, cfg.boundary)
            bands[xname + "H"] = ly
            bands[xname + "G"] = hy
        levels.append(bands)
        a = bands["HH"]
    return levels, a


def _band_features(prefix, band, names, values, flags):
    st, degenerate = subband_stats(band)
    if degenerate:
        flags.add(f"{prefix}_degenerate")
    q = quantize(band, CONTRAST_LEVELS, None)
    contrast = glcm_stats(cooccurrence(q, CONTRAST_LEVELS, 0))[0]["contrast"]
    names += [f"{prefix}_{k}" for k in STAT_KEYS] + [f"{prefix}_contrast"]
    values += [st[k] for k in STAT_KEYS] + [contrast]


def wavelet_features(img, cfg: WaveletConfig | None = None) -> FamilyResult:
    """Six signatures for each detail band at every level and for the final low-pass."""
    cfg = cfg or WaveletConfig()
    levels, low = wavelet_frames(img, cfg)
    names: list = []
    values: list = []
    flags: set = set()
    for lev, bands in enumerate(levels, start=1):
        for b in DETAIL_BANDS:
            _band_features(f"wavelet_l{lev}_{b}", bands[b], names, values, flags)
    _band_features(f"wavelet_l{cfg.maxlevel}_lowpass", low, names, values, flags)
    return FamilyResult(names, np.array(values), flags)

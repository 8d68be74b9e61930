"""Gabor filter bank with zero-mean (DC-compensated) kernels."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from ..errors import ValidationError
from ..imgio import as_array
from .common import FamilyResult, reflect_pad
from .stats import STAT_KEYS, subband_stats


@dataclass(frozen=True)
class GaborConfig:
    """Bank geometry.

    Scale ``s`` uses wavelength ``base_wavelength * wavelength_step**s`` and
    envelope ``sigma = sigma_ratio * wavelength``; orientation ``o`` is
    ``o * pi / orientations``.
    """

    scales: int = 4
    orientations: int = 6
    base_wavelength: float = 4.0
    wavelength_step: float = math.sqrt(2.0)
    sigma_ratio: float = 0.56
    gamma: float = 0.5
    psi: float = 0.0
    extent: float = 3.0   # kernel half-width in envelope sigmas

    def __post_init__(self):
        if self.scales < 1 or self.orientations < 1:
            raise ValidationError("Gabor bank needs at least one scale and one orientation")
        if self.base_wavelength <= 0 or self.wavelength_step <= 0:
            raise ValidationError("Gabor wavelengths must be positive")
        if self.sigma_ratio <= 0 or self.gamma <= 0:
            raise ValidationError("Gabor sigma and gamma must be positive")

    def wavelength(self, s: int) -> float:
        return self.base_wavelength * self.wavelength_step ** s

    def theta(self, o: int) -> float:
        return o * math.pi / self.orientations


def gabor_kernel(wavelength: float, theta: float, sigma: float, gamma: float,
                 psi: float = 0.0, extent: float = 3.0) -> np.ndarray:
    """Complex Gabor kernel with its DC component removed.

    The envelope-weighted mean is subtracted so the kernel sums to zero and
    flat regions give no response.
    """
    half = int(math.ceil(extent * sigma / min(gamma, 1.0)))
    y, x = np.mgrid[-half:half + 1, -half:half + 1].astype(float)
    xr = x * math.cos(theta) + y * math.sin(theta)
    yr = -x * math.sin(theta) + y * math.cos(theta)
    env = np.exp(-(xr ** 2 + (gamma * yr) ** 2) / (2.0 * sigma ** 2))
    k = env * np.exp(1j * (2.0 * math.pi * xr / wavelength + psi))
    return k - env * (k.sum() / env.sum())


def gabor_bank(img, cfg: GaborConfig | None = None) -> list[tuple[int, int, np.ndarray]]:
    """Response magnitude maps as ``(scale, orientation, map)`` triples."""
    cfg = cfg or GaborConfig()
    a = as_array(img)
    out = []
    for s in range(cfg.scales):
        lam = cfg.wavelength(s)
        sigma = cfg.sigma_ratio * lam
        for o in range(cfg.orientations):
            k = gabor_kernel(lam, cfg.theta(o), sigma, cfg.gamma, cfg.psi, cfg.extent)
            half = k.shape[0] // 2
            if k.shape[0] > min(a.shape):
                raise ValidationError(
                    f"Gabor kernel {k.shape[0]} px (scale {s}) exceeds image {a.shape}")
            padded = reflect_pad(a, half, half)
            mag = np.abs(fftconvolve(padded, k, mode="valid"))
            # FFT roundoff leaves ~1e-15 residue where the exact response is 0
            mag[mag <= 1e-12 * np.abs(k).sum() * max(np.abs(a).max(), 1e-300)] = 0.0
            out.append((s, o, mag))
    return out


def gabor_features(img, cfg: GaborConfig | None = None) -> FamilyResult:
    names: list = []
    values: list = []
    flags: set = set()
    for s, o, mag in gabor_bank(img, cfg):
        prefix = f"gabor_s{s}_o{o}"
        st, degenerate = subband_stats(mag)
        if degenerate:
            flags.add(f"{prefix}_degenerate")
        names += [f"{prefix}_{k}" for k in STAT_KEYS]
        values += [st[k] for k in STAT_KEYS]
    return FamilyResult(names, np.array(values), flags)

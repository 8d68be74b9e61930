"""Synthetic two-class texture sets for acceptance runs."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ValidationError
from .imgio import DatasetManifest, GrayImage, manifest_from_entries, save_pgm, write_manifest

CLASS_NAMES = ("grating", "noise")


@dataclass(frozen=True)
class SynthConfig:
    """Class A: sinusoidal grating varying mostly along x, plus white noise.
    Class B: Gaussian-smoothed isotropic noise. Both are rescaled to the
    same mean and standard deviation."""

    per_class: int = 20
    size: int = 128
    wavelength: tuple = (4.0, 8.0)
    max_tilt_deg: float = 10.0
    grating_noise: float = 0.5     # white-noise std relative to the grating amplitude
    smoothing: float = 1.5         # Gaussian sigma (px) of class B
    mean: float = 0.5
    std: float = 0.15
    seed: int = 0

    def __post_init__(self):
        if self.per_class < 1 or self.size < 4:
            raise ValidationError("need at least one sample per class and size >= 4")
        if not 0 < self.wavelength[0] <= self.wavelength[1]:
            raise ValidationError("wavelength range must be positive and ordered")


def _standardize(a, mean, std):
    a = (a - a.mean()) / a.std()
    return np.clip(mean + std * a, 0.0, 1.0)


def grating(rng, cfg: SynthConfig) -> np.ndarray:
    y, x = np.mgrid[:cfg.size, :cfg.size].astype(float)
    lam = rng.uniform(*cfg.wavelength)
    th = np.deg2rad(rng.uniform(-cfg.max_tilt_deg, cfg.max_tilt_deg))
    phase = rng.uniform(0, 2 * np.pi)
    g = np.sin(2 * np.pi * (x * np.cos(th) + y * np.sin(th)) / lam + phase)
    g += cfg.grating_noise * rng.standard_normal(g.shape)
    return _standardize(g, cfg.mean, cfg.std)


def smooth_noise(rng, cfg: SynthConfig) -> np.ndarray:
    n = ndimage.gaussian_filter(rng.standard_normal((cfg.size, cfg.size)), cfg.smoothing,
                                mode="wrap")
    return _standardize(n, cfg.mean, cfg.std)


def generate(cfg: SynthConfig | None = None) -> tuple[list[GrayImage], np.ndarray]:
    """Images and class indices, alternating A, B, A, B, ..."""
    cfg = cfg or SynthConfig()
    rng = np.random.default_rng(cfg.seed)
    images, labels = [], []
    for _ in range(cfg.per_class):
        images.append(GrayImage(grating(rng, cfg)))
        labels.append(0)
        images.append(GrayImage(smooth_noise(rng, cfg)))
        labels.append(1)
    return images, np.array(labels)


def write_dataset(directory, cfg: SynthConfig | None = None) -> DatasetManifest:
    """Write 16-bit PGMs plus ``manifest.csv`` into ``directory``."""
    cfg = cfg or SynthConfig()
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    images, labels = generate(cfg)
    entries = []
    for i, (img, lab) in enumerate(zip(images, labels)):
        p = d / f"{CLASS_NAMES[lab]}_{i:03d}.pgm"
        save_pgm(p, img)
        entries.append((p, CLASS_NAMES[lab]))
    man = manifest_from_entries(entries, d)
    write_manifest(d / "manifest.csv", man)
    return man

"""Assemble the feature families into one named vector, and feature tables on disk."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import BbsrcError, DataError, ValidationError
from ..imgio import as_array
from .edges import EDGE_BINS, edge_features
from .fractal import N_SETS, fractal_features
from .gabor import GaborConfig, gabor_features
from .glcm import GlcmConfig, glcm_features
from .laws import laws_features
from .lbp import lbp_features
from .spectral import BLOCK, dct_features, dft_features
from .wavelet import WaveletConfig, wavelet_features

FAMILIES = ("fractal", "wavelet", "gabor", "lbp", "dft", "dct", "laws", "edge", "glcm")


@dataclass(frozen=True)
class ExtractConfig:
    families: tuple = FAMILIES
    otsu_sets: int = N_SETS
    wavelet: WaveletConfig = field(default_factory=WaveletConfig)
    gabor: GaborConfig = field(default_factory=GaborConfig)
    glcm: GlcmConfig = field(default_factory=GlcmConfig)
    lbp_convention: str = "inverted"
    spectral_block: int = BLOCK
    edge_bins: int = EDGE_BINS

    def __post_init__(self):
        unknown = [f for f in self.families if f not in FAMILIES]
        if unknown:
            raise ValidationError(f"unknown feature families {unknown}; choose from {FAMILIES}")
        if not self.families:
            raise ValidationError("no feature family enabled")
        # keep the canonical order regardless of how the families were listed
        object.__setattr__(self, "families", tuple(f for f in FAMILIES if f in self.families))


@dataclass(frozen=True)
class FeatureVector:
    names: tuple
    values: np.ndarray
    flags: frozenset = frozenset()

    def __post_init__(self):
        names = tuple(self.names)
        vals = np.array(self.values, dtype=np.float64, copy=True).ravel()
        if len(names) != vals.size:
            raise ValidationError("feature names and values differ in length")
        if len(set(names)) != len(names):
            raise ValidationError("feature names are not unique")
        if not np.all(np.isfinite(vals)):
            bad = [n for n, v in zip(names, vals) if not np.isfinite(v)]
            raise DataError(f"non-finite feature values: {bad[:5]}")
        vals.flags.writeable = False
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "flags", frozenset(self.flags))

    def __len__(self) -> int:
        return len(self.names)


def _family(name, a, cfg: ExtractConfig):
    if name == "fractal":
        return fractal_features(a, cfg.otsu_sets)
    if name == "wavelet":
        return wavelet_features(a, cfg.wavelet)
    if name == "gabor":
        return gabor_features(a, cfg.gabor)
    if name == "lbp":
        return lbp_features(a, cfg.lbp_convention)
    if name == "dft":
        return dft_features(a, cfg.spectral_block)
    if name == "dct":
        return dct_features(a, cfg.spectral_block)
    if name == "laws":
        return laws_features(a)
    if name == "edge":
        return edge_features(a, cfg.edge_bins)
    return glcm_features(a, cfg.glcm)


def extract_all(img, cfg: ExtractConfig | None = None) -> FeatureVector:
    """Concatenate every enabled family in canonical order.

    Sub-extractor failures are re-raised with the family name prepended.
    Flags are prefixed with their family.
    """
    cfg = cfg or ExtractConfig()
    a = as_array(img)
    names: list = []
    parts: list = []
    flags: set = set()
    for fam in cfg.families:
        try:
            res = _family(fam, a, cfg)
        except BbsrcError as exc:
            raise type(exc)(f"{fam} features: {exc}") from exc
        names += res.names
        parts.append(res.values)
        flags |= {f if f.startswith(fam) else f"{fam}:{f}" for f in res.flags}
    return FeatureVector(names, np.concatenate(parts), flags)


def feature_names(cfg: ExtractConfig | None = None, shape=(128, 128)) -> tuple:
    """The registry of names ``extract_all`` emits under ``cfg``.

    Names do not depend on image content; a noise image of ``shape`` is
    run through the extractors to list them.
    """
    rng = np.random.default_rng(0)
    return extract_all(rng.random(shape), cfg).names


# ---------------------------------------------------------------- tables

@dataclass(frozen=True)
class FeatureTable:
    paths: tuple
    names: tuple
    values: np.ndarray   # (samples, features)
    labels: tuple | None = None

    def column_indices(self, names) -> list[int]:
        lookup = {n: i for i, n in enumerate(self.names)}
        missing = [n for n in names if n not in lookup]
        if missing:
            raise ValidationError(f"features not in table: {missing[:5]}")
        return [lookup[n] for n in names]


def write_feature_table(path, paths, vectors) -> None:
    """CSV: header ``path,<feature names...>``, one row per sample."""
    vectors = list(vectors)
    if not vectors:
        raise ValidationError("no feature vectors to write")
    names = vectors[0].names
    for v in vectors[1:]:
        if v.names != names:
            raise ValidationError("feature vectors disagree on their names")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", *names])
        for p, v in zip(paths, vectors):
            w.writerow([str(p), *(repr(float(x)) for x in v.values)])


def read_feature_table(path) -> FeatureTable:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["path"]:
        raise DataError(f"{path}: feature table must start with a 'path' header column")
    names = tuple(rows[0][1:])
    if len(set(names)) != len(names):
        raise DataError(f"{path}: duplicate feature column names")
    body = [r for r in rows[1:] if r]
    if not body:
        raise DataError(f"{path}: feature table has no rows")
    try:
        vals = np.array([[float(x) for x in r[1:]] for r in body])
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    if vals.shape[1] != len(names):
        raise DataError(f"{path}: rows and header differ in width")
    if not np.all(np.isfinite(vals)):
        raise DataError(f"{path}: non-finite feature values")
    return FeatureTable(tuple(r[0] for r in body), names, vals)

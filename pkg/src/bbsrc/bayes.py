"""Gaussian naive Bayes with diagonal covariance and a two-class discriminant."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, ValidationError

VAR_FLOOR_REL = 1e-9
MODEL_FORMAT = "bbsrc-naive-bayes"


@dataclass(frozen=True)
class NbModel:
    classes: tuple
    feature_names: tuple
    priors: np.ndarray      # (k,)
    means: np.ndarray       # (k, D)
    variances: np.ndarray   # (k, D), already floored

    @property
    def d(self) -> int:
        return self.means.shape[1]

    @property
    def k(self) -> int:
        return len(self.classes)


@dataclass(frozen=True)
class NbPrediction:
    label: object
    g: float                # g1 - g2 for two classes, else best minus runner-up
    scores: np.ndarray      # per-class log discriminants
    tie: bool = False


def variance_floor(X) -> np.ndarray:
    """Per-feature floor: 1e-9 of the pooled variance (of mean^2 or 1 for constant features)."""
    X = np.asarray(X, dtype=np.float64)
    v = X.var(axis=0)
    fallback = np.maximum(X.mean(axis=0) ** 2, 1.0)
    return VAR_FLOOR_REL * np.where(v > 0, v, fallback)


def fit_nb(X, labels, classes, feature_names=None) -> NbModel:
    """Per-class sample means, unbiased sample variances (floored) and empirical priors."""
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=int)
    if X.ndim != 2 or X.shape[0] != labels.size:
        raise ValidationError("feature rows and labels differ")
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite training features")
    classes = tuple(classes)
    floor = variance_floor(X)
    means, variances, priors = [], [], []
    for i, c in enumerate(classes):
        rows = X[labels == i]
        if rows.shape[0] < 2:
            raise ValidationError(f"class {c!r} has {rows.shape[0]} samples; naive Bayes needs 2")
        means.append(rows.mean(axis=0))
        variances.append(np.maximum(rows.var(axis=0, ddof=1), floor))
        priors.append(rows.shape[0] / X.shape[0])
    names = tuple(feature_names) if feature_names is not None else tuple(
        f"f{j}" for j in range(X.shape[1]))
    return NbModel(classes, names, np.array(priors), np.array(means), np.array(variances))


def class_scores(model: NbModel, x) -> np.ndarray:
    """Gaussian log discriminants g_i(x), dropping the shared (D/2) log 2pi term."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size != model.d:
        raise ValidationError(f"feature vector has {x.size} values, model expects {model.d}")
    quad = ((x - model.means) ** 2 / model.variances).sum(axis=1)
    return -0.5 * quad - 0.5 * np.log(model.variances).sum(axis=1) + np.log(model.priors)


def discriminant_g(model: NbModel, x) -> float:
    """g(x) = g1(x) - g2(x); positive favours the first class."""
    if model.k != 2:
        raise ValidationError("the single discriminant is defined for two classes")
    s = class_scores(model, x)
    return float(s[0] - s[1])


def predict(model: NbModel, x) -> NbPrediction:
    """Two classes: sign of g, with g = 0 going to the first class and flagged.
    More classes: the largest g_i, lowest index on ties."""
    s = class_scores(model, x)
    if model.k == 2:
        g = float(s[0] - s[1])
        return NbPrediction(model.classes[0] if g >= 0 else model.classes[1], g, s, g == 0.0)
    order = np.argsort(-s, kind="stable")
    g = float(s[order[0]] - s[order[1]])
    return NbPrediction(model.classes[int(order[0])], g, s, g == 0.0)


# ------------------------------------------------------------ persistence
# One "key = json" pair per line:
#   format, classes, features, then prior.<i>, mean.<i>, variance.<i> per class.

def save_model(path, model: NbModel) -> None:
    lines = [f"format = {json.dumps(MODEL_FORMAT)}",
             f"classes = {json.dumps(list(model.classes))}",
             f"features = {json.dumps(list(model.feature_names))}"]
    for i in range(model.k):
        lines.append(f"prior.{i} = {json.dumps(float(model.priors[i]))}")
        lines.append(f"mean.{i} = {json.dumps(model.means[i].tolist())}")
        lines.append(f"variance.{i} = {json.dumps(model.variances[i].tolist())}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path) -> NbModel:
    kv = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise DataError(f"{path}:{n}: expected 'key = value'")
        try:
            kv[key.strip()] = json.loads(val)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{n}: {exc}") from None
    if kv.get("format") != MODEL_FORMAT:
        raise DataError(f"{path}: not a naive Bayes model file")
    try:
        classes = tuple(kv["classes"])
        k = len(classes)
        model = NbModel(classes, tuple(kv["features"]),
                        np.array([kv[f"prior.{i}"] for i in range(k)], dtype=float),
                        np.array([kv[f"mean.{i}"] for i in range(k)], dtype=float),
                        np.array([kv[f"variance.{i}"] for i in range(k)], dtype=float))
    except KeyError as exc:
        raise DataError(f"{path}: missing key {exc}") from None
    if model.means.shape != (k, len(model.feature_names)) or model.variances.shape != model.means.shape:
        raise DataError(f"{path}: model arrays have inconsistent shapes")
    if np.any(model.variances <= 0):
        raise DataError(f"{path}: non-positive variance")
    return model

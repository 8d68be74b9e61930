"""Leave-one-out cross-validation, confusion metrics, ROC/AUC and DeLong's test.

Scores are oriented so that larger values favour the positive class, which
is always ``classes[0]`` (class m in the two-class decision rules).
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.stats import norm

from .errors import DataError, ValidationError

# relative variance below which the AUC difference is treated as degenerate
DELONG_VAR_FLOOR = 1e-14


@dataclass(frozen=True)
class FoldPrediction:
    label_index: int
    score: float
    flags: tuple = ()


@dataclass(frozen=True)
class Confusion:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def tpr(self) -> float:
        p = self.tp + self.fn
        return 100.0 * self.tp / p if p else float("nan")

    @property
    def tnr(self) -> float:
        n = self.tn + self.fp
        return 100.0 * self.tn / n if n else float("nan")

    @property
    def acc(self) -> float:
        return 100.0 * (self.tp + self.tn) / self.total


def confusion(true_idx, pred_idx, positive: int = 0) -> Confusion:
    t = np.asarray(true_idx) == positive
    p = np.asarray(pred_idx) == positive
    return Confusion(int(np.sum(t & p)), int(np.sum(~t & ~p)), int(np.sum(~t & p)), int(np.sum(t & ~p)))


# -------------------------------------------------------------------- ROC

@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float               # percent


def _check_binary(scores, is_pos):
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    is_pos = np.asarray(is_pos, dtype=bool).reshape(-1)
    if scores.shape != is_pos.shape:
        raise ValidationError("scores and labels differ in length")
    if is_pos.all() or not is_pos.any():
        raise ValidationError("ROC analysis needs both classes")
    if not np.all(np.isfinite(scores)):
        raise DataError("non-finite scores")
    return scores, is_pos


def roc_auc(scores, is_pos) -> RocCurve:
    """ROC over the unique score values (descending) and the trapezoidal AUC.

    The trapezoid rule over tied-score steps gives exactly the Mann-Whitney
    statistic with half credit for ties.
    """
    scores, is_pos = _check_binary(scores, is_pos)
    thr = np.unique(scores)[::-1]
    pos, neg = np.sort(scores[is_pos]), np.sort(scores[~is_pos])
    # counts with score >= threshold
    tp = pos.size - np.searchsorted(pos, thr, side="left")
    fp = neg.size - np.searchsorted(neg, thr, side="left")
    tpr = np.concatenate([[0.0], tp / pos.size])
    fpr = np.concatenate([[0.0], fp / neg.size])
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(fpr, tpr, np.concatenate([[np.inf], thr]), 100.0 * auc)


def _placements(scores, is_pos):
    pos, neg = scores[is_pos], scores[~is_pos]
    neg_sorted, pos_sorted = np.sort(neg), np.sort(pos)
    # V10: share of negatives each positive beats (ties count half)
    v10 = (np.searchsorted(neg_sorted, pos, "left") + np.searchsorted(neg_sorted, pos, "right")) / (2 * neg.size)
    # V01: share of positives each negative loses to
    v01 = 1.0 - (np.searchsorted(pos_sorted, neg, "left")
                 + np.searchsorted(pos_sorted, neg, "right")) / (2 * pos.size)
    return v10, v01


@dataclass(frozen=True)
class DelongResult:
    auc_a: float             # percent
    auc_b: float
    z: float
    p: float
    flags: tuple = ()


def delong_test(scores_a, scores_b, is_pos) -> DelongResult:
    """Paired DeLong test for the difference of two correlated AUCs."""
    a, pos = _check_binary(scores_a, is_pos)
    b, _ = _check_binary(scores_b, is_pos)
    if a.shape != b.shape:
        raise ValidationError("paired score vectors differ in length")
    va10, va01 = _placements(a, pos)
    vb10, vb01 = _placements(b, pos)
    auc_a, auc_b = float(va10.mean()), float(vb10.mean())
    m, n = va10.size, va01.size
    s10 = np.cov(np.vstack([va10, vb10])) if m > 1 else np.zeros((2, 2))
    s01 = np.cov(np.vstack([va01, vb01])) if n > 1 else np.zeros((2, 2))
    var = (s10[0, 0] + s10[1, 1] - 2 * s10[0, 1]) / m + (s01[0, 0] + s01[1, 1] - 2 * s01[0, 1]) / n
    diff = auc_a - auc_b
    if not var > DELONG_VAR_FLOOR:
        return DelongResult(100 * auc_a, 100 * auc_b, 0.0, 1.0, ("degenerate_variance",))
    z = diff / math.sqrt(var)
    return DelongResult(100 * auc_a, 100 * auc_b, float(z), float(2 * norm.sf(abs(z))))


# ------------------------------------------------------------------ LOOCV

@dataclass(frozen=True)
class EvalRow:
    path: str
    true_label: str
    predicted_label: str
    score: float
    positive: bool


@dataclass(frozen=True)
class EvalReport:
    name: str
    classes: tuple
    rows: tuple
    confusion: Confusion
    roc: RocCurve | None
    flags: tuple = ()
    extra: dict = field(default_factory=dict)

    @property
    def tpr(self) -> float:
        return self.confusion.tpr

    @property
    def tnr(self) -> float:
        return self.confusion.tnr

    @property
    def acc(self) -> float:
        return self.confusion.acc

    @property
    def auc(self) -> float:
        return self.roc.auc if self.roc is not None else float("nan")

    @property
    def scores(self) -> np.ndarray:
        return np.array([r.score for r in self.rows])

    @property
    def is_pos(self) -> np.ndarray:
        return np.array([r.positive for r in self.rows])

    def table_row(self) -> str:
        return f"{self.name} & {self.tpr:.1f} & {self.tnr:.1f} & {self.acc:.1f} & {self.auc:.1f}"


def make_report(name, classes, paths, true_idx, preds: Sequence[FoldPrediction], flags=()) -> EvalReport:
    true_idx = np.asarray(true_idx, dtype=int)
    pred_idx = np.array([p.label_index for p in preds], dtype=int)
    rows = tuple(EvalRow(str(path), str(classes[t]), str(classes[p.label_index]), float(p.score), bool(t == 0))
                 for path, t, p in zip(paths, true_idx, preds))
    conf = confusion(true_idx, pred_idx)
    is_pos = true_idx == 0
    roc = roc_auc([p.score for p in preds], is_pos) if is_pos.any() and not is_pos.all() else None
    fold_flags = sorted({f for p in preds for f in p.flags})
    return EvalReport(name, tuple(classes), rows, conf, roc, tuple(flags) + tuple(fold_flags))


def check_folds(labels) -> tuple:
    """Validate a LOOCV design; returns flags.

    Every training fold must contain both classes, except for the 2-sample
    design, which runs on one training sample per fold and is flagged.
    """
    labels = np.asarray(labels, dtype=int)
    n = labels.size
    if n < 2:
        raise ValidationError("LOOCV needs at least 2 samples")
    counts = np.bincount(labels, minlength=2)
    if np.count_nonzero(counts) < 2:
        raise ValidationError("LOOCV needs both classes present")
    if n == 2:
        return ("degenerate_two_sample",)
    single = np.flatnonzero(counts[labels] == 1)
    if single.size:
        raise ValidationError(f"fold {int(single[0])}: training set would contain a single class")
    return ()


def loocv(labels, fold_fn: Callable[[int], FoldPrediction], threads: int | None = None) -> tuple[list, tuple]:
    """Run ``fold_fn(t)`` for every held-out index ``t``.

    ``fold_fn`` trains on every sample except ``t`` and classifies ``t``; it
    receives only the index, never the held-out label. Results come back in
    sample order whatever the thread count.
    """
    flags = check_folds(labels)
    n = len(labels)

    def run(t):
        try:
            return fold_fn(t)
        except Exception as exc:
            raise type(exc)(f"fold {t}: {exc}") from exc

    if threads is not None and threads <= 1:
        return [run(t) for t in range(n)], flags
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, range(n))), flags


# ---------------------------------------------------------------- files

REPORT_HEADER = ("path", "true_label", "predicted_label", "score", "positive")


def write_report(directory, report: EvalReport) -> dict:
    """``<name>_predictions.csv``, ``<name>_summary.txt`` and ``<name>_roc.csv``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = {k: d / f"{report.name}_{k}" for k in ("predictions.csv", "summary.txt", "roc.csv")}
    with open(paths["predictions.csv"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in report.rows:
            w.writerow([r.path, r.true_label, r.predicted_label, repr(r.score), int(r.positive)])
    c = report.confusion
    lines = [
        f"name = {report.name}",
        f"classes = {','.join(report.classes)}",
        f"positive = {report.classes[0]}",
        f"samples = {c.total}",
        f"TP = {c.tp}", f"TN = {c.tn}", f"FP = {c.fp}", f"FN = {c.fn}",
        f"TPR = {report.tpr:.4f}", f"TNR = {report.tnr:.4f}",
        f"ACC = {report.acc:.4f}", f"AUC = {report.auc:.4f}",
        f"flags = {','.join(report.flags)}",
    ]
    lines += [f"{k} = {v}" for k, v in report.extra.items()]
    paths["summary.txt"].write_text("\n".join(lines) + "\n", encoding="utf-8")
    with open(paths["roc.csv"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fpr", "tpr"])
        if report.roc is not None:
            for x, y in zip(report.roc.fpr, report.roc.tpr):
                w.writerow([repr(float(x)), repr(float(y))])
    return paths


def read_report_rows(path) -> list[EvalRow]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: report not found")
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.reader(fh)
        header = next(rd, None)
        if header is None or tuple(header) != REPORT_HEADER:
            raise DataError(f"{path}: not a per-sample report (header {header})")
        rows = []
        for n, r in enumerate(rd, start=2):
            if len(r) != len(REPORT_HEADER):
                raise DataError(f"{path}:{n}: expected {len(REPORT_HEADER)} fields")
            rows.append(EvalRow(r[0], r[1], r[2], float(r[3]), r[4] == "1"))
    return rows


def compare_reports(path_a, path_b) -> DelongResult:
    """DeLong test between two per-sample reports over the same samples."""
    a, b = read_report_rows(path_a), read_report_rows(path_b)
    key_a = [(r.path, r.true_label, r.positive) for r in a]
    key_b = [(r.path, r.true_label, r.positive) for r in b]
    if sorted(key_a) != sorted(key_b):
        raise DataError("reports cover different sample sets")
    sb = {r.path: r.score for r in b}
    return delong_test([r.score for r in a], [sb[r.path] for r in a], [r.positive for r in a])

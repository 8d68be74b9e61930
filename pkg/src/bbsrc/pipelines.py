"""LOOCV drivers for the three classification pipelines.

Each driver returns one :class:`EvalReport` per reported variant. Training
that does not look at labels (feature extraction, column normalization) is
done once; anything label-dependent (feature selection, naive Bayes fits,
tau calibration) runs inside each fold on the training samples only.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import bayes, ensemble, featsel
from .config import RunConfig
from .errors import ValidationError
from .evaluation import EvalReport, FoldPrediction, loocv, make_report
from .imgio import DatasetManifest, load_dataset
from .srcclf import InputTransform, build_src, class_order, classify_vector
from .texture.extract import extract_all


@dataclass(frozen=True)
class Dataset:
    paths: tuple
    images: tuple
    labels: np.ndarray       # class indices
    classes: tuple

    @classmethod
    def from_manifest(cls, man: DatasetManifest) -> "Dataset":
        return cls(tuple(str(p) for p in man.paths), tuple(load_dataset(man)), man.label_indices(),
                   man.classes)

    def check_two_class(self):
        if len(self.classes) != 2:
            raise ValidationError(f"this pipeline needs exactly 2 classes, found {len(self.classes)}")


def feature_matrix(ds: Dataset, cfg: RunConfig, table=None):
    """Rows of texture features, from a precomputed table when one is given."""
    if table is not None:
        lookup = {p: i for i, p in enumerate(table.paths)}
        missing = [p for p in ds.paths if p not in lookup]
        if missing:
            raise ValidationError(f"feature table lacks {len(missing)} samples, e.g. {missing[0]}")
        return table.values[[lookup[p] for p in ds.paths]], tuple(table.names)
    ecfg = cfg.extract_config()
    vecs = [extract_all(im, ecfg) for im in ds.images]
    return np.array([v.values for v in vecs]), tuple(vecs[0].names)


# ------------------------------------------------------------- texture NB

def texture_nb(ds: Dataset, cfg: RunConfig, X=None, names=None) -> list[EvalReport]:
    ds.check_two_class()
    if X is None:
        X, names = feature_matrix(ds, cfg)
    sel = cfg.selection
    fixed = None
    if not sel.per_fold:
        # selection on all samples leaks labels into the folds; kept for comparison only
        fixed = featsel.select(featsel.FeatureMatrix(X, names, ds.labels, ds.classes), sel.method,
                               stall_limit=sel.stall_limit, ga=sel.ga(cfg.seed),
                               ig_threshold=sel.ig_threshold, top=sel.top)

    def fold(t):
        train = np.flatnonzero(np.arange(len(ds.paths)) != t)
        cols = fixed
        if cols is None:
            fm = featsel.FeatureMatrix(X[train], names, ds.labels[train], ds.classes)
            cols = featsel.select(fm, sel.method, stall_limit=sel.stall_limit, ga=sel.ga(cfg.seed),
                                  ig_threshold=sel.ig_threshold, top=sel.top)
        model = bayes.fit_nb(X[np.ix_(train, cols)], ds.labels[train], ds.classes,
                             [names[c] for c in cols])
        p = bayes.predict(model, X[t, cols])
        return FoldPrediction(ds.classes.index(p.label), p.g, ("tie",) if p.tie else ())

    preds, flags = loocv(ds.labels, fold, cfg.threads)
    flags += ("selection_not_nested",) if fixed is not None else ()
    return [make_report("texture-nb", ds.classes, ds.paths, ds.labels, preds, flags)]


# -------------------------------------------------------------------- SRC

def _src_fold_fn(model, vectors, col_of):
    def fold(t):
        cols = np.flatnonzero(np.arange(model.dictionary.s) != col_of[t])
        r = classify_vector(model, vectors[t], cols)
        return FoldPrediction(r.label_index, r.score, tuple(f for f in r.flags if f == "tie"))
    return fold


def src(ds: Dataset, cfg: RunConfig, X=None, names=None) -> list[EvalReport]:
    """Whole-ROI SRC, one report per sampling fraction (or one on features).

    Dictionary columns are normalized independently, so leaving sample t's
    column out of the full dictionary is exactly the dictionary built from
    the other samples.
    """
    ds.check_two_class()
    order = class_order(ds.labels)
    col_of = np.empty_like(order)
    col_of[order] = np.arange(order.size)
    runs = []
    if cfg.src.input == "features":
        if X is None:
            X, names = feature_matrix(ds, cfg)
        runs.append(("src-features", InputTransform(kind="features"), list(X)))
    else:
        for frac in cfg.src.sampling:
            tr = InputTransform(keep_fraction=frac, mode=cfg.src.mode)
            label = str(tr.keep_fraction).replace("/", "_")
            runs.append((f"src-samp{label}", tr, list(ds.images)))
    reports = []
    for name, tr, samples in runs:
        vectors = [tr.apply(s) for s in samples]
        model = build_src(vectors, ds.labels, ds.classes, cfg.solver, InputTransform(kind="features"),
                          ds.paths)
        preds, flags = loocv(ds.labels, _src_fold_fn(model, vectors, col_of), cfg.threads)
        rep = make_report(name, ds.classes, ds.paths, ds.labels, preds, flags + tuple(sorted(model.flags)))
        reports.append(replace(rep, extra={"dimension": model.dictionary.l}))
    return reports


# --------------------------------------------------------- block ensemble

def block_ensemble(ds: Dataset, cfg: RunConfig) -> list[EvalReport]:
    """All three fusions from one set of block codes per fold.

    With ``calibration = nested`` each fold's tau* (and PDS sigmoid) comes
    from leave-one-out scores of that fold's training images, every one of
    them coded without its own column and without the held-out column.
    """
    ds.check_two_class()
    e = cfg.ensemble
    model = ensemble.train_block_ensemble(ds.images, ds.labels, ds.classes, e.block_width, e.block_height,
                                          cfg.solver, ds.paths, e.decision, e.literal_sign)
    order = class_order(ds.labels)
    col_of = np.empty_like(order)
    col_of[order] = np.arange(order.size)
    ordered = [ds.images[i] for i in order]
    is_m = model.column_class == 0

    def fold(t):
        c = int(col_of[t])
        cols = [j for j in range(model.s) if j != c]
        fused = ensemble.fused_scores(ensemble.block_solve(model, ds.images[t], cols), 2,
                                      model.literal_sign)
        out = {"bbmap": ensemble.decide(model, fused, "bbmap")}
        cal_flags = {}
        if e.calibration == "nested":
            kept, train_fused = ensemble.training_fused(model, ordered, exclude=[c])
        for dec in ("bbll-r", "bbll-s"):
            tau, params, fl = 0.0, None, ()
            if e.calibration == "nested":
                train = np.array([f[dec].value for f in train_fused])
                cal = ensemble.calibrate_tau(train, is_m[kept])
                tau, fl = cal.tau, cal.flags
                try:
                    params = ensemble.fit_pds(tau, float(train.min()), e.pds_min)
                except ValidationError:
                    fl += ("pds_uncalibrated",)
            m = replace(model, tau=tau, pds=params)
            out[dec] = ensemble.decide(m, fused, dec)
            cal_flags[dec] = fl
        return out, cal_flags

    results, flags = loocv(ds.labels, fold, cfg.threads)
    reports = []
    for dec in ensemble.DECISIONS:
        preds = []
        for res, cal_flags in results:
            d = res[dec]
            preds.append(FoldPrediction(d.label_index, d.score,
                                        tuple(d.flags) + tuple(f"tau_{f}" for f in cal_flags.get(dec, ()))))
        rep = make_report(dec, ds.classes, ds.paths, ds.labels, preds, flags)
        extra = {"blocks": model.nb, "block_size": f"{model.block_width}x{model.block_height}",
                 "calibration": e.calibration if dec != "bbmap" else "n/a"}
        if dec != "bbmap":
            extra["probabilities"] = ",".join(
                "nan" if r[dec].probability is None else repr(r[dec].probability) for r, _ in results)
        reports.append(replace(rep, extra=extra))
    return reports


def run_pipeline(ds: Dataset, cfg: RunConfig, table=None) -> list[EvalReport]:
    if cfg.pipeline == "block-ensemble":
        return block_ensemble(ds, cfg)
    X = names = None
    if table is not None:
        X, names = feature_matrix(ds, cfg, table)
    if cfg.pipeline == "src":
        return src(ds, cfg, X, names)
    return texture_nb(ds, cfg, X, names)

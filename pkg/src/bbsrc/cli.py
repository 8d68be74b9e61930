"""Command-line driver.

Exit codes: 0 success, 1 validation error (bad arguments or config),
2 runtime or data error (unreadable inputs, solver failures).
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bayes, ensemble, evaluation, featsel, kernels, synth
from .config import PIPELINES, RunConfig, load_config, write_config
from .errors import BbsrcError, DataError, SolverError, ValidationError
from .imgio import load_image, load_manifest
from .pipelines import Dataset, feature_matrix, run_pipeline
from .sparse import METHODS, Dictionary, SolverConfig
from .srcclf import InputTransform, SrcModel, build_src, classify_src
from .texture.extract import FAMILIES, extract_all, read_feature_table, write_feature_table

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_VALIDATION)


# ------------------------------------------------------------ config glue

def _common(p):
    p.add_argument("--config", type=Path, help="run config file (INI sections)")
    p.add_argument("--manifest", type=Path, help="dataset manifest CSV (path,label)")
    p.add_argument("--output", type=Path, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="worker cap (default: available cores)")


def _pipeline_opts(p):
    p.add_argument("--pipeline", choices=PIPELINES)
    p.add_argument("--features", type=Path, help="precomputed feature table CSV")
    p.add_argument("--families", help="comma-separated feature families, or 'all'")
    p.add_argument("--selection", choices=featsel.SELECTORS)
    p.add_argument("--solver", choices=METHODS)
    p.add_argument("--epsilon-rel", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--block-size", type=int)
    p.add_argument("--decision", choices=ensemble.DECISIONS)
    p.add_argument("--sampling", help="comma-separated keep fractions for SRC, e.g. 1/4,1/20")
    p.add_argument("--src-input", choices=("image", "features"))
    p.add_argument("--calibration", choices=("nested", "none"))
    p.add_argument("--pds-min", type=float)
    p.add_argument("--literal-sign", action="store_true", default=None)


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    top = {k: getattr(args, k) for k in ("manifest", "output", "seed", "threads", "pipeline", "features")
           if getattr(args, k, None) is not None}
    cfg = replace(cfg, **top)
    if getattr(args, "families", None):
        fams = tuple(f.strip() for f in args.families.split(",") if f.strip())
        cfg = replace(cfg, families=FAMILIES if fams == ("all",) else fams)
    if getattr(args, "selection", None):
        cfg = replace(cfg, selection=replace(cfg.selection, method=args.selection))
    sv = {}
    if getattr(args, "solver", None):
        sv["method"] = args.solver
    if getattr(args, "epsilon_rel", None) is not None:
        sv["epsilon_rel"] = args.epsilon_rel
    if getattr(args, "epsilon", None) is not None:
        sv["epsilon"] = args.epsilon
    if sv:
        cfg = replace(cfg, solver=replace(cfg.solver, **sv))
    en = {}
    if getattr(args, "block_size", None) is not None:
        en.update(block_width=args.block_size, block_height=args.block_size)
    for k in ("decision", "calibration", "pds_min", "literal_sign"):
        if getattr(args, k, None) is not None:
            en[k] = getattr(args, k)
    if en:
        cfg = replace(cfg, ensemble=replace(cfg.ensemble, **en))
    sr = {}
    if getattr(args, "sampling", None):
        sr["sampling"] = tuple(s.strip() for s in args.sampling.split(",") if s.strip())
    if getattr(args, "src_input", None):
        sr["input"] = args.src_input
    if sr:
        cfg = replace(cfg, src=replace(cfg.src, **sr))
    return cfg


def _dataset(cfg: RunConfig) -> Dataset:
    return Dataset.from_manifest(load_manifest(cfg.manifest))


def _table(cfg: RunConfig):
    return read_feature_table(cfg.features) if cfg.features is not None else None


# --------------------------------------------------------------- commands

def cmd_synth(args) -> int:
    base = synth.SynthConfig()
    cfg = synth.SynthConfig(per_class=args.per_class or base.per_class, size=args.size or base.size,
                            seed=args.seed if args.seed is not None else base.seed)
    man = synth.write_dataset(args.output, cfg)
    print(f"wrote {man.s} images ({', '.join(f'{c}: {n}' for c, n in zip(man.classes, man.counts))}) "
          f"and {Path(args.output) / 'manifest.csv'}")
    return EXIT_OK


def cmd_extract(args) -> int:
    cfg = _config(args).validate()
    man = load_manifest(cfg.manifest)
    ecfg = cfg.extract_config()
    vectors, failures = [], []
    for p in man.paths:
        try:
            vectors.append(extract_all(load_image(p), ecfg))
        except BbsrcError as exc:
            failures.append(f"{p}: {exc}")
    if failures:
        for f in failures:
            print(f"error: {f}", file=sys.stderr)
        return EXIT_RUNTIME
    out = Path(args.out) if args.out else Path(cfg.output) / "features.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_feature_table(out, [str(p) for p in man.paths], vectors)
    write_config(out.parent, replace(cfg, features=out))
    flagged = sum(1 for v in vectors if v.flags)
    print(f"wrote {len(vectors)} rows x {len(vectors[0])} features to {out} ({flagged} rows flagged)")
    return EXIT_OK


def cmd_select(args) -> int:
    cfg = _config(args).validate()
    if cfg.features is None:
        raise ValidationError("select needs --features (a table written by 'extract')")
    ds_man = load_manifest(cfg.manifest)
    table = read_feature_table(cfg.features)
    lookup = {p: i for i, p in enumerate(table.paths)}
    missing = [str(p) for p in ds_man.paths if str(p) not in lookup]
    if missing:
        raise DataError(f"feature table lacks samples, e.g. {missing[0]}")
    X = table.values[[lookup[str(p)] for p in ds_man.paths]]
    fm = featsel.FeatureMatrix(X, table.names, ds_man.label_indices(), ds_man.classes)
    sel = cfg.selection
    cols = featsel.select(fm, sel.method, stall_limit=sel.stall_limit, ga=sel.ga(cfg.seed),
                          ig_threshold=sel.ig_threshold, top=sel.top)
    out = Path(args.out) if args.out else Path(cfg.output) / "subset.txt"
    out.parent.mkdir(parents=True, exist_ok=True)
    featsel.write_subset(out, [table.names[c] for c in cols])
    write_config(out.parent, cfg)
    print(f"{sel.method}: {len(cols)} of {fm.n_features} features -> {out}")
    return EXIT_OK


SRC_FORMAT = "bbsrc-src"
NB_FILE = "naive_bayes.txt"


def _save_src(directory: Path, model: SrcModel):
    directory.mkdir(parents=True, exist_ok=True)
    D = model.dictionary
    meta = {"format": SRC_FORMAT, "classes": list(D.classes), "column_class": D.column_class.tolist(),
            "sample_names": list(model.sample_names), "keep_fraction": str(model.transform.keep_fraction),
            "mode": model.transform.mode,
            "solver": {"method": model.solver.method, "epsilon": model.solver.epsilon,
                       "epsilon_rel": model.solver.epsilon_rel}}
    (directory / "model.txt").write_text("".join(f"{k} = {json.dumps(v)}\n" for k, v in meta.items()),
                                         encoding="utf-8")
    ensemble.write_matrix(directory / "dictionary.bin", D.atoms)
    ensemble.write_matrix(directory / "norms.bin", D.norms[None, :])


def _read_meta(path: Path) -> dict:
    meta = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            k, _, v = line.partition("=")
            meta[k.strip()] = json.loads(v)
    return meta


def _load_any(directory: Path):
    if (directory / NB_FILE).is_file():
        subset = featsel.read_subset(directory / "subset.txt")
        return "texture-nb", (bayes.load_model(directory / NB_FILE), subset)
    meta_path = directory / "model.txt"
    if not meta_path.is_file():
        raise DataError(f"{directory}: no model found")
    meta = _read_meta(meta_path)
    if meta.get("format") == SRC_FORMAT:
        cc = np.array(meta["column_class"], dtype=int)
        D = Dictionary(ensemble.read_matrix(directory / "dictionary.bin"), cc, tuple(meta["classes"]),
                       ensemble.read_matrix(directory / "norms.bin")[0])
        sv = meta["solver"]
        solver = SolverConfig(method=sv["method"], epsilon=sv["epsilon"], epsilon_rel=sv["epsilon_rel"])
        tr = InputTransform(keep_fraction=meta["keep_fraction"], mode=meta["mode"])
        return "src", SrcModel(D, solver, tr, tuple(meta["sample_names"]), gram=D.gram())
    return "block-ensemble", ensemble.load_model(directory)


def _ordered_images(ds: Dataset):
    order = np.argsort(ds.labels, kind="stable")
    return [ds.images[i] for i in order]


def _calibrate_model(model, ds: Dataset, cfg: RunConfig, out: Path):
    dec = cfg.ensemble.decision
    if dec == "bbmap":
        return model, None
    scores = ensemble.training_scores(model, _ordered_images(ds), dec)
    cal = ensemble.calibrate_tau(scores, model.column_class == 0)
    params = ensemble.fit_pds(cal.tau, float(scores.min()), cfg.ensemble.pds_min)
    model = replace(model, tau=cal.tau, pds=params, decision=dec)
    with open(out / "tau_curve.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tau", "tpr", "tnr"])
        for t, a, b in zip(cal.grid, cal.tpr, cal.tnr):
            w.writerow([repr(float(t)), repr(float(a)), repr(float(b))])
    xs = np.unique(np.concatenate([cal.grid, [params.lls_min, params.center]]))
    with open(out / "pds_curve.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["score", "pds"])
        for x in xs:
            w.writerow([repr(float(x)), repr(ensemble.pds(x, params))])
    lines = [f"decision = {dec}", f"tau = {cal.tau!r}", f"slope = {params.slope!r}",
             f"center = {params.center!r}", f"pds_min = {params.pds_min!r}", f"lls_min = {params.lls_min!r}",
             f"flags = {','.join(cal.flags)}", f"training_scores = {len(scores)}"]
    (out / "calibration.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return model, cal


def cmd_train(args) -> int:
    cfg = _config(args).validate()
    ds = _dataset(cfg)
    out = Path(args.model) if args.model else Path(cfg.output) / "model"
    out.mkdir(parents=True, exist_ok=True)
    if cfg.pipeline == "block-ensemble":
        e = cfg.ensemble
        model = ensemble.train_block_ensemble(ds.images, ds.labels, ds.classes, e.block_width, e.block_height,
                                              cfg.solver, ds.paths, e.decision, e.literal_sign)
        if e.calibration == "nested":
            model, _ = _calibrate_model(model, ds, cfg, out)
        ensemble.save_model(out, model)
        print(f"block ensemble: {model.nb} blocks of {e.block_width}x{model.block_height}, "
              f"{model.s} atoms each, tau* = {model.tau:.4f} -> {out}")
    elif cfg.pipeline == "src":
        frac = cfg.src.sampling[0]
        model = build_src(ds.images, ds.labels, ds.classes, cfg.solver,
                          InputTransform(keep_fraction=frac, mode=cfg.src.mode), ds.paths)
        _save_src(out, model)
        print(f"SRC: {model.dictionary.l}x{model.dictionary.s} dictionary (keep {frac}) -> {out}")
    else:
        X, names = feature_matrix(ds, cfg, _table(cfg))
        sel = cfg.selection
        fm = featsel.FeatureMatrix(X, names, ds.labels, ds.classes)
        cols = featsel.select(fm, sel.method, stall_limit=sel.stall_limit, ga=sel.ga(cfg.seed),
                              ig_threshold=sel.ig_threshold, top=sel.top)
        model = bayes.fit_nb(X[:, cols], ds.labels, ds.classes, [names[c] for c in cols])
        bayes.save_model(out / NB_FILE, model)
        featsel.write_subset(out / "subset.txt", [names[c] for c in cols])
        print(f"naive Bayes on {len(cols)} selected features -> {out}")
    write_config(out, cfg)
    return EXIT_OK


def cmd_classify(args) -> int:
    cfg = _config(args)
    kind, model = _load_any(Path(args.model))
    rows = []
    for p in args.images:
        img = load_image(p)
        if kind == "block-ensemble":
            d = ensemble.classify(model, img)
            rows.append((p, d.label, d.score, "" if d.probability is None else f"{d.probability:.6f}"))
        elif kind == "src":
            r = classify_src(model, img)
            rows.append((p, r.label, r.score, f"{r.sci:.6f}"))
        else:
            nb, subset = model
            fv = extract_all(img, cfg.extract_config())
            idx = {n: i for i, n in enumerate(fv.names)}
            x = fv.values[[idx[n] for n in subset]]
            pr = bayes.predict(nb, x)
            rows.append((p, pr.label, pr.g, ""))
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["path", "predicted_label", "score", "extra"])
    for p, lab, score, extra in rows:
        w.writerow([p, lab, repr(float(score)), extra])
    return EXIT_OK


def cmd_crossval(args) -> int:
    cfg = _config(args).validate()
    ds = _dataset(cfg)
    out = Path(cfg.output)
    write_config(out, cfg)
    reports = run_pipeline(ds, cfg, _table(cfg))
    print(f"{'variant':<16} &   TPR &   TNR &   ACC &   AUC")
    for r in reports:
        evaluation.write_report(out, r)
        print(f"{r.name:<16} & {r.tpr:5.1f} & {r.tnr:5.1f} & {r.acc:5.1f} & {r.auc:5.1f}")
        if r.flags:
            print(f"  flags: {', '.join(r.flags)}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = _config(args)
    mdir = Path(args.model)
    model = ensemble.load_model(mdir)
    cfg = replace(cfg, ensemble=replace(cfg.ensemble, decision=args.decision or model.decision))
    cfg.validate()
    if cfg.ensemble.decision == "bbmap":
        raise ValidationError("calibration applies to the BBLL decisions")
    ds = _dataset(cfg)
    names = list(model.sample_names)
    ordered = [ds.paths[i] for i in np.argsort(ds.labels, kind="stable")]
    if names and names != ordered:
        raise DataError("manifest does not match the model's training samples")
    out = Path(args.out) if args.out else mdir
    out.mkdir(parents=True, exist_ok=True)
    model, cal = _calibrate_model(model, ds, cfg, out)
    ensemble.save_model(mdir, model)
    flags = f" [{', '.join(cal.flags)}]" if cal.flags else ""
    print(f"tau* = {model.tau:.6f}  PDS slope = {model.pds.slope:.6f}  lls_min = {model.pds.lls_min:.6f}{flags}")
    return EXIT_OK


def cmd_compare(args) -> int:
    r = evaluation.compare_reports(args.report_a, args.report_b)
    print(f"AUC_A = {r.auc_a:.4f}  AUC_B = {r.auc_b:.4f}  z = {r.z:.4f}  p = {r.p:.4f}"
          + (f"  flags: {', '.join(r.flags)}" if r.flags else ""))
    return EXIT_OK


# ------------------------------------------------------------------ main

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="bbsrc", description="Block-based sparse representation texture classification.")
    ap.add_argument("--version", action="version", version=f"%(prog)s (kernels: {kernels.BACKEND})")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write the synthetic two-class texture dataset")
    p.add_argument("--output", type=Path, required=True)
    p.add_argument("--per-class", type=int)
    p.add_argument("--size", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="texture feature table for every manifest image")
    _common(p)
    p.add_argument("--families", help="comma-separated feature families, or 'all'")
    p.add_argument("--out", type=Path, help="feature CSV (default: <output>/features.csv)")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("select", help="feature subset selection on a feature table")
    _common(p)
    p.add_argument("--features", type=Path)
    p.add_argument("--selection", choices=featsel.SELECTORS)
    p.add_argument("--out", type=Path, help="subset file (default: <output>/subset.txt)")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("train", help="train one pipeline on the whole manifest")
    _common(p)
    _pipeline_opts(p)
    p.add_argument("--model", type=Path, help="model directory (default: <output>/model)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="classify images with a trained model")
    p.add_argument("--config", type=Path)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("images", nargs="+", type=Path)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("crossval", help="leave-one-out cross-validation with reports")
    _common(p)
    _pipeline_opts(p)
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("calibrate", help="tau* and PDS calibration of a block-ensemble model")
    _common(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--decision", choices=("bbll-r", "bbll-s"))
    p.add_argument("--pds-min", type=float)
    p.add_argument("--out", type=Path, help="directory for the curves (default: the model directory)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("compare", help="DeLong test between two per-sample reports")
    p.add_argument("report_a", type=Path)
    p.add_argument("report_b", type=Path)
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors, --help, --version
        return int(exc.code or 0)
    threads = getattr(args, "threads", None)
    if threads is not None and threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DataError, SolverError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

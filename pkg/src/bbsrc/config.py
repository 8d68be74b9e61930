"""Run configuration: an INI-style file of ``key = value`` sections.

Example::

    [run]
    manifest = data/manifest.csv
    pipeline = block-ensemble
    output = out
    seed = 0

    [solver]
    method = bpdn
    epsilon_rel = 0.05

    [ensemble]
    block_width = 25
    decision = bbll-s

Relative paths resolve against the config file's directory. Command-line
flags override file values; the merged config is written into the output
directory so every result carries its provenance.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .ensemble import DECISIONS
from .errors import ValidationError
from .featsel import SELECTORS, GaParams
from .imgio import parse_fraction
from .sparse import METHODS, SolverConfig
from .texture.extract import FAMILIES, ExtractConfig

PIPELINES = ("texture-nb", "src", "block-ensemble")


@dataclass(frozen=True)
class SelectionConfig:
    method: str = "cfs-bestfirst"
    stall_limit: int = 5
    ig_threshold: float = 0.0
    top: int | None = None
    ga_population: int = 50
    ga_generations: int = 20
    ga_crossover: float = 0.6
    ga_mutation: float = 0.033
    per_fold: bool = True           # re-run selection inside every LOOCV fold

    def ga(self, seed: int) -> GaParams:
        return GaParams(self.ga_population, self.ga_generations, self.ga_crossover,
                        self.ga_mutation, seed)


@dataclass(frozen=True)
class SrcConfig:
    sampling: tuple = ("1/4", "1/20")
    mode: str = "average"
    input: str = "image"            # image | features


@dataclass(frozen=True)
class EnsembleConfig:
    block_width: int = 25
    block_height: int | None = None
    decision: str = "bbll-s"
    literal_sign: bool = False
    calibration: str = "nested"     # nested | none
    pds_min: float = 0.05


@dataclass(frozen=True)
class RunConfig:
    manifest: Path | None = None
    pipeline: str = "block-ensemble"
    output: Path = Path("out")
    seed: int = 0
    threads: int | None = None
    features: Path | None = None    # precomputed feature table (optional)
    families: tuple = FAMILIES
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    src: SrcConfig = field(default_factory=SrcConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)

    def extract_config(self) -> ExtractConfig:
        return ExtractConfig(families=self.families)

    def validate(self, need_manifest: bool = True) -> "RunConfig":
        if self.pipeline not in PIPELINES:
            raise ValidationError(f"pipeline must be one of {PIPELINES}, got {self.pipeline!r}")
        if need_manifest:
            if self.manifest is None:
                raise ValidationError("no dataset manifest configured")
            if not Path(self.manifest).is_file():
                raise ValidationError(f"manifest {self.manifest} does not exist")
        if self.features is not None and not Path(self.features).is_file():
            raise ValidationError(f"feature table {self.features} does not exist")
        e = self.ensemble
        if e.block_width <= 0 or (e.block_height is not None and e.block_height <= 0):
            raise ValidationError("block size must be positive")
        if e.decision not in DECISIONS:
            raise ValidationError(f"decision must be one of {DECISIONS}")
        if e.calibration not in ("nested", "none"):
            raise ValidationError("ensemble calibration must be 'nested' or 'none'")
        if not 0 < e.pds_min < 0.5:
            raise ValidationError("pds_min must lie in (0, 0.5)")
        if self.selection.method not in SELECTORS:
            raise ValidationError(f"selection method must be one of {SELECTORS}")
        if self.src.input not in ("image", "features"):
            raise ValidationError("src input must be 'image' or 'features'")
        for f in self.src.sampling:
            frac = parse_fraction(f)
            if not 0 < frac <= 1:
                raise ValidationError(f"sampling fraction {f} outside (0, 1]")
        if self.threads is not None and self.threads < 1:
            raise ValidationError("threads must be >= 1")
        bad = [f for f in self.families if f not in FAMILIES]
        if bad:
            raise ValidationError(f"unknown feature families {bad}")
        return self


# ------------------------------------------------------------------ parse

def _coerce(text: str, default, name: str):
    t = text.strip()
    if isinstance(default, bool):
        low = t.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValidationError(f"{name}: expected a boolean, got {text!r}")
    if t.lower() in ("", "none"):
        return None
    try:
        if isinstance(default, int):
            return int(t)
        if isinstance(default, float):
            return float(t)
    except ValueError:
        raise ValidationError(f"{name}: cannot parse {text!r}") from None
    if isinstance(default, tuple):
        return tuple(x.strip() for x in t.split(",") if x.strip())
    if isinstance(default, Path):
        return Path(t)
    return t


_INT_OR_NONE = {"top", "block_height", "max_iterations", "threads"}
_FLOAT_OR_NONE = {"epsilon"}


def _apply(obj, values: dict, section: str):
    known = {f.name: getattr(obj, f.name) for f in fields(obj)}
    upd = {}
    for key, text in values.items():
        if key not in known:
            raise ValidationError(f"[{section}] unknown key {key!r}")
        default = known[key]
        if key in _INT_OR_NONE:
            default = 0
        elif key in _FLOAT_OR_NONE:
            default = 0.0
        upd[key] = _coerce(text, default, f"[{section}] {key}")
    return replace(obj, **upd)


def _resolve(p, base: Path):
    if p is None:
        return None
    p = Path(p)
    return p if p.is_absolute() else base / p


def parse_config(text: str, base_dir=".") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"config: {exc}") from None
    base = Path(base_dir)
    cfg = RunConfig()
    for section in cp.sections():
        vals = dict(cp[section])
        if section == "run":
            cfg = _apply(cfg, vals, section)
        elif section == "features":
            cfg = _apply(cfg, {"families": vals.pop("families")} if "families" in vals else {}, section)
            if vals:
                raise ValidationError(f"[features] unknown keys {sorted(vals)}")
        elif section in ("selection", "solver", "src", "ensemble"):
            cfg = replace(cfg, **{section: _apply(getattr(cfg, section), vals, section)})
        else:
            raise ValidationError(f"unknown config section [{section}]")
    if cfg.families == ("all",):
        cfg = replace(cfg, families=FAMILIES)
    return replace(cfg, manifest=_resolve(cfg.manifest, base), features=_resolve(cfg.features, base),
                   output=_resolve(cfg.output, base))


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file {path} not found")
    return parse_config(path.read_text(encoding="utf-8"), path.parent)


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(str(x) for x in v)
    return str(v)


def dump_config(cfg: RunConfig) -> str:
    out = ["[run]"]
    for name in ("manifest", "pipeline", "output", "seed", "threads", "features"):
        out.append(f"{name} = {_fmt(getattr(cfg, name))}")
    out += ["", "[features]", f"families = {_fmt(cfg.families)}"]
    for section in ("selection", "solver", "src", "ensemble"):
        obj = getattr(cfg, section)
        out += ["", f"[{section}]"]
        out += [f"{f.name} = {_fmt(getattr(obj, f.name))}" for f in fields(obj)]
    return "\n".join(out) + "\n"


def write_config(directory, cfg: RunConfig) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    p = d / "config.ini"
    p.write_text(dump_config(cfg), encoding="utf-8")
    return p


__all__ = ["PIPELINES", "METHODS", "RunConfig", "SelectionConfig", "SrcConfig", "EnsembleConfig",
           "parse_config", "load_config", "dump_config", "write_config"]

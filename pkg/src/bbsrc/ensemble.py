"""Block-based ensembles of sparse classifiers.

Each image is cut into non-overlapping blocks; block ``j`` of every
training image forms dictionary ``D^j``. A test image is coded block by
block and the per-block evidence is fused by majority vote (BBMAP) or by an
averaged log-likelihood score over residuals (BBLL-R) or class coefficient
masses (BBLL-S), thresholded at a calibrated tau*.
"""
from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import expit

from . import sparse
from .errors import DataError, SolverError, ValidationError
from .imgio import as_array, block_slices
from .sparse import SolverConfig
from .srcclf import Representation, class_order, represent

DECISIONS = ("bbmap", "bbll-r", "bbll-s")
LOG_FLOOR = 1e-12
TAU_GRID = 1001
MODEL_FORMAT = "bbsrc-block-ensemble"


@dataclass(frozen=True)
class PdsParams:
    slope: float
    center: float
    pds_min: float
    lls_min: float


@dataclass(frozen=True)
class BlockEnsembleModel:
    block_width: int
    block_height: int
    image_shape: tuple
    dictionaries: tuple          # one sparse.Dictionary per block, grid order
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(method="bpdn"))
    decision: str = "bbll-s"
    literal_sign: bool = False
    tau: float = 0.0
    pds: PdsParams | None = None
    sample_names: tuple = ()
    grams: tuple = field(default=(), repr=False)
    flags: frozenset = frozenset()

    def __post_init__(self):
        if self.decision not in DECISIONS:
            raise ValidationError(f"unknown decision {self.decision!r}; choose from {DECISIONS}")
        if not self.dictionaries:
            raise ValidationError("a block ensemble needs at least one block")
        if not self.grams:
            object.__setattr__(self, "grams", tuple(D.gram() for D in self.dictionaries))
        if not self.flags and _cross_class_duplicates(self.dictionaries, self.grams):
            object.__setattr__(self, "flags", frozenset({"cross_class_duplicates"}))

    @property
    def nb(self) -> int:
        return len(self.dictionaries)

    @property
    def classes(self) -> tuple:
        return self.dictionaries[0].classes

    @property
    def column_class(self) -> np.ndarray:
        return self.dictionaries[0].column_class

    @property
    def s(self) -> int:
        return self.dictionaries[0].s


def _cross_class_duplicates(dicts, grams) -> bool:
    # identical atoms in different classes in every block make the class
    # evidence for such a sample arbitrary
    cc = dicts[0].column_class
    other = cc[:, None] != cc[None, :]
    hit = np.ones_like(other)
    for G in grams:
        hit &= G >= 1.0 - 1e-12
    return bool(np.any(hit & other))


# ---------------------------------------------------------------- training

def train_block_ensemble(images, labels, classes, block_width: int, block_height: int | None = None,
                         solver: SolverConfig | None = None, sample_names=None,
                         decision: str = "bbll-s", literal_sign: bool = False) -> BlockEnsembleModel:
    """Build one normalized dictionary per block; columns ordered class by class."""
    block_height = block_width if block_height is None else block_height
    arrs = [as_array(im) for im in images]
    if not arrs:
        raise ValidationError("no training images")
    shape = arrs[0].shape
    if any(a.shape != shape for a in arrs):
        raise ValidationError("training images differ in size")
    labels = np.asarray(labels, dtype=int)
    classes = tuple(classes)
    if labels.size != len(arrs):
        raise ValidationError("one label per training image required")
    missing = [c for i, c in enumerate(classes) if not np.any(labels == i)]
    if missing:
        raise ValidationError(f"classes without training images: {missing}")
    names = list(sample_names) if sample_names is not None else [f"image {i}" for i in range(len(arrs))]
    order = class_order(labels)
    slices = block_slices(shape, block_width, block_height)
    dicts = []
    for j, (rs, cs) in enumerate(slices):
        raw = np.stack([arrs[i][rs, cs].reshape(-1) for i in order], axis=1)
        try:
            dicts.append(sparse.normalize_columns(raw, labels[order], classes,
                                                  [names[i] for i in order]))
        except DataError as exc:
            raise DataError(f"block {j}: {exc}") from None
    return BlockEnsembleModel(block_width, block_height, shape, tuple(dicts),
                              solver or SolverConfig(method="bpdn"), decision,
                              literal_sign, sample_names=tuple(names[i] for i in order))


# ------------------------------------------------------------- block codes

@dataclass(frozen=True)
class BlockOutcome:
    index: int
    rep: Representation | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.rep is not None


def block_solve(model: BlockEnsembleModel, img, columns=None) -> list[BlockOutcome]:
    """Code every block of ``img``; ``columns`` restricts the atoms used.

    A block whose code cannot be computed (for instance an all-zero test
    block) is recorded with its error and left out of the fusion.
    """
    a = as_array(img)
    if a.shape != tuple(model.image_shape):
        raise ValidationError(f"image is {a.shape}, model expects {tuple(model.image_shape)}")
    out = []
    slices = block_slices(a.shape, model.block_width, model.block_height)
    for j, ((rs, cs), D, G) in enumerate(zip(slices, model.dictionaries, model.grams)):
        try:
            rep = represent(D, a[rs, cs].reshape(-1), model.solver, G, columns)
            out.append(BlockOutcome(j, rep))
        except (DataError, SolverError) as exc:
            out.append(BlockOutcome(j, None, str(exc)))
    failed = [o.index for o in out if not o.ok]
    if failed:
        warnings.warn(f"{len(failed)} of {len(out)} blocks excluded from fusion: {failed[:10]}",
                      RuntimeWarning, stacklevel=2)
    return out


def _usable(outcomes):
    ok = [o for o in outcomes if o.ok]
    if not ok:
        raise SolverError("every block failed; nothing to fuse")
    return ok


# ------------------------------------------------------------------ fusion

@dataclass(frozen=True)
class BbmapResult:
    label_index: int
    posterior: np.ndarray    # vote fractions per class
    tie: bool


def bbmap_fuse(outcomes, k: int) -> BbmapResult:
    ok = _usable(outcomes)
    votes = np.bincount([o.rep.label_index for o in ok], minlength=k)
    pr = votes / len(ok)
    best = int(np.argmax(votes))
    tie = bool(np.sum(votes == votes[best]) > 1)
    return BbmapResult(best, pr, tie)


@dataclass(frozen=True)
class LlsScore:
    value: float
    terms: np.ndarray        # per-block log ratios, in block order


def lls_residual_fuse(outcomes, m: int = 0, n: int = 1) -> LlsScore:
    """(1/NB) sum_j log(r_n / r_m); positive favours class m."""
    ok = _usable(outcomes)
    t = np.array([np.log(max(o.rep.residuals[n], LOG_FLOOR)) - np.log(max(o.rep.residuals[m], LOG_FLOOR))
                  for o in ok])
    return LlsScore(float(t.mean()), t)


def lls_sparsity_fuse(outcomes, m: int = 0, n: int = 1, literal_sign: bool = False) -> LlsScore:
    """(1/NB) sum_j log(|delta_m|_1 / |delta_n|_1); positive favours class m.

    ``literal_sign`` flips the orientation to the literal textual form.
    """
    ok = _usable(outcomes)
    t = np.array([np.log(max(o.rep.masses[m], LOG_FLOOR)) - np.log(max(o.rep.masses[n], LOG_FLOOR))
                  for o in ok])
    if literal_sign:
        t = -t
    return LlsScore(float(t.mean()), t)


def classify_bbmap(model: BlockEnsembleModel, img) -> BbmapResult:
    return bbmap_fuse(block_solve(model, img), len(model.classes))


def lls_residual(model: BlockEnsembleModel, img) -> LlsScore:
    return lls_residual_fuse(block_solve(model, img))


def lls_sparsity(model: BlockEnsembleModel, img) -> LlsScore:
    return lls_sparsity_fuse(block_solve(model, img), literal_sign=model.literal_sign)


def classify_bbll(score, tau: float) -> int:
    """0 (class m) when score >= tau, else 1 (class n)."""
    value = score.value if isinstance(score, LlsScore) else float(score)
    return 0 if value >= tau else 1


@dataclass(frozen=True)
class EnsembleDecision:
    label_index: int
    label: object
    score: float             # vote fraction for BBMAP, LLS for BBLL
    probability: float | None
    flags: tuple


def fused_scores(outcomes, k: int, literal_sign: bool = False) -> dict:
    """All three fusions from one set of block codes."""
    out = {"bbmap": bbmap_fuse(outcomes, k)}
    if k == 2:
        out["bbll-r"] = lls_residual_fuse(outcomes)
        out["bbll-s"] = lls_sparsity_fuse(outcomes, literal_sign=literal_sign)
    return out


def decide(model: BlockEnsembleModel, fused: dict, decision: str | None = None,
           tau: float | None = None) -> EnsembleDecision:
    decision = decision or model.decision
    tau = model.tau if tau is None else tau
    flags = tuple(sorted(model.flags))
    if decision == "bbmap":
        r = fused["bbmap"]
        flags += ("tie",) if r.tie else ()
        return EnsembleDecision(r.label_index, model.classes[r.label_index],
                                float(r.posterior[0]), None, flags)
    if decision not in fused:
        raise ValidationError("BBLL fusion is defined for two classes only")
    s = fused[decision].value
    idx = classify_bbll(s, tau)
    prob = pds(s, model.pds) if model.pds is not None else None
    return EnsembleDecision(idx, model.classes[idx], s, prob, flags)


def classify(model: BlockEnsembleModel, img, decision: str | None = None) -> EnsembleDecision:
    outcomes = block_solve(model, img)
    return decide(model, fused_scores(outcomes, len(model.classes), model.literal_sign), decision)


# ------------------------------------------------------------- calibration

@dataclass(frozen=True)
class TauCalibration:
    tau: float
    grid: np.ndarray
    tpr: np.ndarray
    tnr: np.ndarray
    flags: tuple


def tpr_tnr(scores, is_m, taus):
    """Rates of the rule 'class m iff score >= tau' at each tau."""
    scores = np.asarray(scores, dtype=np.float64)
    is_m = np.asarray(is_m, dtype=bool)
    pos, neg = np.sort(scores[is_m]), np.sort(scores[~is_m])
    taus = np.asarray(taus, dtype=np.float64)
    tpr = 1.0 - np.searchsorted(pos, taus, side="left") / pos.size
    tnr = np.searchsorted(neg, taus, side="left") / neg.size
    return tpr, tnr


def calibrate_tau(scores, is_m, points: int = TAU_GRID) -> TauCalibration:
    """tau* where the TPR and TNR curves cross.

    The sweep covers [min - d, max + d] with d = 1% of the score range.
    The crossing is linearly interpolated between the adjacent grid points
    where TPR - TNR changes sign. When TPR - TNR is exactly zero at several
    grid points, the one nearest 0 is taken and flagged. Perfectly separated
    classes give the midpoint of the gap, flagged ``separable``.
    """
    scores = np.asarray(scores, dtype=np.float64)
    is_m = np.asarray(is_m, dtype=bool)
    if is_m.all() or not is_m.any():
        raise ValidationError("tau calibration needs scores from both classes")
    if not np.all(np.isfinite(scores)):
        raise DataError("non-finite calibration scores")
    lo, hi = scores.min(), scores.max()
    pad = 0.01 * (hi - lo) if hi > lo else 0.01 * max(abs(lo), 1.0)
    grid = np.linspace(lo - pad, hi + pad, points)
    tpr, tnr = tpr_tnr(scores, is_m, grid)
    gap_lo, gap_hi = scores[~is_m].max(), scores[is_m].min()
    if gap_hi > gap_lo:
        return TauCalibration(0.5 * (gap_lo + gap_hi), grid, tpr, tnr, ("separable",))
    # sign of TPR - TNR from integer counts, so equal rates compare exactly
    n_pos, n_neg = int(is_m.sum()), int((~is_m).sum())
    d = np.rint(tpr * n_pos) * n_neg - np.rint(tnr * n_neg) * n_pos
    zeros = np.flatnonzero(d == 0.0)
    if zeros.size:
        pick = zeros[np.argmin(np.abs(grid[zeros]))]
        flags = ("multiple_crossings",) if zeros.size > 1 else ()
        return TauCalibration(float(grid[pick]), grid, tpr, tnr, flags)
    # d is non-increasing in tau, so there is exactly one sign change
    i = int(np.flatnonzero((d[:-1] > 0) & (d[1:] < 0))[0])
    t = grid[i] + (grid[i + 1] - grid[i]) * d[i] / (d[i] - d[i + 1])
    return TauCalibration(float(t), grid, tpr, tnr, ())


def fit_pds(tau: float, lls_min: float, pds_min: float = 0.05) -> PdsParams:
    """Sigmoid centred at tau* that equals ``pds_min`` at the lowest calibration score."""
    if not 0.0 < pds_min < 0.5:
        raise ValidationError("pds_min must lie in (0, 0.5)")
    if not lls_min < tau:
        raise ValidationError(
            f"PDS calibration impossible: lowest score {lls_min} is not below tau* {tau}")
    slope = np.log((1.0 - pds_min) / pds_min) / (tau - lls_min)
    return PdsParams(float(slope), float(tau), float(pds_min), float(lls_min))


def pds(score, params: PdsParams):
    """Probability decision score 1 / (1 + exp(-m (score - c)))."""
    v = expit(params.slope * (np.asarray(score, dtype=np.float64) - params.center))
    return float(v) if np.ndim(v) == 0 else v


def training_fused(model: BlockEnsembleModel, images_in_order, exclude=()) -> tuple[list, list]:
    """Leave-one-out fusions of the training images themselves.

    ``images_in_order`` follows the dictionary column order. Image ``c`` is
    coded with its own column (and every column in ``exclude``) removed, so
    no sample is ever coded with itself. Returns the scored column indices
    and one :func:`fused_scores` dict per scored image.
    """
    s = model.s
    banned = set(int(e) for e in exclude)
    kept, out = [], []
    for c in range(s):
        if c in banned:
            continue
        cols = [j for j in range(s) if j != c and j not in banned]
        kept.append(c)
        out.append(fused_scores(block_solve(model, images_in_order[c], cols), len(model.classes),
                                model.literal_sign))
    return kept, out


def training_scores(model: BlockEnsembleModel, images_in_order, decision: str,
                    exclude=()) -> np.ndarray:
    """LLS scores of :func:`training_fused` for one BBLL decision."""
    if decision == "bbmap":
        raise ValidationError("tau calibration applies to the BBLL decisions")
    _, fused = training_fused(model, images_in_order, exclude)
    return np.array([f[decision].value for f in fused])


def calibrate(model: BlockEnsembleModel, images_in_order, pds_min: float = 0.05,
              decision: str | None = None) -> tuple[BlockEnsembleModel, TauCalibration]:
    decision = decision or model.decision
    scores = training_scores(model, images_in_order, decision)
    is_m = model.column_class == 0
    cal = calibrate_tau(scores, is_m)
    params = fit_pds(cal.tau, float(scores.min()), pds_min)
    return replace(model, tau=cal.tau, pds=params, decision=decision), cal


# ------------------------------------------------------------- persistence
# Directory layout:
#   model.txt             "key = json" lines (see save_model)
#   blocks/block_NNNN.bin  uint64 LE rows, uint64 LE cols, then rows*cols
#                          float64 LE values in row-major order

def write_matrix(path, M) -> None:
    M = np.ascontiguousarray(M, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<QQ", *M.shape))
        fh.write(M.tobytes(order="C"))


def read_matrix(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 16:
        raise DataError(f"{path}: truncated matrix header")
    rows, cols = struct.unpack("<QQ", data[:16])
    body = data[16:]
    if len(body) != rows * cols * 8:
        raise DataError(f"{path}: expected {rows}x{cols} doubles, found {len(body)} bytes")
    return np.frombuffer(body, dtype="<f8").reshape(rows, cols).astype(np.float64)


def save_model(directory, model: BlockEnsembleModel) -> None:
    d = Path(directory)
    (d / "blocks").mkdir(parents=True, exist_ok=True)
    meta = {
        "format": MODEL_FORMAT,
        "block_width": model.block_width,
        "block_height": model.block_height,
        "image_shape": list(model.image_shape),
        "classes": list(model.classes),
        "column_class": model.column_class.tolist(),
        "sample_names": list(model.sample_names),
        "solver": {"method": model.solver.method, "epsilon": model.solver.epsilon,
                   "epsilon_rel": model.solver.epsilon_rel,
                   "max_iterations": model.solver.max_iterations, "tol": model.solver.tol},
        "decision": model.decision,
        "literal_sign": model.literal_sign,
        "tau": model.tau,
        "pds": None if model.pds is None else [model.pds.slope, model.pds.center,
                                               model.pds.pds_min, model.pds.lls_min],
        "blocks": model.nb,
    }
    (d / "model.txt").write_text("".join(f"{k} = {json.dumps(v)}\n" for k, v in meta.items()),
                                 encoding="utf-8")
    for j, D in enumerate(model.dictionaries):
        write_matrix(d / "blocks" / f"block_{j:04d}.bin", D.atoms)
        write_matrix(d / "blocks" / f"norms_{j:04d}.bin", D.norms[None, :])


def load_model(directory) -> BlockEnsembleModel:
    d = Path(directory)
    meta_path = d / "model.txt"
    if not meta_path.is_file():
        raise DataError(f"{d}: no model.txt")
    meta = {}
    for n, line in enumerate(meta_path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise DataError(f"{meta_path}:{n}: expected 'key = value'")
        meta[key.strip()] = json.loads(val)
    if meta.get("format") != MODEL_FORMAT:
        raise DataError(f"{d}: not a block ensemble model")
    classes = tuple(meta["classes"])
    cc = np.array(meta["column_class"], dtype=int)
    dicts = []
    for j in range(int(meta["blocks"])):
        atoms = read_matrix(d / "blocks" / f"block_{j:04d}.bin")
        norms = read_matrix(d / "blocks" / f"norms_{j:04d}.bin")[0]
        if atoms.shape[1] != cc.size:
            raise DataError(f"block {j}: {atoms.shape[1]} columns, expected {cc.size}")
        dicts.append(sparse.Dictionary(atoms, cc, classes, norms))
    sv = meta["solver"]
    solver = SolverConfig(method=sv["method"], epsilon=sv["epsilon"], epsilon_rel=sv["epsilon_rel"],
                          max_iterations=sv["max_iterations"], tol=sv["tol"])
    p = meta["pds"]
    return BlockEnsembleModel(int(meta["block_width"]), int(meta["block_height"]),
                              tuple(meta["image_shape"]), tuple(dicts), solver, meta["decision"],
                              bool(meta["literal_sign"]), float(meta["tau"]),
                              None if p is None else PdsParams(*p), tuple(meta["sample_names"]))

"""Metrics and experiment harness: oracle selection, MAE, strategy
ablations, fusion baselines, collapse recovery and report files."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .camera import CameraIntrinsics
from .combiner import fuse, select_and_combine
from .confidence import confidence_from_variance
from .depthsolver import (
    FAMILIES,
    N_ESTIMATES,
    SOURCE_INDEX,
    DepthEstimate,
    depths_from_params,
    make_estimates,
    propagate_sigmas,
    solve_batch,
)
from .simulate import CollapseSpec, NoiseModel, SceneObject, assign_sigmas, inject_collapse, sources_touched

FUSION_MODES = ("hard", "mean", "weighted", "min", "iterative", "oracle")
RECOVERY_QUANTILE = 0.95

MODE_NOTES = {
    "hard": "value of the minimum-variance estimate",
    "mean": "unweighted average of all candidates",
    "weighted": "inverse-variance fusion of all candidates, no selection",
    "min": "weighted value; variance replaced by the smallest member variance (interpretation)",
    "iterative": "robust 3-sigma selection then inverse-variance fusion",
    "oracle": "candidate closest to ground truth (upper bound, uses ground truth)",
}


class EmptyCandidateSetError(ValueError):
    pass


@dataclass(frozen=True)
class StrategySubset:
    families: frozenset

    def __post_init__(self):
        fams = frozenset(self.families)
        if not fams:
            raise ValueError("strategy subset must not be empty")
        unknown = fams - set(FAMILIES)
        if unknown:
            raise ValueError(f"unknown strategy families {sorted(unknown)}; expected subset of E, H, K")
        object.__setattr__(self, "families", fams)

    @classmethod
    def parse(cls, text: str) -> "StrategySubset":
        """Parse "EHK", "E+H" or "E,H,K" style labels."""
        letters = [c for c in text.upper() if c not in "+, "]
        return cls(frozenset(letters))

    @property
    def label(self) -> str:
        return "+".join(f for f in "EHK" if f in self.families)

    @property
    def sources(self) -> frozenset:
        return frozenset(s for f in self.families for s in FAMILIES[f])

    def filter(self, estimates: list[DepthEstimate]) -> list[DepthEstimate]:
        src = self.sources
        return [e for e in estimates if e.source in src]


def oracle_select(estimates: list[DepthEstimate], z_true: float) -> DepthEstimate:
    cands = [e for e in estimates if e.valid]
    if not cands:
        raise EmptyCandidateSetError("oracle selection needs at least one valid estimate")
    return min(cands, key=lambda e: (abs(e.value - z_true), SOURCE_INDEX.get(e.source, len(SOURCE_INDEX))))


def mae(values, truths) -> float:
    v = np.asarray(values, dtype=float)
    t = np.asarray(truths, dtype=float)
    if v.shape != t.shape:
        raise ValueError(f"length mismatch: {v.shape} vs {t.shape}")
    if v.size == 0:
        raise ValueError("mae of an empty list")
    return float(np.mean(np.abs(v - t)))


@dataclass(frozen=True)
class Combined:
    depth: float
    variance: float
    n_candidates: int
    n_selected: int
    iterations: int  # 0 for single-pass modes
    selected: tuple[str, ...] = ()


def combine(estimates: list[DepthEstimate], mode: str, z_true: float | None = None) -> Combined:
    """Fuse valid estimates with one of the ``FUSION_MODES``."""
    valid = sorted((e for e in estimates if e.valid), key=lambda e: SOURCE_INDEX.get(e.source, 99))
    if not valid:
        raise EmptyCandidateSetError("no valid estimate to combine")
    n = len(valid)
    z = np.array([e.value for e in valid])
    var = np.array([e.sigma for e in valid]) ** 2
    all_src = tuple(e.source for e in valid)
    if mode == "hard":
        i = int(np.argmin(var))
        return Combined(float(z[i]), float(var[i]), n, 1, 0, (valid[i].source,))
    if mode == "mean":
        return Combined(float(z.mean()), float(var.sum() / n**2), n, n, 0, all_src)
    if mode == "weighted":
        mu, v = fuse(z, var)
        return Combined(mu, v, n, n, 0, all_src)
    if mode == "min":
        mu, _ = fuse(z, var)
        return Combined(mu, float(var.min()), n, n, 0, all_src)
    if mode == "iterative":
        r = select_and_combine(valid)
        return Combined(r.combined_depth, r.combined_variance, n, len(r.selected), r.iterations, r.selected)
    if mode == "oracle":
        if z_true is None:
            raise ValueError("oracle mode needs the true depth")
        e = oracle_select(valid, z_true)
        return Combined(e.value, e.sigma**2, n, 1, 0, (e.source,))
    raise ValueError(f"unknown fusion mode {mode!r}; expected one of {FUSION_MODES}")


def scene_estimates(
    scene: list[SceneObject],
    k: CameraIntrinsics,
    noise: NoiseModel | None = None,
    calibration: dict | None = None,
) -> list[list[DepthEstimate]]:
    """Solve every object; sigmas follow ``noise``'s policy when given,
    otherwise the observation's own reported sigmas are propagated."""
    if noise is None or noise.sigma_mode != "propagated":
        out = solve_batch([s.obs for s in scene], k)
        if noise is not None:
            out = [assign_sigmas(s.obs, est, noise, k, calibration) for s, est in zip(scene, out)]
        return out
    if not scene:
        return []
    q = np.array([s.obs.to_params() for s in scene])
    prop = propagate_sigmas(q, np.array([s.obs.param_stds() for s in scene]), k)
    values = depths_from_params(q, k)
    return [
        assign_sigmas(s.obs, make_estimates(values[i], np.ones(N_ESTIMATES)), noise, k, calibration, prop[i])
        for i, s in enumerate(scene)
    ]


EVAL_COLUMNS = (
    "subset",
    "fusion_mode",
    "n_objects",
    "mae_combined",
    "mae_oracle",
    "rejection_rate",
    "mean_iterations",
    "collapse_recovery_rate",
    "mean_confidence",
)


@dataclass(frozen=True)
class EvalRow:
    subset: str
    fusion_mode: str
    n_objects: int
    mae_combined: float
    mae_oracle: float
    rejection_rate: float
    mean_iterations: float
    collapse_recovery_rate: float
    mean_confidence: float

    def values(self) -> tuple:
        return tuple(getattr(self, c) for c in EVAL_COLUMNS)


@dataclass
class EvalReport:
    """Rows plus the effective config and free-text notes.

    ``rows`` are :class:`EvalRow` by default; other experiments reuse the
    container with their own ``columns`` and plain tuples as rows.
    """

    rows: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    columns: tuple[str, ...] = EVAL_COLUMNS

    def row_values(self):
        for r in self.rows:
            yield r.values() if hasattr(r, "values") else tuple(r)

    def row(self, subset: str, mode: str) -> EvalRow:
        for r in self.rows:
            if r.subset == subset and r.fusion_mode == mode:
                return r
        raise KeyError((subset, mode))


def _errors(est_lists, truths, subset: StrategySubset, mode: str):
    errs, iters, rej, conf, used = [], [], [], [], []
    for i, (est, zt) in enumerate(zip(est_lists, truths)):
        cand = subset.filter(est)
        if not any(e.valid for e in cand):
            continue
        c = combine(cand, mode, zt)
        errs.append(abs(c.depth - zt))
        iters.append(c.iterations)
        rej.append(1.0 - c.n_selected / c.n_candidates)
        conf.append(confidence_from_variance(c.variance))
        used.append(i)
    return np.array(errs), np.array(iters), np.array(rej), np.array(conf), used


def run_ablation(
    scene: list[SceneObject],
    k: CameraIntrinsics,
    subsets: list[StrategySubset],
    fusion_modes=FUSION_MODES,
    noise: NoiseModel | None = None,
    calibration: dict | None = None,
    reference: list[SceneObject] | None = None,
) -> EvalReport:
    """Score every (subset x fusion mode) cell on one scene.

    ``reference`` is the same scene before collapse injection; when given,
    each cell's recovery rate is the share of corrupted objects whose error
    stays below the reference run's error quantile. Without corrupted
    objects the rate is 1 by convention.
    """
    if not scene:
        raise ValueError("scene is empty")
    truths = [s.box.z for s in scene]
    est = scene_estimates(scene, k, noise, calibration)
    ref_est = scene_estimates(reference, k, noise, calibration) if reference is not None else None
    corrupted = {i for i, s in enumerate(scene) if s.corrupted}

    report = EvalReport(notes=[f"{m}: {MODE_NOTES[m]}" for m in fusion_modes])
    for subset in subsets:
        oracle_err, _, _, _, _ = _errors(est, truths, subset, "oracle")
        mae_oracle = float(oracle_err.mean()) if oracle_err.size else math.nan
        for mode in fusion_modes:
            if mode not in FUSION_MODES:
                raise ValueError(f"unknown fusion mode {mode!r}")
            err, iters, rej, conf, used = _errors(est, truths, subset, mode)
            recovery = 1.0
            if ref_est is not None and corrupted:
                ref_err, *_ = _errors(ref_est, truths, subset, mode)
                thresh = float(np.quantile(ref_err, RECOVERY_QUANTILE))
                hit = [e < thresh for e, i in zip(err, used) if i in corrupted]
                recovery = float(np.mean(hit)) if hit else 1.0
            report.rows.append(
                EvalRow(
                    subset=subset.label,
                    fusion_mode=mode,
                    n_objects=len(used),
                    mae_combined=float(err.mean()) if err.size else math.nan,
                    mae_oracle=mae_oracle,
                    rejection_rate=float(rej.mean()) if rej.size else math.nan,
                    mean_iterations=float(iters.mean()) if iters.size else math.nan,
                    collapse_recovery_rate=recovery,
                    mean_confidence=float(conf.mean()) if conf.size else math.nan,
                )
            )
    return report


@dataclass(frozen=True)
class CollapseStats:
    n_objects: int
    n_affected: int
    recovery_rate: float
    rejection_accuracy: float
    false_rejection_rate: float
    mae_affected_clean: float
    mae_affected_corrupted: float
    recovery_threshold: float

    def to_dict(self) -> dict:
        return asdict(self)


def collapse_recovery(
    scene: list[SceneObject],
    spec: CollapseSpec,
    seed: int,
    k: CameraIntrinsics,
    noise: NoiseModel | None = None,
    calibration: dict | None = None,
) -> tuple[CollapseStats, list[SceneObject]]:
    """Inject ``spec`` into ``scene`` and measure how Iterative fusion copes.

    recovery_rate: share of affected objects whose combined-depth error is
    below the clean run's 95th error percentile. rejection_accuracy: share
    of affected objects on which every valid estimate driven by the
    corrupted quantity is rejected. false_rejection_rate: among untouched
    estimates of affected objects that the clean run selected, the share
    the corrupted run rejects.
    """
    bad_scene = inject_collapse(scene, spec, seed, k)
    truths = np.array([s.box.z for s in scene])
    clean = scene_estimates(scene, k, noise, calibration)
    bad = scene_estimates(bad_scene, k, noise, calibration)
    clean_r = [select_and_combine(e) for e in clean]
    clean_err = np.array([abs(r.combined_depth - z) for r, z in zip(clean_r, truths)])
    thresh = float(np.quantile(clean_err, RECOVERY_QUANTILE))

    affected = [i for i, s in enumerate(bad_scene) if s.corrupted]
    if not affected:
        stats = CollapseStats(len(scene), 0, 1.0, 1.0, 0.0, math.nan, math.nan, thresh)
        return stats, bad_scene

    touched = set(sources_touched(spec))
    rec, acc, false_rej, kept = [], [], 0, 0
    bad_err = []
    for i in affected:
        r = select_and_combine(bad[i])
        e = abs(r.combined_depth - truths[i])
        bad_err.append(e)
        rec.append(e < thresh)
        hit = [s for s in bad[i] if s.valid and s.source in touched]
        acc.append(all(s.source in r.rejected for s in hit))
        for src in clean_r[i].selected:
            if src not in touched:
                kept += 1
                false_rej += src in r.rejected
    stats = CollapseStats(
        n_objects=len(scene),
        n_affected=len(affected),
        recovery_rate=float(np.mean(rec)),
        rejection_accuracy=float(np.mean(acc)),
        false_rejection_rate=false_rej / kept if kept else 0.0,
        mae_affected_clean=float(clean_err[affected].mean()),
        mae_affected_corrupted=float(np.mean(bad_err)),
        recovery_threshold=thresh,
    )
    return stats, bad_scene


# --- report files -----------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def report_to_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(report.config, sort_keys=True) + "\n")
    for note in report.notes:
        buf.write(f"# note: {note}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(report.columns)
    for vals in report.row_values():
        w.writerow([_fmt(v) for v in vals])
    return buf.getvalue()


def report_to_json(report: EvalReport) -> str:
    doc = {
        "config": report.config,
        "notes": report.notes,
        "columns": list(report.columns),
        "rows": [
            dict(zip(report.columns, (v.item() if isinstance(v, np.generic) else v for v in vals)))
            for vals in report.row_values()
        ],
    }
    return json.dumps(doc, indent=1, sort_keys=True, allow_nan=True) + "\n"


def emit_report(report: EvalReport, path, fmt: str = "csv") -> Path:
    """Write the report as CSV (one commented config line, notes, header,
    rows) or as a JSON mirror of the same rows."""
    if fmt == "csv":
        text = report_to_csv(report)
    elif fmt == "json":
        text = report_to_json(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc
    return path


def grid_argmin(fn, lo: float, hi: float, points: int = 401, rounds: int = 4, vectorized: bool = False) -> float:
    """Minimize a 1-D function by repeated log-spaced grid refinement.

    Each round keeps the two grid cells either side of the best point.
    With ``vectorized`` the whole grid is passed to ``fn`` in one call.
    """
    for _ in range(rounds):
        grid = np.geomspace(lo, hi, points)
        vals = np.asarray(fn(grid)) if vectorized else np.array([fn(x) for x in grid])
        i = int(np.argmin(vals))
        lo, hi = grid[max(i - 2, 0)], grid[min(i + 2, points - 1)]
    return float(grid[i])

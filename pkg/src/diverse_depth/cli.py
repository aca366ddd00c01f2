"""Command-line driver.

    diverse-depth simulate        --config cfg.json [--out PATH] [--seed N] [--format csv|json]
    diverse-depth ablate          ...
    diverse-depth collapse        ...
    diverse-depth kitti-roundtrip ...
    diverse-depth losses-check    ...

Every report starts with the full effective config (seeds resolved) so a
result can be reproduced from the report alone. When ``--out`` is omitted
the report goes to ``$DIVERSE_DEPTH_OUTDIR/<command>.<format>`` (current
directory when the variable is unset).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .combiner import select_and_combine
from .confidence import (
    box_uncertainty_loss,
    conditional_3d_confidence,
    confidence_from_variance,
    detection_confidence,
    uncertainty_loss,
)
from .evaluate import (
    FUSION_MODES,
    EvalReport,
    StrategySubset,
    collapse_recovery,
    emit_report,
    grid_argmin,
    run_ablation,
    scene_estimates,
)
from .kitti import ROUNDTRIP_COLUMNS, read_calib, read_labels, roundtrip_eval
from .simulate import (
    CollapseSpec,
    NoiseModel,
    SceneConfig,
    calibrate,
    generate_scene,
    load_scene,
    perturb_scene,
)

COMMANDS = ("simulate", "ablate", "collapse", "kitti-roundtrip", "losses-check")
OUTDIR_ENV = "DIVERSE_DEPTH_OUTDIR"

DEFAULT_SUBSETS = ("E", "E+H", "E+H+K")


class ConfigError(Exception):
    pass


def load_config(path: Path) -> dict:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top-level JSON value must be an object")
    return cfg


def _resolve(cfg: dict, seed: int | None, base: Path) -> dict:
    """Fill defaults and apply the seed override; returns the effective config."""
    eff = dict(cfg)
    if seed is not None:
        eff["seed"] = seed
    eff.setdefault("seed", 0)
    scene = SceneConfig.from_dict({**eff.get("scene", {}), "seed": eff["seed"]})
    eff["scene"] = scene.to_dict()
    eff["noise"] = NoiseModel.from_dict(eff.get("noise", {})).to_dict()
    eff.setdefault("subsets", list(DEFAULT_SUBSETS))
    eff.setdefault("fusion_modes", list(FUSION_MODES))
    eff.setdefault("calibration_objects", 1000)
    if "scene_file" in eff:
        eff["scene_file"] = str((base / eff["scene_file"]).resolve())
    return eff


def _scene(eff: dict):
    if "scene_file" in eff:
        return load_scene(eff["scene_file"])
    cfg = SceneConfig.from_dict(eff["scene"])
    noise = NoiseModel.from_dict(eff["noise"])
    return perturb_scene(generate_scene(cfg), noise, cfg.seed), cfg.intrinsics


def _sigma_policy(eff: dict):
    noise = NoiseModel.from_dict(eff["noise"])
    calibration = None
    if noise.sigma_mode == "calibrated":
        calibration = calibrate(SceneConfig.from_dict(eff["scene"]), noise, eff["calibration_objects"])
    return noise, calibration


def _subsets(eff: dict) -> list[StrategySubset]:
    return [StrategySubset.parse(s) for s in eff["subsets"]]


def cmd_simulate(eff: dict) -> tuple[EvalReport, str]:
    scene, k = _scene(eff)
    noise, calibration = _sigma_policy(eff)
    est = scene_estimates(scene, k, noise, calibration)
    cols = ("index", "z_true", "z_combined", "abs_error", "combined_sigma", "n_valid", "n_selected", "iterations", "d_c_from_fused_variance", "p_2d")
    rows = []
    for i, (s, e) in enumerate(zip(scene, est)):
        r = select_and_combine(e)
        rows.append(
            (i, s.box.z, r.combined_depth, abs(r.combined_depth - s.box.z), math.sqrt(r.combined_variance),
             sum(x.valid for x in e), len(r.selected), r.iterations,
             confidence_from_variance(r.combined_variance), s.obs.p_2d)
        )
    mae = float(np.mean([r[3] for r in rows]))
    return EvalReport(rows=rows, columns=cols), f"simulate: {len(rows)} objects, MAE combined {mae:.4f} m"


def cmd_ablate(eff: dict) -> tuple[EvalReport, str]:
    scene, k = _scene(eff)
    noise, calibration = _sigma_policy(eff)
    rep = run_ablation(scene, k, _subsets(eff), eff["fusion_modes"], noise, calibration)
    best = min(rep.rows, key=lambda r: r.mae_combined if r.fusion_mode != "oracle" else math.inf)
    return rep, (
        f"ablate: {len(rep.rows)} rows, best non-oracle MAE {best.mae_combined:.4f} m "
        f"({best.subset}/{best.fusion_mode})"
    )


def cmd_collapse(eff: dict) -> tuple[EvalReport, str]:
    scene, k = _scene(eff)
    noise, calibration = _sigma_policy(eff)
    spec = CollapseSpec.from_dict(eff.get("collapse", {}))
    eff["collapse"] = spec.to_dict()
    stats, bad = collapse_recovery(scene, spec, eff["seed"], k, noise, calibration)
    rep = run_ablation(bad, k, _subsets(eff), eff["fusion_modes"], noise, calibration, reference=scene)
    rep.notes.append("collapse: " + json.dumps(stats.to_dict(), sort_keys=True))
    return rep, (
        f"collapse: {stats.n_affected}/{stats.n_objects} objects corrupted, rejection accuracy "
        f"{stats.rejection_accuracy:.3f}, MAE affected {stats.mae_affected_corrupted:.4f} m "
        f"(clean {stats.mae_affected_clean:.4f} m)"
    )


def _kitti_files(kcfg: dict, base: Path) -> list[tuple[Path, Path]]:
    pairs = []
    if "kitti_dir" in kcfg:
        root = base / kcfg["kitti_dir"]
        frames = kcfg.get("frames") or sorted(p.stem for p in (root / "label_2").glob("*.txt"))
        pairs += [(root / "label_2" / f"{f}.txt", root / "calib" / f"{f}.txt") for f in frames]
    for item in kcfg.get("pairs", []):
        pairs.append((base / item["label"], base / item["calib"]))
    if not pairs:
        raise ConfigError("kitti config needs 'kitti_dir' or a non-empty 'pairs' list")
    for lab, cal in pairs:
        for p in (lab, cal):
            if not p.is_file():
                raise ConfigError(f"{p}: no such file")
    return pairs


def cmd_kitti(eff: dict, base: Path) -> tuple[EvalReport, str]:
    pairs = _kitti_files(eff.get("kitti", {}), base)
    noise = NoiseModel.from_dict(eff["noise"])
    rows, skipped, worst = [], 0, 0.0
    for lab_path, cal_path in pairs:
        res = roundtrip_eval(read_labels(lab_path), read_calib(cal_path), noise)
        skipped += len(res.skipped)
        worst = max(worst, res.max_rel_error)
        for r in res.rows:
            rows.append(
                (lab_path.name, r.index, r.type, r.z_true, r.z_combined, r.abs_error, r.rel_error,
                 r.pnp_rel_error, r.n_valid, r.n_selected) + r.source_errors
            )
    rep = EvalReport(rows=rows, columns=("file",) + ROUNDTRIP_COLUMNS)
    rep.notes.append(f"skipped non-localizable labels: {skipped}")
    return rep, f"kitti-roundtrip: {len(rows)} objects, {skipped} skipped, max relative error {worst:.3e}"


def cmd_losses(eff: dict) -> tuple[EvalReport, str]:
    lc = eff.setdefault("losses", {})
    n = lc.setdefault("n_pairs", 1000)
    tol = lc.setdefault("tolerance", 1e-3)
    rng = np.random.default_rng([eff["seed"], 0x1055])
    errs = rng.uniform(0.05, 20.0, n)
    worst16, worst22 = 0.0, 0.0
    for e in errs:
        s16 = grid_argmin(lambda s: uncertainty_loss(e, 0.0, s), e / 100, e * 100, vectorized=True)
        worst16 = max(worst16, abs(s16 - e) / e)
        gt = np.zeros((8, 3))
        off = gt.copy()
        off[:, 0] = e / 8  # L1 per-vertex distance e/8, summed to e
        s22 = grid_argmin(lambda s: box_uncertainty_loss(off, gt, s), e / 100, e * 100, vectorized=True)
        worst22 = max(worst22, abs(s22 - e) / e)
    v = rng.uniform(0.0, 5.0, (n, 2)) + 1e-9
    p2 = rng.uniform(0.0, 1.0, n)
    p3 = np.array([conditional_3d_confidence(a, b) for a, b in v])
    pm = np.array([detection_confidence(a, b) for a, b in zip(p3, p2)])
    in_bounds = bool(np.all((p3 >= 0) & (p3 <= 1) & (pm >= 0) & (pm <= 1)))
    example = conditional_3d_confidence(0.1, 10.0)
    rows = [
        ("uncertainty_loss_minimizer", n, worst16, tol, worst16 <= tol),
        ("box_loss_minimizer", n, worst22, tol, worst22 <= tol),
        ("confidence_bounds", n, 0.0 if in_bounds else 1.0, 0.0, in_bounds),
        ("confidence_example", 1, abs(example - 0.8911), 1e-4, abs(example - 0.8911) <= 1e-4),
    ]
    ok = all(r[-1] for r in rows)
    rep = EvalReport(rows=rows, columns=("check", "n", "max_error", "tolerance", "passed"))
    return rep, f"losses-check: {sum(r[-1] for r in rows)}/{len(rows)} checks passed" + ("" if ok else " (FAILED)")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="diverse-depth", description="Diverse depth estimation experiments")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="JSON experiment config (defaults apply to missing keys)")
    p.add_argument("--out", type=Path, help=f"report path (default: ${OUTDIR_ENV}/<command>.<format>)")
    p.add_argument("--seed", type=int, help="override the config's master seed")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config is not None:
            cfg = load_config(args.config)
            base = args.config.resolve().parent
        else:
            cfg, base = {}, Path.cwd()
        out = args.out or Path(os.environ.get(OUTDIR_ENV, ".")) / f"{args.command}.{args.format}"
        if out.exists() and out.is_dir():
            raise ConfigError(f"{out}: output path is a directory")
        eff = _resolve(cfg, args.seed, base)
        eff["command"] = args.command

        if args.command == "simulate":
            report, summary = cmd_simulate(eff)
        elif args.command == "ablate":
            report, summary = cmd_ablate(eff)
        elif args.command == "collapse":
            report, summary = cmd_collapse(eff)
        elif args.command == "kitti-roundtrip":
            report, summary = cmd_kitti(eff, base)
        else:
            report, summary = cmd_losses(eff)
        report.config = eff
        emit_report(report, out, args.format)
    except (ConfigError, ValueError, TypeError, OSError) as exc:
        print(f"diverse-depth {args.command}: error: {exc}", file=sys.stderr)
        return 1
    print(f"{summary} -> {out}")
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

"""Regenerate tests/fixtures/regression.json from the shipped ablation config.

Run once on first build; the acceptance suite compares against the frozen
numbers, so only re-run after an intentional change to the simulator.
"""

import json
import sys
from pathlib import Path

from diverse_depth.evaluate import StrategySubset, run_ablation
from diverse_depth.simulate import NoiseModel, SceneConfig, generate_scene, perturb_scene

ROOT = Path(__file__).resolve().parents[1]


def oracle_maes(config_path: Path) -> dict:
    cfg = json.loads(config_path.read_text())
    scene_cfg = SceneConfig.from_dict({**cfg.get("scene", {}), "seed": cfg["seed"]})
    noise = NoiseModel.from_dict(cfg.get("noise", {}))
    scene = perturb_scene(generate_scene(scene_cfg), noise, scene_cfg.seed)
    subsets = [StrategySubset.parse(s) for s in cfg["subsets"]]
    rep = run_ablation(scene, scene_cfg.intrinsics, subsets, ("oracle",), noise)
    return {r.subset: r.mae_oracle for r in rep.rows}


def main() -> None:
    src = ROOT / "fixtures" / "ablate.json"
    out = ROOT / "tests" / "fixtures" / "regression.json"
    doc = {"config": str(src.relative_to(ROOT)), "oracle_mae": oracle_maes(src)}
    out.write_text(json.dumps(doc, indent=1) + "\n")
    json.dump(doc, sys.stdout, indent=1)
    print()


if __name__ == "__main__":
    main()

from dataclasses import replace

import numpy as np
import pytest

from diverse_depth.depthsolver import FAMILIES, SOURCES, solve_all
from diverse_depth.simulate import (
    CollapseSpec,
    NoiseModel,
    SceneConfig,
    assign_sigmas,
    calibrate,
    generate_scene,
    inject_collapse,
    load_scene,
    observe_box,
    perturb,
    perturb_scene,
    save_scene,
    sources_touched,
)

ZERO = NoiseModel(0, 0, 0, 0, 0, 0)


def test_scene_deterministic():
    cfg = SceneConfig(n_objects=30, seed=7)
    a, b = generate_scene(cfg), generate_scene(cfg)
    assert len(a) == 30 and a == b
    assert generate_scene(replace(cfg, seed=8)) != a
    for s in a:
        assert 5.0 <= s.box.z <= 60.0 and 0.3 <= s.obs.p_2d <= 1.0


def test_scene_config_validation_and_roundtrip():
    with pytest.raises(ValueError):
        SceneConfig(n_objects=0)
    with pytest.raises(ValueError):
        SceneConfig(depth_range=(10, 5))
    cfg = SceneConfig(n_objects=3, seed=11)
    assert SceneConfig.from_dict(cfg.to_dict()) == cfg


def test_zero_noise_is_identity():
    scene = generate_scene(SceneConfig(n_objects=10, seed=1))
    for s in scene:
        p = perturb(s.obs, ZERO, 5)
        np.testing.assert_array_equal(p.to_params(), s.obs.to_params())
        assert p.keypoints == s.obs.keypoints


def test_perturb_reproducible():
    s = generate_scene(SceneConfig(n_objects=5, seed=2))
    n = NoiseModel()
    assert perturb_scene(s, n, 4) == perturb_scene(s, n, 4)
    assert perturb_scene(s, n, 4) != perturb_scene(s, n, 5)


def test_keypoint_noise_std():
    obs = generate_scene(SceneConfig(n_objects=1, seed=3))[0].obs
    base = obs.to_params()[2:18]
    d = np.array([perturb(obs, NoiseModel(std_keypoint=2.0), [9, i]).to_params()[2:18] - base for i in range(7000)])
    assert d.size > 1e5
    assert d.std() == pytest.approx(2.0, rel=0.05)
    assert abs(d.mean()) < 0.05


def test_miscalibration_scales_sigmas(k_kitti):
    s = perturb_scene(generate_scene(SceneConfig(n_objects=20, seed=4)), NoiseModel(), 4)
    for o in s:
        est = solve_all(o.obs, k_kitti)
        a = assign_sigmas(o.obs, est, NoiseModel(), k_kitti)
        b = assign_sigmas(o.obs, est, NoiseModel(miscalibration_factor=2.0), k_kitti)
        for x, y in zip(a, b):
            if x.valid:
                assert y.sigma == pytest.approx(2 * x.sigma)


def test_fixed_and_calibrated_modes(k_kitti):
    cfg = SceneConfig(n_objects=10, seed=5)
    o = perturb_scene(generate_scene(cfg), NoiseModel(), 5)[0]
    est = solve_all(o.obs, k_kitti)
    fixed = assign_sigmas(o.obs, est, NoiseModel(sigma_mode="fixed", fixed_sigma=0.7), k_kitti)
    assert {e.sigma for e in fixed if e.valid} == {0.7}
    with pytest.raises(ValueError):
        assign_sigmas(o.obs, est, NoiseModel(sigma_mode="calibrated"), k_kitti)
    with pytest.raises(ValueError):
        calibrate(cfg, NoiseModel(), n_objects=999)


def test_propagated_sigmas_are_calibrated():
    # per-object check: population RMS is dominated by near-degenerate keypoint geometry
    noise = NoiseModel(0.05, 0.1, 0.1, 0.005, 0.005, 0.005)
    cfg = SceneConfig(n_objects=1500, depth_range=(10, 40), seed=6)
    z = []
    for i, s in enumerate(generate_scene(cfg)):
        est = solve_all(perturb(s.obs, noise, [6, i]), cfg.intrinsics)
        z.append([(e.value - s.box.z) / e.sigma if e.valid else np.nan for e in est])
    z = np.array(z)
    for j, src in enumerate(SOURCES):
        col = z[np.isfinite(z[:, j]), j]
        assert col.size > 1400
        assert np.std(col) == pytest.approx(1.0, rel=0.25), src


def test_calibration_table():
    rmse = calibrate(SceneConfig(seed=6), NoiseModel(), 1000)
    assert list(rmse) == list(SOURCES)
    assert all(v > 0 for v in rmse.values())
    assert rmse == calibrate(SceneConfig(seed=6), NoiseModel(), 1000)


def test_collapse_fraction_zero_is_identity(k_kitti):
    s = perturb_scene(generate_scene(SceneConfig(n_objects=20, seed=8)), NoiseModel(), 8)
    assert inject_collapse(s, CollapseSpec(fraction=0.0), 1, k_kitti) == s


@pytest.mark.parametrize("target", ["direct_depth", "pixel_heights", "keypoints", "yaw"])
def test_collapse_isolation(target, k_kitti):
    s = generate_scene(SceneConfig(n_objects=40, seed=9))
    spec = CollapseSpec(target_source=target, magnitude=1.3, fraction=0.5, honest_sigma=False)
    bad = inject_collapse(s, spec, 3, k_kitti)
    assert sum(o.corrupted for o in bad) == 20
    touched = set(sources_touched(spec))
    changed = set()
    for a, b in zip(s, bad):
        for ea, eb in zip(solve_all(a.obs, k_kitti), solve_all(b.obs, k_kitti)):
            if ea.value != eb.value or ea.valid != eb.valid:
                changed.add(ea.source)
    assert changed and changed <= touched


def test_collapse_spec_errors():
    with pytest.raises(ValueError, match="unknown collapse target"):
        CollapseSpec(target_source="lidar")
    with pytest.raises(ValueError):
        CollapseSpec(fraction=1.5)
    assert CollapseSpec(target_source="H").target == "pixel_heights"
    assert sources_touched(CollapseSpec(target_source="E")) == FAMILIES["E"]


def test_scene_file_roundtrip(tmp_path, k_kitti):
    s = perturb_scene(generate_scene(SceneConfig(n_objects=5, seed=10)), NoiseModel(), 10)
    s = inject_collapse(s, CollapseSpec(fraction=0.4), 2, k_kitti)
    save_scene(tmp_path / "s.json", s, k_kitti)
    s2, k2 = load_scene(tmp_path / "s.json")
    assert k2 == k_kitti
    assert [o.box for o in s2] == [o.box for o in s]
    for a, b in zip(s, s2):
        np.testing.assert_allclose(b.obs.to_params(), a.obs.to_params(), rtol=0, atol=0)
        assert a.corrupted == b.corrupted


def test_observe_box_exact(k_kitti):
    box = generate_scene(SceneConfig(n_objects=1, seed=12))[0].box
    est = solve_all(observe_box(box, k_kitti), k_kitti)
    for e in est:
        if e.valid:
            assert e.value == pytest.approx(box.z, rel=1e-9)

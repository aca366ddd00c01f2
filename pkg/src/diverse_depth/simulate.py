"""Seeded synthetic scenes that stand in for a trained detector.

Ground-truth boxes are sampled uniformly, observed exactly through the
camera, then perturbed with independent Gaussian noise. Every random draw
for object ``i`` comes from a generator keyed on ``(seed, i)`` so results
never depend on iteration order.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .boxgeom import Box3D, NotProjectableError, project_box
from .camera import CameraIntrinsics, Pixel
from .depthsolver import (
    FAMILIES,
    N_ESTIMATES,
    SIGMA_FLOOR,
    SOURCES,
    DepthEstimate,
    ObjectObservation,
    ObservationSigmas,
    depths_from_params,
    make_estimates,
    propagate_sigmas,
    validity,
)

KITTI_INTRINSICS = CameraIntrinsics(721.5377, 721.5377, 609.5593, 172.854)
RESAMPLE_BUDGET = 100

# fixed sub-stream tags mixed into seeds
_STREAM_SCENE = 0
_STREAM_NOISE = 1
_STREAM_CALIB = 2
_STREAM_COLLAPSE = 3


@dataclass(frozen=True)
class SceneConfig:
    n_objects: int = 200
    depth_range: tuple[float, float] = (5.0, 60.0)
    dim_ranges: dict = field(
        default_factory=lambda: {"h": (1.4, 1.8), "w": (1.5, 1.9), "l": (3.5, 4.8)}
    )
    yaw_range: tuple[float, float] = (-math.pi, math.pi)
    lateral_range: tuple[float, float] = (-12.0, 12.0)
    # camera-frame y of the box bottom (camera height above the ground)
    ground_range: tuple[float, float] = (1.5, 1.8)
    intrinsics: CameraIntrinsics = KITTI_INTRINSICS
    p2d_range: tuple[float, float] = (0.3, 1.0)
    seed: int = 0

    def __post_init__(self):
        if self.n_objects < 1:
            raise ValueError("n_objects must be >= 1")
        ranges = {
            "depth_range": self.depth_range,
            "yaw_range": self.yaw_range,
            "lateral_range": self.lateral_range,
            "ground_range": self.ground_range,
            "p2d_range": self.p2d_range,
        }
        ranges.update({f"dim_ranges.{k}": v for k, v in self.dim_ranges.items()})
        for name, (lo, hi) in ranges.items():
            if not lo <= hi:
                raise ValueError(f"{name}: min {lo} exceeds max {hi}")
        if set(self.dim_ranges) != {"h", "w", "l"}:
            raise ValueError("dim_ranges needs exactly the keys h, w, l")
        if self.depth_range[0] <= 0 or self.dim_ranges["h"][0] <= 0 or self.dim_ranges["w"][0] <= 0 or self.dim_ranges["l"][0] <= 0:
            raise ValueError("depths and dimensions must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["intrinsics"] = self.intrinsics.to_dict()
        d["dim_ranges"] = {k: list(v) for k, v in self.dim_ranges.items()}
        for k in ("depth_range", "yaw_range", "lateral_range", "ground_range", "p2d_range"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SceneConfig":
        d = dict(d)
        if "intrinsics" in d:
            d["intrinsics"] = CameraIntrinsics(**d["intrinsics"])
        if "dim_ranges" in d:
            d["dim_ranges"] = {k: tuple(v) for k, v in d["dim_ranges"].items()}
        for k in ("depth_range", "yaw_range", "lateral_range", "ground_range", "p2d_range"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


SIGMA_MODES = ("propagated", "calibrated", "fixed")


@dataclass(frozen=True)
class NoiseModel:
    std_center: float = 0.5  # pixels; ~85% of 2D center errors within 1 px
    std_keypoint: float = 1.0  # pixels
    std_height: float = 1.0  # pixels
    std_dims: float = 0.05  # meters
    std_yaw: float = 0.05  # radians
    std_direct_depth: float = 0.05  # meters, or fraction of depth when relative
    direct_depth_relative: bool = True
    sigma_mode: str = "propagated"
    miscalibration_factor: float = 1.0
    fixed_sigma: float = 1.0  # meters, "fixed" mode only

    def __post_init__(self):
        for name in ("std_center", "std_keypoint", "std_height", "std_dims", "std_yaw", "std_direct_depth"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative")
        if not self.miscalibration_factor > 0:
            raise ValueError("miscalibration_factor must be positive")
        if self.sigma_mode not in SIGMA_MODES:
            raise ValueError(f"sigma_mode must be one of {SIGMA_MODES}, got {self.sigma_mode!r}")

    def direct_std(self, z: float) -> float:
        return self.std_direct_depth * z if self.direct_depth_relative else self.std_direct_depth

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseModel":
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


class SceneObject(NamedTuple):
    box: Box3D
    obs: ObjectObservation
    corrupted: bool = False


def _rng(*key: int) -> np.random.Generator:
    return np.random.default_rng([int(k) & 0xFFFFFFFFFFFFFFFF for k in key])


def observe_box(box: Box3D, k: CameraIntrinsics, p_2d: float = 1.0) -> ObjectObservation:
    """Exact (noise-free) observation of a box."""
    kps, heights = project_box(box, k)
    return ObjectObservation(
        center_px=kps.center_3d_projected,
        keypoints=kps,
        heights=heights,
        dims=box.dims,
        yaw=box.yaw,
        direct_depth=box.z,
        p_2d=p_2d,
    )


def _sample_box(cfg: SceneConfig, rng: np.random.Generator) -> tuple[Box3D, float]:
    dr = cfg.dim_ranges
    h = rng.uniform(*dr["h"])
    w = rng.uniform(*dr["w"])
    l = rng.uniform(*dr["l"])
    z = rng.uniform(*cfg.depth_range)
    x = rng.uniform(*cfg.lateral_range)
    y = rng.uniform(*cfg.ground_range) - h / 2
    yaw = rng.uniform(*cfg.yaw_range)
    p2d = rng.uniform(*cfg.p2d_range)
    return Box3D((x, y, z), (h, w, l), yaw), p2d


def generate_scene(cfg: SceneConfig) -> list[SceneObject]:
    scene = []
    for i in range(cfg.n_objects):
        rng = _rng(cfg.seed, _STREAM_SCENE, i)
        for _ in range(RESAMPLE_BUDGET):
            try:
                box, p2d = _sample_box(cfg, rng)
                scene.append(SceneObject(box, observe_box(box, cfg.intrinsics, p2d)))
                break
            except (NotProjectableError, ValueError):
                continue
        else:
            raise ValueError(
                f"object {i}: no projectable box after {RESAMPLE_BUDGET} draws; check depth/lateral ranges"
            )
    return scene


def perturb(obs: ObjectObservation, noise: NoiseModel, seed) -> ObjectObservation:
    """Add independent zero-mean Gaussian noise to every estimated quantity.

    The perturbed observation reports the noise model's stds as its own
    per-quantity sigmas. ``seed`` may be an int or a sequence of ints.
    """
    rng = np.random.default_rng(seed)
    reported = _reported_sigmas(noise, noise.direct_std(obs.direct_depth))
    q = obs.to_params()
    q = q + rng.standard_normal(q.shape) * replace(obs, sigmas=reported).param_stds()
    q[23:26] = np.maximum(q[23:26], 1e-3)  # dims stay positive
    noisy = ObjectObservation.from_params(q, obs)

    kp = noisy.keypoints
    tb = rng.standard_normal(4) * noise.std_keypoint
    kp = kp._replace(
        top_center=Pixel(kp.top_center.u + tb[0], kp.top_center.v + tb[1]),
        bottom_center=Pixel(kp.bottom_center.u + tb[2], kp.bottom_center.v + tb[3]),
    )
    return replace(noisy, keypoints=kp, sigmas=reported)


def _reported_sigmas(noise: NoiseModel, std_e: float) -> ObservationSigmas:
    return ObservationSigmas(
        center=noise.std_center,
        keypoint=noise.std_keypoint,
        height=noise.std_height,
        dims=noise.std_dims,
        yaw=noise.std_yaw,
        direct_depth=std_e,
    )


def with_reported_sigmas(obs: ObjectObservation, noise: NoiseModel) -> ObjectObservation:
    """Attach the noise model's stds to an observation without adding noise."""
    return replace(obs, sigmas=_reported_sigmas(noise, noise.direct_std(obs.direct_depth)))


def perturb_scene(scene: list[SceneObject], noise: NoiseModel, seed: int) -> list[SceneObject]:
    return [
        s._replace(obs=perturb(s.obs, noise, [seed, _STREAM_NOISE, i]))
        for i, s in enumerate(scene)
    ]


def calibrate(cfg: SceneConfig, noise: NoiseModel, n_objects: int = 1000, seed: int | None = None) -> dict[str, float]:
    """Per-source RMSE of the raw depths on a separate seeded batch."""
    if n_objects < 1000:
        raise ValueError("calibration batch needs at least 1000 objects")
    seed = cfg.seed if seed is None else seed
    calib_cfg = replace(cfg, n_objects=n_objects, seed=int(_rng(seed, _STREAM_CALIB).integers(2**63)))
    scene = perturb_scene(generate_scene(calib_cfg), noise, calib_cfg.seed)
    q = np.array([s.obs.to_params() for s in scene])
    z_true = np.array([s.box.z for s in scene])
    err = depths_from_params(q, cfg.intrinsics) - z_true[:, None]
    ok = validity(err + z_true[:, None])
    rmse = {}
    for j, src in enumerate(SOURCES):
        e = err[ok[:, j], j]
        rmse[src] = float(np.sqrt(np.mean(e**2))) if e.size else math.nan
    return rmse


def assign_sigmas(
    obs: ObjectObservation,
    estimates: list[DepthEstimate],
    noise: NoiseModel,
    k: CameraIntrinsics,
    calibration: dict[str, float] | None = None,
    propagated: np.ndarray | None = None,
) -> list[DepthEstimate]:
    """Attach a sigma to every valid estimate under the noise model's policy.

    propagated: delta method on the observation's reported per-quantity
    sigmas. calibrated: per-source RMSE from :func:`calibrate`. fixed: one
    constant (``propagated`` may carry precomputed delta-method sigmas).
    All are scaled by ``miscalibration_factor``; an observation's
    ``sigma_inflation`` is then added in quadrature.
    """
    values = np.array([e.value for e in estimates])
    valid = np.array([e.valid for e in estimates]) & validity(values)
    if noise.sigma_mode == "propagated":
        sig = propagate_sigmas(obs.to_params(), obs.param_stds(), k) if propagated is None else propagated
    elif noise.sigma_mode == "calibrated":
        if calibration is None:
            raise ValueError("calibrated sigma mode needs a calibration table")
        sig = np.array([calibration.get(s, math.nan) for s in SOURCES])
    else:
        sig = np.full(N_ESTIMATES, noise.fixed_sigma)
    sig = sig * noise.miscalibration_factor
    if obs.sigma_inflation is not None:
        sig = np.hypot(sig, np.asarray(obs.sigma_inflation))
    sig = np.maximum(sig, SIGMA_FLOOR)
    return make_estimates(values, sig, valid)


# --- assumption collapse ----------------------------------------------------

COLLAPSE_TARGETS = {
    # input quantity -> parameter-vector slice
    "direct_depth": slice(27, 28),
    "height_phys": slice(23, 24),
    "dims": slice(23, 26),
    "yaw": slice(26, 27),
    "center": slice(0, 2),
    "keypoints": slice(2, 18),
    "pixel_heights": slice(18, 23),
}
FAMILY_TARGETS = {"E": "direct_depth", "H": "pixel_heights", "K": "keypoints"}
_SIGMA_FIELD = {
    "direct_depth": "direct_depth",
    "height_phys": "dims",
    "dims": "dims",
    "yaw": "yaw",
    "center": "center",
    "keypoints": "keypoint",
    "pixel_heights": "height",
}


@dataclass(frozen=True)
class CollapseSpec:
    target_source: str = "direct_depth"
    magnitude: float = 5.0
    mode: str = "mul"  # "mul" or "add"
    fraction: float = 0.2
    honest_sigma: bool = True
    # scales the reported std of the targeted quantity on affected objects;
    # < 1 makes the corruption confidently wrong
    reported_sigma_scale: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError(f"fraction must lie in [0, 1], got {self.fraction}")
        if self.mode not in ("mul", "add"):
            raise ValueError(f"mode must be 'mul' or 'add', got {self.mode!r}")
        if not self.reported_sigma_scale > 0:
            raise ValueError("reported_sigma_scale must be positive")
        self.target  # validates the tag

    @property
    def target(self) -> str:
        tag = FAMILY_TARGETS.get(self.target_source, self.target_source)
        if tag not in COLLAPSE_TARGETS:
            known = sorted(COLLAPSE_TARGETS) + sorted(FAMILY_TARGETS)
            raise ValueError(f"unknown collapse target {self.target_source!r}; expected one of {known}")
        return tag

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CollapseSpec":
        return cls(**d)


def affected_indices(n: int, fraction: float, seed: int) -> np.ndarray:
    count = int(round(fraction * n))
    return np.sort(_rng(seed, _STREAM_COLLAPSE).permutation(n)[:count])


def corrupt_observation(obs: ObjectObservation, spec: CollapseSpec, k: CameraIntrinsics) -> ObjectObservation:
    tag = spec.target
    q = obs.to_params()
    sl = COLLAPSE_TARGETS[tag]
    q2 = q.copy()
    q2[sl] = q[sl] * spec.magnitude if spec.mode == "mul" else q[sl] + spec.magnitude
    bad = ObjectObservation.from_params(q2, obs)
    if spec.reported_sigma_scale != 1.0:
        f = _SIGMA_FIELD[tag]
        bad = replace(bad, sigmas=replace(bad.sigmas, **{f: getattr(bad.sigmas, f) * spec.reported_sigma_scale}))
    if spec.honest_sigma:
        shift = depths_from_params(q2, k)[0] - depths_from_params(q, k)[0]
        shift = np.where(np.isfinite(shift), np.abs(shift), 0.0)
        if obs.sigma_inflation is not None:
            shift = np.hypot(shift, obs.sigma_inflation)
        bad = replace(bad, sigma_inflation=tuple(float(s) for s in shift))
    return bad


def inject_collapse(scene: list[SceneObject], spec: CollapseSpec, seed: int, k: CameraIntrinsics) -> list[SceneObject]:
    """Corrupt the targeted quantity on a seeded share of the objects.

    With ``honest_sigma`` each affected object reports extra per-estimate
    spread equal to the depth shift the corruption causes, added in
    quadrature: the sigma a calibration run on the corrupted population
    would measure. Otherwise reported sigmas are left untouched.
    """
    idx = set(affected_indices(len(scene), spec.fraction, seed).tolist())
    out = []
    for i, s in enumerate(scene):
        if i in idx:
            out.append(SceneObject(s.box, corrupt_observation(s.obs, spec, k), True))
        else:
            out.append(s)
    return out


def sources_touched(spec: CollapseSpec) -> tuple[str, ...]:
    """Estimate sources whose value depends on the corrupted quantity."""
    tag = spec.target
    if tag == "direct_depth":
        return FAMILIES["E"]
    if tag == "pixel_heights":
        return FAMILIES["H"]
    if tag in ("keypoints", "center", "yaw"):
        return FAMILIES["K"]
    return FAMILIES["H"] + FAMILIES["K"]  # physical dims


# --- scene files ------------------------------------------------------------


def scene_to_dict(scene: list[SceneObject], k: CameraIntrinsics) -> dict:
    return {
        "intrinsics": k.to_dict(),
        "objects": [
            {"box": s.box.to_dict(), "obs": s.obs.to_dict(), "corrupted": s.corrupted} for s in scene
        ],
    }


def scene_from_dict(d: dict) -> tuple[list[SceneObject], CameraIntrinsics]:
    k = CameraIntrinsics(**d["intrinsics"])
    scene = [
        SceneObject(Box3D.from_dict(o["box"]), ObjectObservation.from_dict(o["obs"]), bool(o.get("corrupted", False)))
        for o in d["objects"]
    ]
    return scene, k


def save_scene(path, scene: list[SceneObject], k: CameraIntrinsics) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene, k), indent=1, sort_keys=True) + "\n")


def load_scene(path) -> tuple[list[SceneObject], CameraIntrinsics]:
    return scene_from_dict(json.loads(Path(path).read_text()))

"""The 20-way depth solving system and the coupled PnP baseline.

Every object yields 20 candidate depths in a fixed order::

    0      DirectE       regressed depth, passed through
    1      HeightH5      center vertical line
    2      HeightH13     average over diagonal corner lines H1, H3
    3      HeightH24     average over diagonal corner lines H2, H4
    4-11   KeypointU0-7  column equation of vertex i
    12-19  KeypointV0-7  row equation of vertex i

The keypoint equations substitute the back-projected center into the
projection of each vertex, which leaves depth as the only unknown::

    (u~ - u~_c) z = A u~ + x_o cos(yaw) + z_o sin(yaw)
    (v~ - v~_c) z = A v~ + y_o
    A = x_o sin(yaw) - z_o cos(yaw)

Internally all 20 depths are computed from a flat 28-entry parameter
vector so that many perturbed copies of one observation can be solved in a
single numpy call (used by the delta-method sigma propagation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .boxgeom import ObjectKeypoints, VerticalHeights, box_vertices_object_frame
from .camera import CameraIntrinsics, Pixel

EPS_UV = 1e-6  # normalized-pixel units
EPS_H = 0.5  # pixels
SIGMA_FLOOR = 1e-9  # meters

SOURCES: tuple[str, ...] = (
    ("DirectE", "HeightH5", "HeightH13", "HeightH24")
    + tuple(f"KeypointU{i}" for i in range(8))
    + tuple(f"KeypointV{i}" for i in range(8))
)
SOURCE_INDEX = {s: i for i, s in enumerate(SOURCES)}
N_ESTIMATES = len(SOURCES)

FAMILIES = {
    "E": ("DirectE",),
    "H": ("HeightH5", "HeightH13", "HeightH24"),
    "K": tuple(s for s in SOURCES if s.startswith("Keypoint")),
}


def source_family(source: str) -> str:
    for fam, members in FAMILIES.items():
        if source in members:
            return fam
    raise KeyError(source)


class DegenerateDepthError(ValueError):
    """A depth equation whose denominator is (numerically) zero."""


@dataclass(frozen=True)
class ObservationSigmas:
    """Per-quantity standard deviations attached to an observation."""

    center: float = 0.0  # pixels
    keypoint: float = 0.0  # pixels
    height: float = 0.0  # pixels
    dims: float = 0.0  # meters
    yaw: float = 0.0  # radians
    direct_depth: float = 0.0  # meters

    def __post_init__(self):
        for name in ("center", "keypoint", "height", "dims", "yaw", "direct_depth"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"sigma {name} must be non-negative")


@dataclass(frozen=True)
class ObjectObservation:
    center_px: Pixel
    keypoints: ObjectKeypoints
    heights: VerticalHeights
    dims: tuple[float, float, float]
    yaw: float
    direct_depth: float
    sigmas: ObservationSigmas = field(default_factory=ObservationSigmas)
    p_2d: float = 1.0
    # optional per-estimate overrides, one entry per SOURCES item
    estimate_sigmas: tuple[float, ...] | None = None
    # extra per-estimate spread added in quadrature (honest corruption)
    sigma_inflation: tuple[float, ...] | None = None

    def __post_init__(self):
        if not all(d > 0 for d in self.dims):
            raise ValueError(f"observation dims must be positive, got {self.dims}")
        if not math.isfinite(self.direct_depth):
            raise ValueError("direct_depth must be finite")
        for name in ("estimate_sigmas", "sigma_inflation"):
            val = getattr(self, name)
            if val is not None and len(val) != N_ESTIMATES:
                raise ValueError(f"{name} needs {N_ESTIMATES} entries, got {len(val)}")

    def to_params(self) -> np.ndarray:
        kp = self.keypoints.vertices
        return np.array(
            [self.center_px.u, self.center_px.v]
            + [p.u for p in kp]
            + [p.v for p in kp]
            + list(self.heights)
            + list(self.dims)
            + [self.yaw, self.direct_depth],
            dtype=float,
        )

    def param_stds(self) -> np.ndarray:
        s = self.sigmas
        return np.array(
            [s.center] * 2 + [s.keypoint] * 16 + [s.height] * 5 + [s.dims] * 3 + [s.yaw, s.direct_depth]
        )

    @classmethod
    def from_params(cls, q, template: "ObjectObservation") -> "ObjectObservation":
        """Rebuild an observation from a parameter vector, keeping the
        template's top/bottom center keypoints and metadata."""
        q = [float(x) for x in q]
        center = Pixel(q[P_UC], q[P_VC])
        verts = tuple(Pixel(q[P_U + i], q[P_V + i]) for i in range(8))
        kps = template.keypoints._replace(vertices=verts, center_3d_projected=center)
        return replace(
            template,
            center_px=center,
            keypoints=kps,
            heights=VerticalHeights(*q[P_H : P_H + 5]),
            dims=(q[P_DIMS], q[P_DIMS + 1], q[P_DIMS + 2]),
            yaw=q[P_YAW],
            direct_depth=q[P_E],
        )

    def to_dict(self) -> dict:
        kp = self.keypoints
        d = {
            "center_px": list(self.center_px),
            "vertices": [list(p) for p in kp.vertices],
            "top_center": list(kp.top_center),
            "bottom_center": list(kp.bottom_center),
            "heights": list(self.heights),
            "dims": list(self.dims),
            "yaw": self.yaw,
            "direct_depth": self.direct_depth,
            "sigmas": vars(self.sigmas).copy(),
            "p_2d": self.p_2d,
        }
        if self.estimate_sigmas is not None:
            d["estimate_sigmas"] = list(self.estimate_sigmas)
        if self.sigma_inflation is not None:
            d["sigma_inflation"] = list(self.sigma_inflation)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectObservation":
        center = Pixel(*d["center_px"])
        kps = ObjectKeypoints(
            tuple(Pixel(*p) for p in d["vertices"]),
            Pixel(*d["top_center"]),
            Pixel(*d["bottom_center"]),
            center,
        )
        opt = lambda key: tuple(d[key]) if d.get(key) is not None else None  # noqa: E731
        return cls(
            center_px=center,
            keypoints=kps,
            heights=VerticalHeights(*d["heights"]),
            dims=tuple(d["dims"]),
            yaw=d["yaw"],
            direct_depth=d["direct_depth"],
            sigmas=ObservationSigmas(**d.get("sigmas", {})),
            p_2d=d.get("p_2d", 1.0),
            estimate_sigmas=opt("estimate_sigmas"),
            sigma_inflation=opt("sigma_inflation"),
        )


# parameter vector layout
P_UC, P_VC = 0, 1
P_U = 2  # 8 vertex columns
P_V = 10  # 8 vertex rows
P_H = 18  # H1..H5
P_DIMS = 23  # h, w, l
P_YAW = 26
P_E = 27
N_PARAMS = 28


@dataclass(frozen=True)
class DepthEstimate:
    value: float
    sigma: float
    source: str
    valid: bool

    @property
    def index(self) -> int:
        return SOURCE_INDEX[self.source]


# --- scalar equations -------------------------------------------------------


def depth_from_keypoint_u(kp, center, vertex_obj, theta: float) -> float:
    x_o, _, z_o = vertex_obj
    s, c = math.sin(theta), math.cos(theta)
    denom = kp[0] - center[0]
    if abs(denom) < EPS_UV:
        raise DegenerateDepthError(f"|u~ - u~_c| = {abs(denom):.3g} below {EPS_UV}")
    a = x_o * s - z_o * c
    return (a * kp[0] + x_o * c + z_o * s) / denom


def depth_from_keypoint_v(kp, center, vertex_obj, theta: float) -> float:
    x_o, y_o, z_o = vertex_obj
    denom = kp[1] - center[1]
    if abs(denom) < EPS_UV:
        raise DegenerateDepthError(f"|v~ - v~_c| = {abs(denom):.3g} below {EPS_UV}")
    a = x_o * math.sin(theta) - z_o * math.cos(theta)
    return (a * kp[1] + y_o) / denom


def depth_from_height(h_phys: float, h_pix: float, f_y: float) -> float:
    if h_pix < EPS_H:
        raise DegenerateDepthError(f"pixel height {h_pix} below {EPS_H}")
    if not h_phys > 0:
        raise ValueError(f"physical height must be positive, got {h_phys}")
    return f_y * h_phys / h_pix


def depth_from_corner_pair(h_phys: float, h_pix_a: float, h_pix_b: float, f_y: float) -> float:
    return 0.5 * (depth_from_height(h_phys, h_pix_a, f_y) + depth_from_height(h_phys, h_pix_b, f_y))


# --- vectorized core --------------------------------------------------------

_SX = np.array([1.0, 1.0, -1.0, -1.0] * 2)
_SZ = np.array([1.0, -1.0, -1.0, 1.0] * 2)
_SY = np.array([1.0] * 4 + [-1.0] * 4)


def depths_from_params(q: np.ndarray, k: CameraIntrinsics) -> np.ndarray:
    """Solve all 20 depths for each row of ``q`` (shape (M, 28)).

    Degenerate equations give NaN. Non-positive depths are returned as is;
    callers decide validity.
    """
    q = np.atleast_2d(np.asarray(q, dtype=float))
    out = np.full((q.shape[0], N_ESTIMATES), np.nan)
    out[:, 0] = q[:, P_E]

    h, w, l = q[:, P_DIMS], q[:, P_DIMS + 1], q[:, P_DIMS + 2]
    H = q[:, P_H : P_H + 5]
    with np.errstate(divide="ignore", invalid="ignore"):
        z_lines = np.where(H >= EPS_H, k.f_y * h[:, None] / H, np.nan)
    out[:, 1] = z_lines[:, 4]
    out[:, 2] = 0.5 * (z_lines[:, 0] + z_lines[:, 2])
    out[:, 3] = 0.5 * (z_lines[:, 1] + z_lines[:, 3])

    theta = q[:, P_YAW][:, None]
    s, c = np.sin(theta), np.cos(theta)
    x_o = _SX * l[:, None] / 2
    y_o = _SY * h[:, None] / 2
    z_o = _SZ * w[:, None] / 2
    a = x_o * s - z_o * c
    ut_c = ((q[:, P_UC] - k.c_u) / k.f_x)[:, None]
    vt_c = ((q[:, P_VC] - k.c_v) / k.f_y)[:, None]
    ut = (q[:, P_U : P_U + 8] - k.c_u) / k.f_x
    vt = (q[:, P_V : P_V + 8] - k.c_v) / k.f_y
    du, dv = ut - ut_c, vt - vt_c
    with np.errstate(divide="ignore", invalid="ignore"):
        out[:, 4:12] = np.where(np.abs(du) >= EPS_UV, (a * ut + x_o * c + z_o * s) / du, np.nan)
        out[:, 12:20] = np.where(np.abs(dv) >= EPS_UV, (a * vt + y_o) / dv, np.nan)
    return out


def validity(values: np.ndarray) -> np.ndarray:
    return np.isfinite(values) & (values > 0)


def propagate_sigmas(q: np.ndarray, stds: np.ndarray, k: CameraIntrinsics, step: float = 1e-4) -> np.ndarray:
    """First-order (delta method) standard deviation of every depth.

    Central differences with a fixed step in each input's natural unit;
    contributions from independent inputs add in quadrature. Accepts one
    parameter vector (returns shape (20,)) or a batch of rows (M, 20).
    """
    q = np.asarray(q, dtype=float)
    single = q.ndim == 1
    q = np.atleast_2d(q)
    stds = np.broadcast_to(np.asarray(stds, dtype=float), q.shape)
    active = np.flatnonzero((stds > 0).any(axis=0))
    if active.size == 0:
        out = np.zeros((q.shape[0], N_ESTIMATES))
        return out[0] if single else out
    na = active.size
    rows = np.repeat(q[:, None, :], 2 * na, axis=1)  # (M, 2 na, P)
    rows[:, np.arange(na), active] += step
    rows[:, na + np.arange(na), active] -= step
    z = depths_from_params(rows.reshape(-1, q.shape[1]), k).reshape(q.shape[0], 2 * na, N_ESTIMATES)
    grad = (z[:, :na] - z[:, na:]) / (2 * step)  # (M, na, 20)
    out = np.sqrt(np.sum((grad * stds[:, active, None]) ** 2, axis=1))
    return out[0] if single else out


def make_estimates(values, sigmas, valid=None) -> list[DepthEstimate]:
    values = np.asarray(values, dtype=float)
    sigmas = np.asarray(sigmas, dtype=float)
    ok = validity(values) if valid is None else np.asarray(valid, dtype=bool)
    ok = ok & np.isfinite(sigmas) & (sigmas > 0)
    return [
        DepthEstimate(float(values[i]), float(sigmas[i]) if ok[i] else math.nan, SOURCES[i], bool(ok[i]))
        for i in range(N_ESTIMATES)
    ]


def solve_all(obs: ObjectObservation, k: CameraIntrinsics, sigmas=None) -> list[DepthEstimate]:
    """All 20 candidate depths of one object.

    Sigma priority: the explicit ``sigmas`` argument, then the
    observation's ``estimate_sigmas``, then delta-method propagation of the
    observation's per-quantity sigmas. Any ``sigma_inflation`` on the
    observation is added in quadrature afterwards. Sigmas are floored at
    ``SIGMA_FLOOR`` so noiseless inputs still fuse.
    """
    q = obs.to_params()
    values = depths_from_params(q, k)[0]
    if sigmas is None:
        if obs.estimate_sigmas is not None:
            sigmas = np.asarray(obs.estimate_sigmas, dtype=float)
        else:
            sigmas = propagate_sigmas(q, obs.param_stds(), k)
    sigmas = np.asarray(sigmas, dtype=float)
    if obs.sigma_inflation is not None:
        sigmas = np.hypot(sigmas, np.asarray(obs.sigma_inflation, dtype=float))
    sigmas = np.maximum(sigmas, SIGMA_FLOOR)
    return make_estimates(values, sigmas)


def solve_batch(observations, k: CameraIntrinsics) -> list[list[DepthEstimate]]:
    """:func:`solve_all` over many observations, vectorized across objects."""
    observations = list(observations)
    if not observations:
        return []
    q = np.array([o.to_params() for o in observations])
    values = depths_from_params(q, k)
    sig = propagate_sigmas(q, np.array([o.param_stds() for o in observations]), k)
    out = []
    for i, o in enumerate(observations):
        si = sig[i]
        if o.estimate_sigmas is not None:
            si = np.asarray(o.estimate_sigmas, dtype=float)
        if o.sigma_inflation is not None:
            si = np.hypot(si, np.asarray(o.sigma_inflation, dtype=float))
        out.append(make_estimates(values[i], np.maximum(si, SIGMA_FLOOR)))
    return out


class DegeneratePnPError(ValueError):
    pass


def pnp_least_squares(pixels, points_obj, theta: float, k: CameraIntrinsics) -> np.ndarray:
    """Coupled least-squares translation from >= 2 keypoint correspondences.

    Each correspondence contributes the two rows
    ``[-1 0 u~; 0 -1 v~] T = [u~; v~] A + [x_o cos + z_o sin; y_o]``.
    """
    pixels = np.asarray(pixels, dtype=float).reshape(-1, 2)
    pts = np.asarray(points_obj, dtype=float).reshape(-1, 3)
    if len(pixels) != len(pts):
        raise ValueError("pixels and object points differ in length")
    n = len(pts)
    ut = (pixels[:, 0] - k.c_u) / k.f_x
    vt = (pixels[:, 1] - k.c_v) / k.f_y
    s, c = math.sin(theta), math.cos(theta)
    a = pts[:, 0] * s - pts[:, 2] * c
    M = np.zeros((2 * n, 3))
    M[0::2, 0] = -1.0
    M[0::2, 2] = ut
    M[1::2, 1] = -1.0
    M[1::2, 2] = vt
    b = np.empty(2 * n)
    b[0::2] = ut * a + pts[:, 0] * c + pts[:, 2] * s
    b[1::2] = vt * a + pts[:, 1]
    if n < 2:
        raise DegeneratePnPError("degenerate PnP configuration: need at least 2 keypoints")
    T, _, rank, _ = np.linalg.lstsq(M, b, rcond=None)
    if rank < 3:
        raise DegeneratePnPError(f"degenerate PnP configuration: rank {rank} < 3")
    return T


def pnp_from_observation(obs: ObjectObservation, k: CameraIntrinsics) -> np.ndarray:
    """PnP over the 10 keypoints (8 vertices, top and bottom centers)."""
    h = obs.dims[0]
    pts = np.vstack([box_vertices_object_frame(obs.dims), [[0.0, -h / 2, 0.0], [0.0, h / 2, 0.0]]])
    kp = obs.keypoints
    px = list(kp.vertices) + [kp.top_center, kp.bottom_center]
    return pnp_least_squares(px, pts, obs.yaw, k)


__all__ = [
    "SOURCES",
    "FAMILIES",
    "DepthEstimate",
    "ObjectObservation",
    "ObservationSigmas",
    "depth_from_keypoint_u",
    "depth_from_keypoint_v",
    "depth_from_height",
    "depth_from_corner_pair",
    "depths_from_params",
    "propagate_sigmas",
    "solve_all",
    "solve_batch",
    "pnp_least_squares",
    "pnp_from_observation",
]

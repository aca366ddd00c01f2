"""KITTI 3D object label and calibration files.

Label lines carry 15 whitespace-separated fields (16 with a detection
score)::

    type truncated occluded alpha x1 y1 x2 y2 h w l x y z rotation_y [score]

``location`` (x, y, z) is the bottom center of the box in the rectified
camera frame. Intrinsics come from the left color camera matrix P2; its
translation column (the stereo baseline term) is dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .boxgeom import Box3D, NotProjectableError, alpha_yaw_convert
from .camera import CameraIntrinsics
from .combiner import select_and_combine
from .depthsolver import SOURCES, pnp_from_observation, solve_all
from .simulate import NoiseModel, observe_box, with_reported_sigmas

SENTINEL_LOCATION = -1000.0


class KittiParseError(ValueError):
    def __init__(self, msg: str, line: int | None = None, column: int | None = None, source: str | None = None):
        where = ":".join(str(p) for p in (source, line, column) if p is not None)
        super().__init__(f"{where}: {msg}" if where else msg)
        self.line = line
        self.column = column
        self.source = source


class NonLocalizableLabelError(ValueError):
    pass


@dataclass(frozen=True)
class KittiLabel:
    type: str
    truncated: float
    occluded: int
    alpha: float
    bbox2d: tuple[float, float, float, float]
    dims: tuple[float, float, float]  # h, w, l
    location: tuple[float, float, float]  # bottom center
    rotation_y: float
    score: float | None = None


def _num(tok: str, col: int, line: int | None, source: str | None) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise KittiParseError(f"field {col} is not a number: {tok!r}", line, col, source) from None
    if math.isnan(v):
        raise KittiParseError(f"field {col} is NaN", line, col, source)
    return v


def parse_label_line(line: str, lineno: int | None = None, source: str | None = None) -> KittiLabel:
    toks = line.split()
    if len(toks) not in (15, 16):
        raise KittiParseError(f"expected 15 or 16 fields, got {len(toks)}", lineno, None, source)
    v = [None] + [_num(t, i + 1, lineno, source) for i, t in enumerate(toks) if i > 0]
    occ = v[2]
    if occ != int(occ):
        raise KittiParseError(f"field 3 (occluded) must be an integer, got {toks[2]!r}", lineno, 3, source)
    return KittiLabel(
        type=toks[0],
        truncated=v[1],
        occluded=int(occ),
        alpha=v[3],
        bbox2d=(v[4], v[5], v[6], v[7]),
        dims=(v[8], v[9], v[10]),
        location=(v[11], v[12], v[13]),
        rotation_y=v[14],
        score=v[15] if len(toks) == 16 else None,
    )


def format_label_line(label: KittiLabel, precision: int = 2) -> str:
    f = lambda x: f"{x:.{precision}f}"  # noqa: E731
    parts = [label.type, f(label.truncated), str(label.occluded), f(label.alpha)]
    parts += [f(x) for x in label.bbox2d + label.dims + label.location]
    parts.append(f(label.rotation_y))
    if label.score is not None:
        parts.append(f"{label.score:.4f}")
    return " ".join(parts)


def iter_label_lines(text: str, source: str | None = None):
    """Yield ``(lineno, label_or_error)`` for every non-blank line."""
    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            yield n, parse_label_line(line, n, source)
        except KittiParseError as exc:
            yield n, exc


def parse_labels(text: str, source: str | None = None) -> list[KittiLabel]:
    labels = []
    for _, item in iter_label_lines(text, source):
        if isinstance(item, KittiParseError):
            raise item
        labels.append(item)
    return labels


def read_labels(path) -> list[KittiLabel]:
    path = Path(path)
    return parse_labels(path.read_text(), str(path))


@dataclass(frozen=True)
class KittiCalib:
    p2: np.ndarray  # (3, 4)

    def __post_init__(self):
        p2 = np.asarray(self.p2, dtype=float).reshape(3, 4)
        if not (p2[0, 0] > 0 and p2[1, 1] > 0):
            raise ValueError("P2 focal entries must be positive")
        object.__setattr__(self, "p2", p2)

    @property
    def intrinsics(self) -> CameraIntrinsics:
        p = self.p2
        return CameraIntrinsics(f_x=p[0, 0], f_y=p[1, 1], c_u=p[0, 2], c_v=p[1, 2])


def parse_calib(text: str, source: str | None = None) -> KittiCalib:
    for n, line in enumerate(text.splitlines(), start=1):
        key, sep, rest = line.partition(":")
        if not sep or key.strip() != "P2":
            continue
        toks = rest.split()
        if len(toks) != 12:
            raise KittiParseError(f"P2 needs 12 values, got {len(toks)}", n, None, source)
        vals = [_num(t, i + 1, n, source) for i, t in enumerate(toks)]
        try:
            return KittiCalib(np.array(vals).reshape(3, 4))
        except ValueError as exc:
            raise KittiParseError(str(exc), n, None, source) from None
    raise KittiParseError("no P2 line found", None, None, source)


def read_calib(path) -> KittiCalib:
    path = Path(path)
    return parse_calib(path.read_text(), str(path))


def label_to_box(label: KittiLabel) -> Box3D:
    """Box centered on its geometric center (label y minus half the height)."""
    h, w, l = label.dims
    x, y, z = label.location
    if min(label.dims) <= 0 or min(label.location) <= SENTINEL_LOCATION or z <= 0:
        raise NonLocalizableLabelError(f"non-localizable label ({label.type}): dims={label.dims}, location={label.location}")
    return Box3D((x, y - h / 2, z), (h, w, l), label.rotation_y)


def box_to_label(box: Box3D, template: KittiLabel | None = None, type: str = "Car") -> KittiLabel:
    x, y, z = box.center
    h = box.dims[0]
    if template is None:
        template = KittiLabel(type, 0.0, 0, alpha_yaw_convert(box.yaw, x, z, to_yaw=False), (0.0, 0.0, 0.0, 0.0), box.dims, (0, 0, 0), 0.0)
    return KittiLabel(
        type=template.type,
        truncated=template.truncated,
        occluded=template.occluded,
        alpha=template.alpha,
        bbox2d=template.bbox2d,
        dims=box.dims,
        location=(x, y + h / 2, z),
        rotation_y=box.yaw,
        score=template.score,
    )


@dataclass(frozen=True)
class RoundtripRow:
    index: int
    type: str
    z_true: float
    z_combined: float
    abs_error: float
    rel_error: float
    pnp_rel_error: float
    n_valid: int
    n_selected: int
    source_errors: tuple[float, ...]  # |z_i - z_true| per source, NaN when invalid


@dataclass
class RoundtripResult:
    rows: list[RoundtripRow]
    skipped: list[tuple[int, str]]  # (label index, reason)

    @property
    def max_rel_error(self) -> float:
        return max((r.rel_error for r in self.rows), default=0.0)


def roundtrip_eval(labels: list[KittiLabel], calib: KittiCalib, noise: NoiseModel | None = None) -> RoundtripResult:
    """Noise-free observation of every localizable label, solved and fused.

    Sigmas are the delta-method propagation of ``noise``'s per-quantity
    stds (default noise model when omitted) evaluated at the exact
    observation.
    """
    k = calib.intrinsics
    noise = noise or NoiseModel()
    rows, skipped = [], []
    for i, lab in enumerate(labels):
        try:
            box = label_to_box(lab)
            obs = observe_box(box, k)
        except (NonLocalizableLabelError, NotProjectableError) as exc:
            skipped.append((i, str(exc)))
            continue
        obs = with_reported_sigmas(obs, noise)
        est = solve_all(obs, k)
        res = select_and_combine(est)
        zt = box.z
        pnp = pnp_from_observation(obs, k)
        rows.append(
            RoundtripRow(
                index=i,
                type=lab.type,
                z_true=zt,
                z_combined=res.combined_depth,
                abs_error=abs(res.combined_depth - zt),
                rel_error=abs(res.combined_depth - zt) / zt,
                pnp_rel_error=float(np.linalg.norm(pnp - np.asarray(box.center)) / zt),
                n_valid=sum(e.valid for e in est),
                n_selected=len(res.selected),
                source_errors=tuple(abs(e.value - zt) if e.valid else math.nan for e in est),
            )
        )
    return RoundtripResult(rows, skipped)


ROUNDTRIP_COLUMNS = ("index", "type", "z_true", "z_combined", "abs_error", "rel_error", "pnp_rel_error", "n_valid", "n_selected") + tuple(
    f"err_{s}" for s in SOURCES
)

"""Cuboid geometry: object frame, yaw rotation, keypoint layout and the
pixel heights of the box's vertical lines.

The object frame has its origin at the geometric center of the box, with
axes aligned to the camera frame at yaw 0 (x along the length, y down
along the height, z along the width). Roll and pitch are always 0.

Vertex layout. Vertices 0-3 lie on the bottom face (y = +h/2), vertices
4-7 on the top face (y = -h/2). Within each face the (x, z) corners are
visited cyclically::

    index  0: (+l/2, +w/2)    1: (+l/2, -w/2)
           2: (-l/2, -w/2)    3: (-l/2, +w/2)

so vertex i and vertex (i + 2) mod 4 on the same face are diagonal
partners, and vertex i + 4 sits directly above vertex i. Corner vertical
line j (pixel height H_{j+1}) joins vertex j to vertex j + 4, which makes
(H1, H3) and (H2, H4) the two diagonal pairs. H5 is the center line from
the top center (0, -h/2, 0) to the bottom center (0, +h/2, 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .camera import BehindCameraError, CameraIntrinsics, Pixel, project_point

_CORNER_SIGNS = ((1.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (-1.0, 1.0))
DIAGONAL_PAIRS = ((0, 2), (1, 3))


@dataclass(frozen=True)
class Box3D:
    center: tuple[float, float, float]
    dims: tuple[float, float, float]  # (h, w, l)
    yaw: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "dims", tuple(float(d) for d in self.dims))
        object.__setattr__(self, "yaw", float(self.yaw))
        if len(self.center) != 3 or len(self.dims) != 3:
            raise ValueError("center and dims must have three components")
        if not all(d > 0 for d in self.dims):
            raise ValueError(f"box dimensions must be positive, got {self.dims}")
        if not self.center[2] > 0:
            raise ValueError(f"box center must be in front of the camera, got z={self.center[2]}")

    @property
    def z(self) -> float:
        return self.center[2]

    def to_dict(self) -> dict:
        return {"center": list(self.center), "dims": list(self.dims), "yaw": self.yaw}

    @classmethod
    def from_dict(cls, d: dict) -> "Box3D":
        return cls(tuple(d["center"]), tuple(d["dims"]), d["yaw"])


class ObjectKeypoints(NamedTuple):
    vertices: tuple[Pixel, ...]
    top_center: Pixel
    bottom_center: Pixel
    center_3d_projected: Pixel


class VerticalHeights(NamedTuple):
    H1: float
    H2: float
    H3: float
    H4: float
    H5: float

    @property
    def corners(self) -> tuple[float, float, float, float]:
        return (self.H1, self.H2, self.H3, self.H4)


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def box_vertices_object_frame(dims) -> np.ndarray:
    """Return the 8 vertices as an (8, 3) array in the documented order."""
    h, w, l = dims
    verts = np.empty((8, 3))
    for face, y in enumerate((h / 2, -h / 2)):
        for j, (sx, sz) in enumerate(_CORNER_SIGNS):
            verts[4 * face + j] = (sx * l / 2, y, sz * w / 2)
    return verts


def object_to_camera(p_obj, box: Box3D) -> np.ndarray:
    p = np.asarray(p_obj, dtype=float)
    return p @ rotation_matrix(box.yaw).T + np.asarray(box.center)


class NotProjectableError(ValueError):
    pass


def project_box(box: Box3D, k: CameraIntrinsics) -> tuple[ObjectKeypoints, VerticalHeights]:
    h = box.dims[0]
    pts_obj = np.vstack([box_vertices_object_frame(box.dims), [[0.0, -h / 2, 0.0], [0.0, h / 2, 0.0], [0.0, 0.0, 0.0]]])
    pts_cam = object_to_camera(pts_obj, box)
    try:
        px = [project_point(p, k) for p in pts_cam]
    except BehindCameraError as exc:
        raise NotProjectableError(f"box not fully projectable: {exc}") from None
    verts = tuple(px[:8])
    kps = ObjectKeypoints(verts, px[8], px[9], px[10])
    corner = [verts[j].v - verts[j + 4].v for j in range(4)]
    heights = VerticalHeights(*corner, px[9].v - px[8].v)
    return kps, heights


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2 * math.pi)
    if a <= 0:
        a += 2 * math.pi
    return a - math.pi


def alpha_yaw_convert(angle: float, x: float, z: float, to_yaw: bool = True) -> float:
    """Convert observation angle alpha to yaw (``to_yaw``) or back."""
    if not z > 0:
        raise ValueError(f"z must be positive, got {z}")
    ray = math.atan2(x, z)
    return wrap_angle(angle + ray if to_yaw else angle - ray)

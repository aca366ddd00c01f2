"""Pinhole camera model.

Axis convention (used by every module in the package): camera x points
right, y points down, z points forward, as in KITTI. Pixels are continuous
reals and are never rounded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class Pixel(NamedTuple):
    u: float
    v: float


class NormalizedPixel(NamedTuple):
    u_tilde: float
    v_tilde: float


@dataclass(frozen=True)
class CameraIntrinsics:
    f_x: float
    f_y: float
    c_u: float
    c_v: float

    def __post_init__(self):
        if not (self.f_x > 0 and self.f_y > 0):
            raise ValueError(f"focal lengths must be positive, got f_x={self.f_x}, f_y={self.f_y}")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.f_x, 0.0, self.c_u], [0.0, self.f_y, self.c_v], [0.0, 0.0, 1.0]])

    def to_dict(self) -> dict:
        return {"f_x": self.f_x, "f_y": self.f_y, "c_u": self.c_u, "c_v": self.c_v}


class BehindCameraError(ValueError):
    pass


def project_point(p_cam, k: CameraIntrinsics) -> Pixel:
    x, y, z = (float(c) for c in p_cam)
    if not z > 0:
        raise BehindCameraError(f"behind camera: z={z}")
    return Pixel(k.f_x * x / z + k.c_u, k.f_y * y / z + k.c_v)


def normalize_pixel(p, k: CameraIntrinsics) -> NormalizedPixel:
    u, v = p
    return NormalizedPixel((u - k.c_u) / k.f_x, (v - k.c_v) / k.f_y)


def backproject_center(center, z: float, k: CameraIntrinsics) -> tuple[float, float]:
    """Camera-frame (x, y) of the point imaged at ``center`` with depth ``z``."""
    if not z > 0 or not math.isfinite(z):
        raise ValueError(f"depth must be positive and finite, got {z}")
    u, v = center
    return (u - k.c_u) * z / k.f_x, (v - k.c_v) * z / k.f_y

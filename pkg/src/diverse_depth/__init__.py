"""Geometric core of diverse monocular depth estimation.

Twenty candidate depths per object (direct, height-based and decoupled
keypoint equations), robust 3-sigma selection with inverse-variance
fusion, and a variance-based 3D geometry confidence.
"""

from .boxgeom import Box3D, project_box, rotation_matrix
from .camera import CameraIntrinsics, Pixel, backproject_center, normalize_pixel, project_point
from .combiner import FusionResult, fuse, fusion_weights, select_and_combine
from .confidence import conditional_3d_confidence, detection_confidence, uncertainty_loss
from .depthsolver import SOURCES, DepthEstimate, ObjectObservation, pnp_least_squares, solve_all

__version__ = "0.1.0"

__all__ = [
    "Box3D",
    "CameraIntrinsics",
    "DepthEstimate",
    "FusionResult",
    "ObjectObservation",
    "Pixel",
    "SOURCES",
    "backproject_center",
    "conditional_3d_confidence",
    "detection_confidence",
    "fuse",
    "fusion_weights",
    "normalize_pixel",
    "pnp_least_squares",
    "project_box",
    "project_point",
    "rotation_matrix",
    "select_and_combine",
    "solve_all",
    "uncertainty_loss",
]

"""Uncertainty-aware losses and the 3D geometry confidence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .combiner import fusion_weights


def uncertainty_loss(p, p_star, sigma):
    """|p - p*| / sigma + log(sigma).

    Note the residual is L1 (Laplacian form) even though the estimates are
    later fused as Gaussians; the formula is kept as is.
    """
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")
    out = np.abs(np.asarray(p, dtype=float) - p_star) / sigma + np.log(sigma)
    return float(out) if out.ndim == 0 else out


def vertex_distances(vertices, gt, norm: str = "l1") -> np.ndarray:
    d = np.asarray(vertices, dtype=float) - np.asarray(gt, dtype=float)
    if d.shape != (8, 3):
        raise ValueError(f"expected 8 vertices of 3 coordinates, got shape {d.shape}")
    if norm == "l1":
        return np.abs(d).sum(axis=1)
    if norm == "l2":
        return np.linalg.norm(d, axis=1)
    raise ValueError(f"unknown norm {norm!r}")


def box_uncertainty_loss(vertices, gt, sigma_b, norm: str = "l1"):
    """Summed per-vertex distance over sigma_b, plus log(sigma_b).

    ``norm`` picks the per-vertex distance ("l1" default, or "l2").
    ``sigma_b`` may be an array of candidate values.
    """
    sigma_b = np.asarray(sigma_b, dtype=float)
    if np.any(sigma_b <= 0):
        raise ValueError("sigma_b must be positive")
    out = vertex_distances(vertices, gt, norm).sum() / sigma_b + np.log(sigma_b)
    return float(out) if out.ndim == 0 else out


def confidence_from_variance(sigma_sq):
    s = np.asarray(sigma_sq, dtype=float)
    if np.any(s < 0) or np.any(np.isnan(s)):
        raise ValueError("variance must be non-negative")
    out = 1.0 - np.minimum(s, 1.0)
    return float(out) if out.ndim == 0 else out


def conditional_3d_confidence(sigma_c_sq: float, sigma_b_sq: float) -> float:
    if not (sigma_c_sq > 0 and sigma_b_sq > 0):
        raise ValueError("variances must be positive")
    w_c, w_b = fusion_weights([sigma_c_sq, sigma_b_sq])
    return float(w_c * confidence_from_variance(sigma_c_sq) + w_b * confidence_from_variance(sigma_b_sq))


def detection_confidence(p_3d_given_2d: float, p_2d: float) -> float:
    for name, v in (("p_3d_given_2d", p_3d_given_2d), ("p_2d", p_2d)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {v}")
    return p_3d_given_2d * p_2d


@dataclass(frozen=True)
class ConfidenceBreakdown:
    d_c: float
    d_b: float
    p_3d_given_2d: float
    p_2d: float
    p_m: float

    @classmethod
    def compute(cls, sigma_c_sq: float, sigma_b_sq: float, p_2d: float) -> "ConfidenceBreakdown":
        p3 = conditional_3d_confidence(sigma_c_sq, sigma_b_sq)
        return cls(
            d_c=confidence_from_variance(sigma_c_sq),
            d_b=confidence_from_variance(sigma_b_sq),
            p_3d_given_2d=p3,
            p_2d=p_2d,
            p_m=detection_confidence(p3, p_2d),
        )

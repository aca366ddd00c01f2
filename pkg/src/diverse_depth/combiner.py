"""Inverse-variance fusion and robust iterative 3-sigma selection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .depthsolver import SOURCE_INDEX, DepthEstimate


class NoUsableDepthError(ValueError):
    pass


def fusion_weights(variances) -> np.ndarray:
    var = np.asarray(variances, dtype=float)
    if var.size == 0:
        raise ValueError("need at least one variance")
    if not (var > 0).all():
        raise ValueError("variances must be strictly positive")
    inv = 1.0 / var
    return inv / inv.sum()


def fuse(means, variances) -> tuple[float, float]:
    """Fused mean and variance of a set of independent Gaussians.

    The variance is sum(w_i^2 var_i), which equals 1 / sum(1 / var_i).
    """
    mu = np.asarray(means, dtype=float)
    var = np.asarray(variances, dtype=float)
    if mu.shape != var.shape:
        raise ValueError(f"means and variances differ in shape: {mu.shape} vs {var.shape}")
    w = fusion_weights(var)
    # centered sum: exact for symmetric spreads, less cancellation for large depths
    ref = float(mu.flat[0])
    mean = ref + float(w @ (mu - ref))
    if mu.size > 1:
        lo, hi = mu.min(), mu.max()
        mean = min(max(mean, float(lo)), float(hi))  # rounding can step 1 ulp outside
    return mean, float((w * w) @ var)


@dataclass(frozen=True)
class GaussianSet:
    members: tuple[tuple[float, float], ...]
    mu_s: float
    var_s: float

    @classmethod
    def of(cls, members) -> "GaussianSet":
        members = tuple((float(m), float(v)) for m, v in members)
        mu, var = fuse([m for m, _ in members], [v for _, v in members])
        return cls(members, mu, var)


@dataclass(frozen=True)
class FusionResult:
    combined_depth: float
    combined_variance: float
    selected: tuple[str, ...]
    rejected: tuple[str, ...]
    iterations: int
    invalid: tuple[str, ...] = ()
    trace: tuple[tuple[float, float, int], ...] = field(default=(), repr=False)  # (mu_s, var_s, |S|) per pass


def select_and_combine(estimates: list[DepthEstimate]) -> FusionResult:
    """Robust depth selection and combination.

    S starts with the minimum-variance estimate (ties: lowest source
    index). Each pass fuses S, then admits every other estimate strictly
    inside (mu_s - 3 sigma_s, mu_s + 3 sigma_s). The loop stops on the first
    pass that admits nothing; the last fused mean is the combined depth.
    """
    valid = sorted((e for e in estimates if e.valid), key=lambda e: SOURCE_INDEX.get(e.source, len(SOURCE_INDEX)))
    invalid = tuple(e.source for e in estimates if not e.valid)
    if not valid:
        raise NoUsableDepthError("no usable depth: every estimate is invalid")

    z = np.array([e.value for e in valid])
    var = np.array([e.sigma for e in valid]) ** 2
    in_s = np.zeros(len(valid), dtype=bool)
    in_s[int(np.argmin(var))] = True  # argmin returns the first minimum

    trace = []
    while True:
        mu, var_s = fuse(z[in_s], var[in_s])
        trace.append((mu, var_s, int(in_s.sum())))
        half = 3.0 * np.sqrt(var_s)
        new = ~in_s & (z > mu - half) & (z < mu + half)
        if not new.any():
            break
        in_s |= new

    return FusionResult(
        combined_depth=mu,
        combined_variance=var_s,
        selected=tuple(e.source for e, s in zip(valid, in_s) if s),
        rejected=tuple(e.source for e, s in zip(valid, in_s) if not s),
        iterations=len(trace),
        invalid=invalid,
        trace=tuple(trace),
    )

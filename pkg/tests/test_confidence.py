import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diverse_depth.confidence import (
    ConfidenceBreakdown,
    box_uncertainty_loss,
    conditional_3d_confidence,
    confidence_from_variance,
    detection_confidence,
    uncertainty_loss,
)
from diverse_depth.evaluate import grid_argmin


def test_uncertainty_loss_examples():
    assert uncertainty_loss(1.0, 1.0, 1.0) == 0.0
    assert uncertainty_loss(3.0, 1.0, 2.0) == pytest.approx(1 + math.log(2))
    with pytest.raises(ValueError):
        uncertainty_loss(1, 1, 0)


@pytest.mark.parametrize("e", [0.1, 1.0, 7.3])
def test_uncertainty_loss_minimizer(e):
    s = grid_argmin(lambda s: uncertainty_loss(e, 0.0, s), e / 50, e * 50)
    assert s == pytest.approx(e, rel=1e-3)


def test_box_loss_examples():
    gt = np.arange(24, dtype=float).reshape(8, 3)
    assert box_uncertainty_loss(gt, gt, 1.0) == 0.0
    off = gt.copy()
    off[:, 1] += 0.25
    assert box_uncertainty_loss(off, gt, 2.0) == pytest.approx(1 + math.log(2))
    off = gt + np.array([0.3, 0.4, 0.0])
    assert box_uncertainty_loss(off, gt, 1.0, norm="l2") == pytest.approx(8 * 0.5)
    assert box_uncertainty_loss(off, gt, 1.0, norm="l1") == pytest.approx(8 * 0.7)
    with pytest.raises(ValueError):
        box_uncertainty_loss(gt, gt, -1.0)
    with pytest.raises(ValueError):
        box_uncertainty_loss(gt[:7], gt[:7], 1.0)


def test_box_loss_minimizer():
    rng = np.random.default_rng(3)
    gt = rng.normal(size=(8, 3))
    v = gt + rng.normal(scale=0.2, size=(8, 3))
    total = np.abs(v - gt).sum()
    s = grid_argmin(lambda s: box_uncertainty_loss(v, gt, s), total / 50, total * 50)
    assert s == pytest.approx(total, rel=1e-3)


def test_confidence_examples():
    assert confidence_from_variance(0.0) == 1.0
    assert confidence_from_variance(0.25) == 0.75
    assert confidence_from_variance(3.0) == 0.0
    with pytest.raises(ValueError):
        confidence_from_variance(-0.1)


def test_conditional_examples():
    assert conditional_3d_confidence(0.5, 0.5) == pytest.approx(0.5)
    # w_c = 10 / 10.1, d_c = 0.9, d_b = 0
    assert conditional_3d_confidence(0.1, 10.0) == pytest.approx(0.9 * 10 / 10.1, abs=1e-12)
    assert conditional_3d_confidence(0.1, 10.0) == pytest.approx(0.8911, abs=1e-4)
    assert conditional_3d_confidence(1.0, 4.0) == 0.0
    with pytest.raises(ValueError):
        conditional_3d_confidence(0.0, 1.0)


def test_detection_examples():
    assert detection_confidence(1.0, 0.7) == 0.7
    assert detection_confidence(0.0, 0.42) == 0.0
    assert detection_confidence(0.8911, 0.9) == pytest.approx(0.80199)
    with pytest.raises(ValueError):
        detection_confidence(1.2, 0.5)
    b = ConfidenceBreakdown.compute(0.1, 10.0, 0.9)
    assert b.p_m == pytest.approx(b.p_3d_given_2d * 0.9) and b.d_c == pytest.approx(0.9) and b.d_b == 0.0


pos_var = st.floats(1e-6, 20)


@given(pos_var, pos_var, st.floats(0, 1))
def test_confidence_bounds(vc, vb, p2d):
    dc, db = confidence_from_variance(vc), confidence_from_variance(vb)
    p3 = conditional_3d_confidence(vc, vb)
    assert 0 <= p3 <= 1
    assert min(dc, db) - 1e-12 <= p3 <= max(dc, db) + 1e-12
    pm = detection_confidence(p3, p2d)
    assert 0 <= pm <= min(p3, p2d)


@given(st.floats(0, 10), st.floats(0, 10))
def test_confidence_monotone(a, b):
    lo, hi = sorted((a, b))
    assert confidence_from_variance(lo) >= confidence_from_variance(hi)

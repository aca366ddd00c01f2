import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diverse_depth.boxgeom import (
    DIAGONAL_PAIRS,
    Box3D,
    NotProjectableError,
    alpha_yaw_convert,
    box_vertices_object_frame,
    object_to_camera,
    project_box,
    rotation_matrix,
)
from diverse_depth.camera import project_point

angles = st.floats(-10, 10, allow_nan=False)


def test_rotation_examples():
    np.testing.assert_array_equal(rotation_matrix(0.0), np.eye(3))
    np.testing.assert_allclose(rotation_matrix(math.pi / 2), [[0, 0, 1], [0, 1, 0], [-1, 0, 0]], atol=1e-15)


@given(angles)
def test_rotation_orthonormal(theta):
    r = rotation_matrix(theta)
    np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(r @ rotation_matrix(-theta), np.eye(3), atol=1e-12)


def test_vertex_layout():
    v = box_vertices_object_frame((2, 2, 4))
    np.testing.assert_array_equal(v[0], (2, 1, 1))
    # bottom face first (y = +h/2, y points down), top face above it
    assert np.all(v[:4, 1] == 1) and np.all(v[4:, 1] == -1)
    np.testing.assert_array_equal(v[4:, [0, 2]], v[:4, [0, 2]])
    for face in (0, 4):
        for i in range(4):
            j = face + (i + 2) % 4
            np.testing.assert_array_equal(v[face + i, [0, 2]], -v[j, [0, 2]])
    np.testing.assert_allclose(np.linalg.norm(v, axis=1), math.sqrt(16 + 4 + 4) / 2)
    for p in v:
        assert any(np.array_equal(p, -q) for q in v)


def test_object_to_camera_examples():
    assert tuple(object_to_camera((0, 0, 0), Box3D((1, 2, 10), (1, 1, 1), 0.3))) == (1, 2, 10)
    np.testing.assert_allclose(object_to_camera((2, 1, 1), Box3D((0, 0, 10), (1, 1, 1), 0.0)), (2, 1, 11))
    np.testing.assert_allclose(object_to_camera((2, 0, 0), Box3D((0, 0, 10), (1, 1, 1), math.pi / 2)), (0, 0, 8), atol=1e-12)


def test_project_box_on_axis(k_simple):
    kps, H = project_box(Box3D((0, 0, 10), (2, 1.6, 4), 0.0), k_simple)
    assert H.H5 == pytest.approx(700 * 2 / 10, rel=1e-12)
    assert kps.center_3d_projected == (600, 200)
    assert all(h > 0 for h in H)


def test_project_box_composition(boxes, k_kitti):
    for box in boxes[:50]:
        kps, H = project_box(box, k_kitti)
        cam = object_to_camera(box_vertices_object_frame(box.dims), box)
        for px, p in zip(kps.vertices, cam):
            assert px == pytest.approx(project_point(p, k_kitti), rel=1e-14)
        for a, b in DIAGONAL_PAIRS:
            for face in (0, 4):
                assert cam[face + a, 2] + cam[face + b, 2] == pytest.approx(2 * box.z, rel=1e-14)
        assert all(h > 0 for h in H)


def test_project_box_behind(k_simple):
    with pytest.raises(NotProjectableError, match="box not fully projectable"):
        project_box(Box3D((0, 0, 1.0), (1.5, 1.6, 4.0), math.pi / 2), k_simple)


def test_box_validation():
    with pytest.raises(ValueError):
        Box3D((0, 0, 10), (0, 1, 1), 0)
    with pytest.raises(ValueError):
        Box3D((0, 0, -1), (1, 1, 1), 0)


def test_alpha_yaw_examples():
    assert alpha_yaw_convert(0.0, 0.0, 10.0) == 0.0
    assert alpha_yaw_convert(0.3, 0.0, 5.0, to_yaw=False) == pytest.approx(0.3)


@given(st.floats(-math.pi, math.pi), st.floats(-40, 40), st.floats(0.5, 80))
def test_alpha_yaw_round_trip(alpha, x, z):
    theta = alpha_yaw_convert(alpha, x, z)
    assert -math.pi < theta <= math.pi
    back = alpha_yaw_convert(theta, x, z, to_yaw=False)
    d = (back - alpha + math.pi) % (2 * math.pi) - math.pi
    assert abs(d) < 1e-9

from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diverse_depth.boxgeom import Box3D
from diverse_depth.kitti import (
    KittiParseError,
    NonLocalizableLabelError,
    box_to_label,
    format_label_line,
    label_to_box,
    parse_calib,
    parse_label_line,
    parse_labels,
    read_calib,
    read_labels,
    roundtrip_eval,
)

FIX = Path(__file__).parent / "fixtures" / "kitti"
LINE = "Car 0.00 0 -1.58 587.01 173.33 614.12 200.12 1.65 1.67 3.64 -0.65 1.71 46.70 -1.59"


def test_parse_line():
    lab = parse_label_line(LINE)
    assert lab.type == "Car" and lab.occluded == 0 and lab.score is None
    assert lab.dims == (1.65, 1.67, 3.64)
    assert lab.location == (-0.65, 1.71, 46.70)
    assert lab.rotation_y == -1.59
    assert parse_label_line(LINE + " 0.75").score == 0.75
    assert format_label_line(lab) == LINE


def test_parse_errors():
    with pytest.raises(KittiParseError, match="expected 15 or 16 fields, got 14"):
        parse_label_line(" ".join(LINE.split()[:14]), 3, "f.txt")
    bad = LINE.replace("46.70", "abc")
    with pytest.raises(KittiParseError) as ei:
        parse_labels("\n" + LINE + "\n" + bad, "f.txt")
    assert ei.value.line == 3 and ei.value.column == 14
    assert str(ei.value).startswith("f.txt:3:14:")


def test_dontcare_not_localizable():
    lab = parse_label_line("DontCare -1 -1 -10 503.89 169.71 590.61 190.13 -1 -1 -1 -1000 -1000 -1000 -10")
    assert lab.type == "DontCare"
    with pytest.raises(NonLocalizableLabelError):
        label_to_box(lab)


def test_label_to_box():
    box = label_to_box(parse_label_line(LINE))
    assert box.center == pytest.approx((-0.65, 1.71 - 0.825, 46.70))
    assert box.dims == (1.65, 1.67, 3.64) and box.yaw == -1.59


def test_calib():
    k = read_calib(FIX / "calib_simple.txt").intrinsics
    assert (k.f_x, k.f_y, k.c_u, k.c_v) == (700, 700, 600, 200)
    k = read_calib(FIX / "calib_000001.txt").intrinsics
    assert (k.f_x, k.c_u, k.c_v) == (721.5377, 609.5593, 172.854)
    with pytest.raises(KittiParseError, match="no P2"):
        parse_calib("P0: 1 0 0 0 0 1 0 0 0 0 1 0")
    with pytest.raises(KittiParseError, match="12 values"):
        parse_calib("P2: 1 0 0")


@given(
    st.floats(-20, 20), st.floats(0.5, 2.5), st.floats(2, 80),
    st.floats(0.5, 3), st.floats(0.5, 3), st.floats(0.5, 6), st.floats(-3.1, 3.1),
)
def test_box_label_roundtrip(x, yb, z, h, w, l, yaw):
    box = Box3D((x, yb - h / 2, z), (h, w, l), yaw)
    back = label_to_box(box_to_label(box))
    np.testing.assert_allclose(back.center, box.center, atol=1e-12)
    assert back.dims == box.dims and back.yaw == box.yaw


def test_fixture_files_parse():
    for p in sorted(FIX.glob("label_*.txt")):
        for lab in read_labels(p):
            assert lab.type


def test_roundtrip_exact():
    calib = read_calib(FIX / "calib_000001.txt")
    total = 0
    for p in sorted(FIX.glob("label_*.txt")):
        labels = read_labels(p)
        res = roundtrip_eval(labels, calib)
        assert len(res.rows) + len(res.skipped) == len(labels)
        assert res.max_rel_error < 1e-6
        assert all(r.pnp_rel_error < 1e-6 for r in res.rows)
        total += len(res.rows)
    assert total >= 6

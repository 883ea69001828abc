import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lidarprop.boxes import BBox2D
from lidarprop.calib import (CalibrationSet, format_calib, kitti_like_calib, parse_calib,
                             parse_calib_text, project, project_cluster_bbox, project_points)
from lidarprop.errors import FormatError

from conftest import simple_calib
from oracles import chain_projection

KITTI_TEXT = """\
P0: 7.070493000000e+02 0.000000000000e+00 6.040814000000e+02 0.000000000000e+00 0.000000000000e+00 7.070493000000e+02 1.805066000000e+02 0.000000000000e+00 0.000000000000e+00 0.000000000000e+00 1.000000000000e+00 0.000000000000e+00
P1: 7.070493000000e+02 0.000000000000e+00 6.040814000000e+02 -3.797842000000e+02 0.000000000000e+00 7.070493000000e+02 1.805066000000e+02 0.000000000000e+00 0.000000000000e+00 0.000000000000e+00 1.000000000000e+00 0.000000000000e+00
P2: 7.070493000000e+02 0.000000000000e+00 6.040814000000e+02 4.575831000000e+01 0.000000000000e+00 7.070493000000e+02 1.805066000000e+02 -3.454157000000e-01 0.000000000000e+00 0.000000000000e+00 1.000000000000e+00 4.981016000000e-03
P3: 7.070493000000e+02 0.000000000000e+00 6.040814000000e+02 -3.341081000000e+02 0.000000000000e+00 7.070493000000e+02 1.805066000000e+02 2.330660000000e+00 0.000000000000e+00 0.000000000000e+00 1.000000000000e+00 3.201153000000e-03
R0_rect: 9.999128000000e-01 1.009263000000e-02 -8.511932000000e-03 -1.012729000000e-02 9.999406000000e-01 -4.037671000000e-03 8.470675000000e-03 4.123522000000e-03 9.999556000000e-01
Tr_velo_to_cam: 6.927964000000e-03 -9.999722000000e-01 -2.757829000000e-03 -2.457729000000e-02 -1.162982000000e-03 2.749836000000e-03 -9.999955000000e-01 -6.127237000000e-02 9.999753000000e-01 6.931141000000e-03 -1.143899000000e-03 -3.321029000000e-01
Tr_imu_to_velo: 9.999976000000e-01 7.553071000000e-04 -2.035826000000e-03 -8.086759000000e-01 -7.854027000000e-04 9.998898000000e-01 -1.482298000000e-02 3.195559000000e-01 2.024406000000e-03 1.482454000000e-02 9.998881000000e-01 -7.997231000000e-01
"""

IDENTITY_TEXT = """\
P2: 1 0 0 0 0 1 0 0 0 0 1 0
R0_rect: 1 0 0 0 1 0 0 0 1
Tr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0
"""


def _split_parse(text):
    out = {}
    for line in text.strip().split("\n"):
        key, vals = line.split(": ")
        out[key] = [float(v) for v in vals.split(" ")]
    return out


def test_parse_identity(tmp_path):
    path = tmp_path / "calib.txt"
    path.write_text(IDENTITY_TEXT)
    calib = parse_calib(path)
    np.testing.assert_array_equal(calib.P, np.eye(3, 4))
    np.testing.assert_array_equal(calib.R_rect, np.eye(3))
    np.testing.assert_array_equal(calib.T_velo_to_cam, np.eye(3, 4))
    assert calib.image_size == (1242, 375)


def test_parse_missing_key():
    text = "\n".join(l for l in IDENTITY_TEXT.splitlines() if not l.startswith("Tr_velo"))
    with pytest.raises(FormatError, match="Tr_velo_to_cam"):
        parse_calib_text(text)


def test_parse_wrong_count():
    with pytest.raises(FormatError, match="R0_rect"):
        parse_calib_text(IDENTITY_TEXT.replace("R0_rect: 1 0 0 0 1 0 0 0 1", "R0_rect: 1 0 0 1"))


def test_parse_real_kitti_matches_throwaway_parser():
    calib = parse_calib_text(KITTI_TEXT)
    ref = _split_parse(KITTI_TEXT)
    np.testing.assert_array_equal(calib.P.ravel(), ref["P2"])
    np.testing.assert_array_equal(calib.R_rect.ravel(), ref["R0_rect"])
    np.testing.assert_array_equal(calib.T_velo_to_cam.ravel(), ref["Tr_velo_to_cam"])


def test_kitti_like_calib_matches_fixture():
    a = kitti_like_calib()
    b = parse_calib_text(KITTI_TEXT)
    np.testing.assert_array_equal(a.P, b.P)
    np.testing.assert_array_equal(a.T_velo_to_cam, b.T_velo_to_cam)


def test_image_size_override():
    assert parse_calib_text(IDENTITY_TEXT, image_size=(640, 480)).image_size == (640, 480)


def test_format_parse_round_trip():
    calib = parse_calib_text(KITTI_TEXT, image_size=(800, 300))
    again = parse_calib_text(format_calib(calib))
    np.testing.assert_array_equal(again.P, calib.P)
    np.testing.assert_array_equal(again.R_rect, calib.R_rect)
    np.testing.assert_array_equal(again.T_velo_to_cam, calib.T_velo_to_cam)
    assert again.image_size == (800, 300)


def test_non_orthonormal_rect_warns():
    with pytest.warns(UserWarning, match="orthonormal"):
        CalibrationSet(np.eye(3, 4), 1.1 * np.eye(3), np.eye(3, 4))


def test_negative_focal_rejected():
    with pytest.raises(FormatError):
        CalibrationSet(-np.eye(3, 4), np.eye(3), np.eye(3, 4))


def test_optical_axis_point():
    calib = simple_calib(axis_swap=False)
    px = project((0.0, 0.0, 10.0), calib)
    assert px == pytest.approx((50.0, 50.0, 10.0))


def test_behind_camera():
    calib = simple_calib(axis_swap=False)
    assert project((0.0, 0.0, -1.0), calib) is None
    assert project((1.0, 1.0, 0.0), calib) is None


def _random_calib(rng):
    # random rotation via QR, positive focal lengths
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    Tr = np.column_stack([q, rng.normal(size=3)])
    f = rng.uniform(300, 1000)
    P = np.array([[f, 0, rng.uniform(300, 700), rng.normal()],
                  [0, f * rng.uniform(0.9, 1.1), rng.uniform(100, 300), rng.normal()],
                  [0, 0, 1, rng.normal() * 1e-3]])
    a = rng.uniform(-0.01, 0.01)
    R = np.array([[np.cos(a), -np.sin(a), 0], [np.sin(a), np.cos(a), 0], [0, 0, 1]])
    return CalibrationSet(P, R, Tr)


def test_projection_matches_chain_oracle(rng):
    checked = 0
    for _ in range(300):
        calib = _random_calib(rng)
        point = rng.uniform(-30, 30, size=3)
        got = project(point, calib)
        ref = chain_projection(point, calib.P, calib.R_rect, calib.T_velo_to_cam)
        if ref is None:
            assert got is None
            continue
        checked += 1
        assert abs(got.u - ref[0]) < 1e-9 and abs(got.v - ref[1]) < 1e-9
        assert abs(got.depth - ref[2]) < 1e-12
    assert checked > 50


@settings(max_examples=100, deadline=None)
@given(x=st.floats(-5, 5), y=st.floats(-5, 5), z=st.floats(0.5, 50), lam=st.floats(0.1, 10))
def test_scale_along_ray_keeps_pixel(x, y, z, lam):
    calib = simple_calib(f=700.0, cx=600.0, cy=180.0, image_size=(1242, 375), axis_swap=False)
    a = project((x, y, z), calib)
    b = project((lam * x, lam * y, lam * z), calib)
    assert abs(a.u - b.u) < 1e-9 and abs(a.v - b.v) < 1e-9


def test_cluster_bbox_all_behind():
    calib = simple_calib(axis_swap=False)
    pts = np.array([[0, 0, -1.0], [1, 1, -2.0], [0, 1, -3.0]])
    assert project_cluster_bbox(pts, calib) is None


def test_cluster_bbox_two_points():
    calib = simple_calib(axis_swap=False)
    # u = 50 + 100 x / z, v = 50 + 100 y / z at z = 10
    pts = np.array([[-4.0, -4.0, 10.0], [-3.0, -1.0, 10.0]])
    box = project_cluster_bbox(pts, calib)
    assert box.as_tuple() == pytest.approx((10, 10, 20, 40))


def test_cluster_bbox_single_front_point_is_none():
    calib = simple_calib(axis_swap=False)
    assert project_cluster_bbox(np.array([[0, 0, 10.0], [0, 0, -1.0]]), calib) is None


def test_cluster_bbox_outside_image_is_none():
    calib = simple_calib(axis_swap=False)
    pts = np.array([[100.0, 0, 10.0], [110.0, 5.0, 10.0]])
    assert project_cluster_bbox(pts, calib) is None


def test_cluster_bbox_empty_input():
    with pytest.raises(ValueError):
        project_cluster_bbox(np.zeros((0, 3)), simple_calib())


def test_cluster_bbox_matches_fold(rng):
    calib = kitti_like_calib()
    for _ in range(20):
        pts = rng.uniform((5, -3, -1.7), (25, 3, 0.5), size=(100, 3))
        box = project_cluster_bbox(pts, calib)
        l = t = np.inf
        r = b = -np.inf
        for p in pts:
            u, v, _ = chain_projection(p, calib.P, calib.R_rect, calib.T_velo_to_cam)
            l, t, r, b = min(l, u), min(t, v), max(r, u), max(b, v)
        np.testing.assert_allclose(box.as_tuple(), (l, t, r, b), atol=1e-9)


def test_cluster_bbox_contains_every_projection(rng):
    calib = kitti_like_calib()
    pts = rng.uniform((-2, -5, -2), (20, 5, 2), size=(200, 3))
    box = project_cluster_bbox(pts, calib)
    uv, _, ok = project_points(pts, calib)
    assert ok.sum() < len(pts)
    assert (uv[ok, 0] >= box.left).all() and (uv[ok, 0] <= box.right).all()
    assert (uv[ok, 1] >= box.top).all() and (uv[ok, 1] <= box.bottom).all()

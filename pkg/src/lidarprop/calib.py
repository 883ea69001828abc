"""KITTI calibration parsing and LiDAR-to-image projection.

Camera 2 (left color, ``P2``) is the reference camera.  A velodyne point
``p`` maps to the image through

    x_cam = R0_rect @ (Tr_velo_to_cam @ [p, 1])
    [u*w, v*w, w] = P2 @ [x_cam, 1]

Points whose rectified forward coordinate is <= 0 are behind the camera.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .boxes import BBox2D
from .errors import FormatError

DEFAULT_IMAGE_SIZE = (1242, 375)

_REQUIRED = {"P2": (3, 4), "R0_rect": (3, 3), "Tr_velo_to_cam": (3, 4)}


@dataclass(frozen=True)
class CalibrationSet:
    P: np.ndarray
    R_rect: np.ndarray
    T_velo_to_cam: np.ndarray
    image_size: tuple = DEFAULT_IMAGE_SIZE

    def __post_init__(self):
        P = np.asarray(self.P, dtype=np.float64).reshape(3, 4)
        R = np.asarray(self.R_rect, dtype=np.float64).reshape(3, 3)
        T = np.asarray(self.T_velo_to_cam, dtype=np.float64).reshape(3, 4)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "R_rect", R)
        object.__setattr__(self, "T_velo_to_cam", T)
        object.__setattr__(self, "image_size", tuple(int(v) for v in self.image_size))
        if P[0, 0] <= 0 or P[1, 1] <= 0:
            raise FormatError("P2 focal lengths must be positive")
        if np.abs(R @ R.T - np.eye(3)).max() > 1e-3:
            warnings.warn("R0_rect is not orthonormal within 1e-3", stacklevel=3)

    def velo_to_rect(self) -> np.ndarray:
        """4x4 transform from velodyne to rectified camera coordinates."""
        T = np.eye(4)
        T[:3, :] = self.T_velo_to_cam
        R = np.eye(4)
        R[:3, :3] = self.R_rect
        return R @ T

    def with_image_size(self, image_size) -> "CalibrationSet":
        return CalibrationSet(self.P, self.R_rect, self.T_velo_to_cam, image_size)


class PixelPoint(NamedTuple):
    u: float
    v: float
    depth: float


def parse_calib_text(text: str, image_size=None, source="<calib>") -> CalibrationSet:
    values = {}
    for line in text.splitlines():
        if ":" not in line:
            continue
        key, rest = line.split(":", 1)
        try:
            values[key.strip()] = np.array([float(v) for v in rest.split()])
        except ValueError:
            raise FormatError(f"{source}: non-numeric value in key {key.strip()!r}") from None
    mats = {}
    for key, shape in _REQUIRED.items():
        if key not in values:
            raise FormatError(f"{source}: missing key {key}")
        arr = values[key]
        if arr.size != shape[0] * shape[1]:
            raise FormatError(
                f"{source}: {key} has {arr.size} values, expected {shape[0] * shape[1]}"
            )
        mats[key] = arr.reshape(shape)
    if image_size is None:
        if "image_size" in values and values["image_size"].size == 2:
            image_size = tuple(int(v) for v in values["image_size"])
        else:
            image_size = DEFAULT_IMAGE_SIZE
    return CalibrationSet(mats["P2"], mats["R0_rect"], mats["Tr_velo_to_cam"], image_size)


def parse_calib(path, image_size=None) -> CalibrationSet:
    with open(path) as fh:
        return parse_calib_text(fh.read(), image_size=image_size, source=str(path))


def format_calib(calib: CalibrationSet) -> str:
    def row(arr):
        return " ".join(f"{v:.12e}" for v in np.ravel(arr))

    w, h = calib.image_size
    return (
        f"P2: {row(calib.P)}\n"
        f"R0_rect: {row(calib.R_rect)}\n"
        f"Tr_velo_to_cam: {row(calib.T_velo_to_cam)}\n"
        f"image_size: {w} {h}\n"
    )


def write_calib(calib: CalibrationSet, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_calib(calib))


def kitti_like_calib(image_size=DEFAULT_IMAGE_SIZE) -> CalibrationSet:
    """Calibration of KITTI training frame 000000, used for synthetic data."""
    P2 = [
        [7.070493e02, 0.0, 6.040814e02, 4.575831e01],
        [0.0, 7.070493e02, 1.805066e02, -3.454157e-01],
        [0.0, 0.0, 1.0, 4.981016e-03],
    ]
    R0 = [
        [9.999128e-01, 1.009263e-02, -8.511932e-03],
        [-1.012729e-02, 9.999406e-01, -4.037671e-03],
        [8.470675e-03, 4.123522e-03, 9.999556e-01],
    ]
    Tr = [
        [6.927964e-03, -9.999722e-01, -2.757829e-03, -2.457729e-02],
        [-1.162982e-03, 2.749836e-03, -9.999955e-01, -6.127237e-02],
        [9.999753e-01, 6.931141e-03, -1.143899e-03, -3.321029e-01],
    ]
    return CalibrationSet(np.array(P2), np.array(R0), np.array(Tr), image_size)


def project_points(xyz, calib: CalibrationSet):
    """Vectorized projection.

    Returns ``(uv, depth, in_front)``; ``uv`` rows for points behind the
    camera are NaN.
    """
    xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
    hom = np.column_stack([xyz, np.ones(len(xyz))])
    cam = hom @ calib.velo_to_rect().T
    depth = cam[:, 2]
    img = cam @ calib.P.T
    w = img[:, 2]
    in_front = (depth > 0) & (w > 0)
    uv = np.full((len(xyz), 2), np.nan)
    uv[in_front] = img[in_front, :2] / w[in_front, None]
    return uv, depth, in_front


def project(point, calib: CalibrationSet) -> Optional[PixelPoint]:
    """Project one point (x, y, z[, intensity]); None when behind the camera.

    Points outside the image rectangle are still returned.
    """
    uv, depth, ok = project_points(np.asarray(point, dtype=np.float64)[:3], calib)
    if not ok[0]:
        return None
    return PixelPoint(float(uv[0, 0]), float(uv[0, 1]), float(depth[0]))


def project_cluster_bbox(points, calib: CalibrationSet) -> Optional[BBox2D]:
    """Bounding box of the projections of the in-front points.

    None when fewer than two points lie in front of the camera or when the
    box does not overlap the image rectangle.  The box is not clipped.
    """
    xyz = np.asarray(points, dtype=np.float64)
    if xyz.size == 0:
        raise ValueError("project_cluster_bbox needs at least one point")
    uv, _, ok = project_points(xyz[:, :3], calib)
    if ok.sum() < 2:
        return None
    uv = uv[ok]
    box = BBox2D(*(float(v) for v in (uv[:, 0].min(), uv[:, 1].min(), uv[:, 0].max(), uv[:, 1].max())))
    if not box.intersects_image(calib.image_size):
        return None
    return box

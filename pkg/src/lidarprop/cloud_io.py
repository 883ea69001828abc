"""Point cloud containers, KITTI velodyne I/O and synthetic scene generation.

Clouds are stored as ``(N, 4)`` float64 arrays of ``x, y, z, intensity`` in
the sensor frame (x forward, y left, z up).  The on-disk format is the KITTI
velodyne layout: consecutive little-endian float32 quadruples, no header.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError, FormatError, SpecError

KITTI_DTYPE = np.dtype("<f4")
RECORD_BYTES = 16
MAX_GROUND_JITTER = 0.02


@dataclass
class PointCloud:
    points: np.ndarray
    frame_id: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.size == 0:
            pts = pts.reshape(0, 4)
        if pts.ndim != 2 or pts.shape[1] != 4:
            raise ValueError(f"points must have shape (N, 4), got {pts.shape}")
        self.points = pts

    def __len__(self):
        return self.points.shape[0]

    @property
    def xyz(self) -> np.ndarray:
        return self.points[:, :3]

    @property
    def intensity(self) -> np.ndarray:
        return self.points[:, 3]

    def subset(self, indices) -> "PointCloud":
        """Cloud made of ``indices`` in the given order."""
        idx = np.asarray(indices, dtype=np.intp)
        return PointCloud(self.points[idx], self.frame_id)

    @classmethod
    def from_xyz(cls, xyz, intensity=None, frame_id: str = "") -> "PointCloud":
        xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
        if intensity is None:
            intensity = np.zeros(len(xyz))
        return cls(np.column_stack([xyz, intensity]), frame_id)


def read_kitti_bin(path, frame_id: str | None = None) -> PointCloud:
    """Load a KITTI velodyne ``.bin`` file.

    Raises FormatError when the byte length is not a multiple of 16 and
    DataError (naming the first offending point) on NaN/Inf values.
    """
    raw = open(path, "rb").read()
    if len(raw) % RECORD_BYTES:
        raise FormatError(
            f"{path}: length {len(raw)} bytes is not a multiple of {RECORD_BYTES}"
        )
    data = np.frombuffer(raw, dtype=KITTI_DTYPE).reshape(-1, 4)
    bad = ~np.isfinite(data).all(axis=1)
    if bad.any():
        first = int(np.flatnonzero(bad)[0])
        raise DataError(f"{path}: non-finite value at point index {first}")
    if frame_id is None:
        frame_id = os.path.splitext(os.path.basename(os.fspath(path)))[0]
    return PointCloud(data.astype(np.float64), frame_id)


def write_kitti_bin(cloud: PointCloud, path) -> None:
    cloud.points.astype(KITTI_DTYPE).tofile(path)


# ---------------------------------------------------------------------------
# synthetic scenes


@dataclass(frozen=True)
class Pedestrian:
    center: tuple[float, float]
    extent: tuple[float, float, float]
    n_points: int


@dataclass(frozen=True)
class GroundTruthObject:
    """A synthesized pedestrian: footprint center, bottom height and extents."""

    center: tuple[float, float]
    z_bottom: float
    extent: tuple[float, float, float]

    @property
    def box_min(self) -> np.ndarray:
        cx, cy = self.center
        dx, dy, _ = self.extent
        return np.array([cx - dx / 2, cy - dy / 2, self.z_bottom])

    @property
    def box_max(self) -> np.ndarray:
        cx, cy = self.center
        dx, dy, dz = self.extent
        return np.array([cx + dx / 2, cy + dy / 2, self.z_bottom + dz])

    def corners(self) -> np.ndarray:
        lo, hi = self.box_min, self.box_max
        return np.array(
            [[a, b, c] for a in (lo[0], hi[0]) for b in (lo[1], hi[1]) for c in (lo[2], hi[2])]
        )


@dataclass
class SceneSpec:
    ground_coeffs: tuple = (-1.73, 0.0, 0.0, 0.0, 0.0, 0.0)
    ground_points: int = 20000
    ground_region: tuple = (0.0, 40.0, -20.0, 20.0)
    ground_jitter: float = MAX_GROUND_JITTER
    pedestrians: list = field(default_factory=list)
    clutter_points: int = 0
    clutter_region: tuple = (0.0, 40.0, -20.0, 20.0, -1.5, 1.0)
    seed: int = 0
    # suite-only settings: when set, each frame draws its own pedestrians
    random_pedestrians: tuple | None = None
    pedestrian_points: int = 400
    pedestrian_x_range: tuple = (8.0, 30.0)

    def validate(self):
        if len(self.ground_coeffs) != 6:
            raise SpecError("ground_coeffs needs 6 values")
        if not 0 <= self.ground_jitter <= MAX_GROUND_JITTER:
            raise SpecError(f"ground jitter must lie in [0, {MAX_GROUND_JITTER}] m")
        for p in self.pedestrians:
            if min(p.extent) <= 0:
                raise SpecError(f"pedestrian extent must be positive on all axes: {p.extent}")
            if p.n_points <= 0:
                raise SpecError("pedestrian listed with zero points")
        if self.random_pedestrians is not None:
            lo, hi = self.random_pedestrians
            if not 0 <= lo <= hi:
                raise SpecError(f"bad random pedestrian range {self.random_pedestrians}")
            if self.pedestrian_points <= 0 and hi > 0:
                raise SpecError("random pedestrians requested with zero points")
        if self.ground_points < 0 or self.clutter_points < 0:
            raise SpecError("point counts must be non-negative")


def surface_z(coeffs, x, y):
    c0, c1, c2, c3, c4, c5 = coeffs
    return c0 + c1 * x + c2 * y + c3 * x * x + c4 * x * y + c5 * y * y


def synth_scene(spec: SceneSpec, frame_id: str = "synthetic"):
    """Sample a cloud for ``spec``.

    Returns ``(cloud, objects)`` where ``objects`` lists one
    :class:`GroundTruthObject` per pedestrian.  Ground points come first,
    then pedestrians in declaration order, then clutter.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    xmin, xmax, ymin, ymax = spec.ground_region
    n = spec.ground_points
    gx = rng.uniform(xmin, xmax, n)
    gy = rng.uniform(ymin, ymax, n)
    gz = surface_z(spec.ground_coeffs, gx, gy) + rng.uniform(
        -spec.ground_jitter, spec.ground_jitter, n
    )
    chunks = [np.column_stack([gx, gy, gz, rng.uniform(0, 1, n)])]

    objects = []
    for ped in spec.pedestrians:
        cx, cy = ped.center
        dx, dy, dz = ped.extent
        z0 = float(surface_z(spec.ground_coeffs, cx, cy))
        obj = GroundTruthObject((float(cx), float(cy)), z0, (float(dx), float(dy), float(dz)))
        lo, hi = obj.box_min, obj.box_max
        pts = rng.uniform(lo, hi, size=(ped.n_points, 3))
        chunks.append(np.column_stack([pts, rng.uniform(0, 1, ped.n_points)]))
        objects.append(obj)

    if spec.clutter_points:
        x0, x1, y0, y1, z0, z1 = spec.clutter_region
        pts = rng.uniform((x0, y0, z0), (x1, y1, z1), size=(spec.clutter_points, 3))
        chunks.append(np.column_stack([pts, rng.uniform(0, 1, spec.clutter_points)]))

    return PointCloud(np.vstack(chunks), frame_id), objects


def draw_pedestrians(rng, count, x_range, n_points, min_gap=2.0, half_fov_slope=0.5):
    """Place ``count`` pedestrians inside the forward camera wedge, at least
    ``min_gap`` meters apart (center to center)."""
    peds = []
    for _ in range(1000 * max(count, 1)):
        if len(peds) == count:
            break
        x = rng.uniform(*x_range)
        y = rng.uniform(-half_fov_slope * x, half_fov_slope * x)
        if any(np.hypot(x - p.center[0], y - p.center[1]) < min_gap for p in peds):
            continue
        extent = (rng.uniform(0.4, 0.7), rng.uniform(0.5, 0.8), rng.uniform(1.5, 1.9))
        peds.append(Pedestrian((float(x), float(y)), tuple(map(float, extent)), n_points))
    if len(peds) < count:
        raise SpecError(f"could not place {count} separated pedestrians")
    return peds


def scene_for_frame(spec: SceneSpec, index: int) -> SceneSpec:
    """Concrete scene for frame ``index`` of a synthetic suite."""
    seed = spec.seed + index
    if spec.random_pedestrians is None:
        return replace(spec, seed=seed)
    rng = np.random.default_rng([spec.seed, index, 1])
    lo, hi = spec.random_pedestrians
    count = int(rng.integers(lo, hi + 1))
    peds = draw_pedestrians(rng, count, spec.pedestrian_x_range, spec.pedestrian_points)
    return replace(spec, seed=seed, pedestrians=peds, random_pedestrians=None)


# ---------------------------------------------------------------------------
# scene spec text format: ``key = value`` lines, ``#`` comments


def _floats(value, n=None, key=""):
    try:
        vals = tuple(float(v) for v in value.split())
    except ValueError:
        raise SpecError(f"{key}: expected numbers, got {value!r}") from None
    if n is not None and len(vals) != n:
        raise SpecError(f"{key}: expected {n} values, got {len(vals)}")
    return vals


def parse_scene_spec(text: str) -> SceneSpec:
    spec = SceneSpec()
    peds = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "seed":
            spec.seed = int(value)
        elif key == "ground.coeffs":
            spec.ground_coeffs = _floats(value, 6, key)
        elif key == "ground.points":
            spec.ground_points = int(value)
        elif key == "ground.region":
            spec.ground_region = _floats(value, 4, key)
        elif key == "ground.jitter":
            spec.ground_jitter = float(value)
        elif key == "clutter.points":
            spec.clutter_points = int(value)
        elif key == "clutter.region":
            spec.clutter_region = _floats(value, 6, key)
        elif key == "pedestrian":
            cx, cy, dx, dy, dz, n = _floats(value, 6, key)
            peds.append(Pedestrian((cx, cy), (dx, dy, dz), int(n)))
        elif key == "random.pedestrians":
            lo, hi = _floats(value, 2, key)
            spec.random_pedestrians = (int(lo), int(hi))
        elif key == "random.points":
            spec.pedestrian_points = int(value)
        elif key == "random.x_range":
            spec.pedestrian_x_range = _floats(value, 2, key)
        else:
            raise SpecError(f"line {lineno}: unknown key {key!r}")
    spec.pedestrians = peds
    spec.validate()
    return spec


def dump_scene_spec(spec: SceneSpec) -> str:
    def fmt(vals):
        return " ".join(repr(float(v)) for v in vals)

    lines = [
        f"seed = {spec.seed}",
        f"ground.coeffs = {fmt(spec.ground_coeffs)}",
        f"ground.points = {spec.ground_points}",
        f"ground.region = {fmt(spec.ground_region)}",
        f"ground.jitter = {spec.ground_jitter!r}",
        f"clutter.points = {spec.clutter_points}",
        f"clutter.region = {fmt(spec.clutter_region)}",
    ]
    for p in spec.pedestrians:
        lines.append(f"pedestrian = {fmt(p.center + p.extent)} {p.n_points}")
    if spec.random_pedestrians is not None:
        lo, hi = spec.random_pedestrians
        lines.append(f"random.pedestrians = {lo} {hi}")
        lines.append(f"random.points = {spec.pedestrian_points}")
        lines.append(f"random.x_range = {fmt(spec.pedestrian_x_range)}")
    return "\n".join(lines) + "\n"

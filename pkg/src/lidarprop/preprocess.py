"""Range-dependent downsampling and ground removal.

Received point density falls off with the square of the range, so near
returns dominate a raw scan.  ``downsample`` bins points by 3D range and caps
every bin at ``density_reference * (1 + bin_index)**2`` points.

Ground extraction seeds a floor set from the lowest point of every occupied
x-y grid cell, fits a degree-2 surface ``z = f(x, y)`` by least squares and
labels every point within ``removal_band`` of the surface as ground.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from .cloud_io import PointCloud, surface_z


@dataclass(frozen=True)
class DownsampleParams:
    density_reference: int = 30
    bin_width: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.density_reference < 1:
            raise ValueError("density_reference must be >= 1")
        if not self.bin_width > 0:
            raise ValueError("bin_width must be positive")


def bin_caps(bin_index, density_reference):
    return density_reference * (1 + np.asarray(bin_index, dtype=np.int64)) ** 2


def _bin_rng(seed, frame_id, bin_index):
    return np.random.default_rng([seed, zlib.crc32(frame_id.encode()), int(bin_index)])


def downsample(cloud: PointCloud, params: DownsampleParams) -> PointCloud:
    """Cap per-range-bin point counts; survivors keep their relative order."""
    if len(cloud) == 0:
        return PointCloud(cloud.points.copy(), cloud.frame_id)
    r = np.linalg.norm(cloud.xyz, axis=1)
    bins = np.floor(r / params.bin_width).astype(np.int64)
    keep = np.ones(len(cloud), dtype=bool)
    uniq, counts = np.unique(bins, return_counts=True)
    caps = bin_caps(uniq, params.density_reference)
    for b, count, cap in zip(uniq, counts, caps):
        if count <= cap:
            continue
        members = np.flatnonzero(bins == b)
        rng = _bin_rng(params.seed, cloud.frame_id, b)
        chosen = rng.choice(members, size=int(cap), replace=False)
        keep[members] = False
        keep[chosen] = True
    return PointCloud(cloud.points[keep], cloud.frame_id)


# ---------------------------------------------------------------------------
# ground


@dataclass(frozen=True)
class GroundParams:
    grid_step: float = 0.5
    seed_band: float = 0.20
    removal_band: float = 0.15

    def __post_init__(self):
        if not (self.grid_step > 0 and self.seed_band >= 0 and self.removal_band >= 0):
            raise ValueError("ground parameters must be positive")


@dataclass
class GroundModel:
    coeffs: np.ndarray
    grid_step: float = 0.5
    seed_band: float = 0.20
    removal_band: float = 0.15
    degenerate: bool = False
    floor_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.intp))

    def z(self, x, y):
        return surface_z(self.coeffs, np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))

    def height_above(self, xyz) -> np.ndarray:
        xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
        return xyz[:, 2] - self.z(xyz[:, 0], xyz[:, 1])


def design_matrix(x, y, degree=2):
    cols = [np.ones_like(x)]
    if degree >= 1:
        cols += [x, y]
    if degree >= 2:
        cols += [x * x, x * y, y * y]
    return np.column_stack(cols)


class DegenerateFit(np.linalg.LinAlgError):
    pass


def fit_surface(xyz, degree=2) -> np.ndarray:
    """Least-squares polynomial surface through ``xyz`` via normal equations.

    Returns 6 coefficients ordered ``1, x, y, x^2, xy, y^2``; terms above
    ``degree`` are zero.  Coordinates are centered and scaled before the
    normal equations are formed, then mapped back to the raw basis.  Raises
    DegenerateFit when the normal matrix is rank deficient.
    """
    xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
    x, y, z = xyz[:, 0], xyz[:, 1], xyz[:, 2]
    mx, my = x.mean() if len(x) else 0.0, y.mean() if len(y) else 0.0
    sx = max(np.abs(x - mx).max(initial=0.0), 1e-12)
    sy = max(np.abs(y - my).max(initial=0.0), 1e-12)
    u, v = (x - mx) / sx, (y - my) / sy
    A = design_matrix(u, v, degree)
    N = A.T @ A
    if len(xyz) < A.shape[1] or np.linalg.matrix_rank(N, tol=1e-10 * max(np.abs(N).max(), 1.0)) < A.shape[1]:
        raise DegenerateFit(f"rank-deficient degree-{degree} fit on {len(xyz)} points")
    b = np.linalg.solve(N, A.T @ z)
    full = np.zeros(6)
    full[: len(b)] = b
    a0, a1, a2, a3, a4, a5 = full
    # substitute u = (x - mx)/sx, v = (y - my)/sy and collect raw monomials
    c3 = a3 / sx**2
    c4 = a4 / (sx * sy)
    c5 = a5 / sy**2
    c1 = a1 / sx - 2 * c3 * mx - c4 * my
    c2 = a2 / sy - 2 * c5 * my - c4 * mx
    c0 = a0 - a1 * mx / sx - a2 * my / sy + c3 * mx**2 + c4 * mx * my + c5 * my**2
    return np.array([c0, c1, c2, c3, c4, c5])


def grid_cells(xyz, step):
    return np.floor(np.asarray(xyz)[:, :2] / step).astype(np.int64)


def floor_seed_set(xyz, params: GroundParams):
    """Indices of the grid-minimum seeds and of the full floor set."""
    cells = grid_cells(xyz, params.grid_step)
    _, cell_id = np.unique(cells, axis=0, return_inverse=True)
    cell_id = cell_id.ravel()
    z = xyz[:, 2]
    order = np.lexsort((np.arange(len(z)), z, cell_id))
    first = np.ones(len(order), dtype=bool)
    first[1:] = cell_id[order[1:]] != cell_id[order[:-1]]
    seeds = order[first]
    seed_z = np.empty(cell_id.max() + 1)
    seed_z[cell_id[seeds]] = z[seeds]
    floor = np.flatnonzero(z - seed_z[cell_id] <= params.seed_band)
    return np.sort(seeds), floor


def extract_ground(cloud: PointCloud, params: GroundParams = GroundParams()):
    """Fit the ground surface and return ``(GroundModel, ground_indices)``."""
    xyz = cloud.xyz
    if len(xyz) == 0:
        model = GroundModel(np.zeros(6), params.grid_step, params.seed_band,
                            params.removal_band, degenerate=True)
        return model, np.zeros(0, dtype=np.intp)
    seeds, floor = floor_seed_set(xyz, params)
    degenerate = False
    try:
        coeffs = fit_surface(xyz[floor], degree=2)
    except DegenerateFit:
        coeffs = np.zeros(6)
        coeffs[0] = np.median(xyz[seeds, 2])
        degenerate = True
    model = GroundModel(coeffs, params.grid_step, params.seed_band, params.removal_band,
                        degenerate, floor)
    ground = np.flatnonzero(np.abs(model.height_above(xyz)) <= params.removal_band)
    return model, ground


def remove_ground(cloud: PointCloud, ground_indices):
    """Drop ``ground_indices``; returns ``(cloud, old_to_new)`` with -1 for removed points."""
    idx = np.asarray(ground_indices, dtype=np.intp).ravel()
    n = len(cloud)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"ground index out of range for cloud of {n} points")
    keep = np.ones(n, dtype=bool)
    keep[idx] = False
    mapping = np.full(n, -1, dtype=np.intp)
    mapping[keep] = np.arange(keep.sum())
    return PointCloud(cloud.points[keep], cloud.frame_id), mapping

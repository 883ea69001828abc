"""DBSCAN over 3D points backed by a uniform-grid spatial index."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from itertools import product

import numpy as np

from .cloud_io import PointCloud


@dataclass(frozen=True)
class DbscanParams:
    eps: float = 0.5
    min_pts: int = 10

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.min_pts < 1:
            raise ValueError("min_pts must be >= 1")


@dataclass(frozen=True)
class Extent3:
    mins: tuple
    maxs: tuple

    @property
    def dx(self) -> float:
        return self.maxs[0] - self.mins[0]

    @property
    def dy(self) -> float:
        return self.maxs[1] - self.mins[1]

    @property
    def dz(self) -> float:
        return self.maxs[2] - self.mins[2]

    @property
    def sizes(self):
        return (self.dx, self.dy, self.dz)


@dataclass
class Cluster:
    id: int
    point_indices: np.ndarray
    extent: Extent3
    centroid: tuple

    def __len__(self):
        return len(self.point_indices)


class SpatialIndex:
    """Hash grid over 3D points; cell key is ``floor(coord / cell)`` per axis.

    Points are stored sorted by cell so every occupied cell is a contiguous
    slice of ``order``.
    """

    def __init__(self, xyz, cell: float):
        if not cell > 0:
            raise ValueError("cell size must be positive")
        self.xyz = np.ascontiguousarray(np.asarray(xyz, dtype=np.float64).reshape(-1, 3))
        self.cell = float(cell)
        keys = np.floor(self.xyz / self.cell).astype(np.int64)
        self.order = np.lexsort((keys[:, 2], keys[:, 1], keys[:, 0]))
        sorted_keys = keys[self.order]
        self.cells = {}
        if len(sorted_keys):
            breaks = np.flatnonzero(np.any(np.diff(sorted_keys, axis=0) != 0, axis=1)) + 1
            starts = np.concatenate([[0], breaks])
            ends = np.concatenate([breaks, [len(sorted_keys)]])
            for s, e in zip(starts, ends):
                self.cells[tuple(int(k) for k in sorted_keys[s])] = (int(s), int(e))

    def __len__(self):
        return len(self.xyz)

    def cell_of(self, point):
        return tuple(int(k) for k in np.floor(np.asarray(point[:3], dtype=np.float64) / self.cell))

    def candidates(self, center, radius) -> np.ndarray:
        center = np.asarray(center[:3], dtype=np.float64)
        lo = np.floor((center - radius) / self.cell).astype(np.int64)
        hi = np.floor((center + radius) / self.cell).astype(np.int64)
        n_range = int(np.prod(hi - lo + 1))
        if n_range >= len(self.cells):
            return np.arange(len(self.xyz))
        parts = []
        for key in product(*(range(a, b + 1) for a, b in zip(lo, hi))):
            span = self.cells.get(key)
            if span is not None:
                parts.append(self.order[span[0]:span[1]])
        if not parts:
            return np.zeros(0, dtype=np.intp)
        return np.concatenate(parts)

    def query(self, center, radius) -> np.ndarray:
        """Sorted indices of points within Euclidean ``radius`` (inclusive)."""
        if not radius > 0:
            raise ValueError("radius must be positive")
        cand = self.candidates(center, radius)
        d2 = ((self.xyz[cand] - np.asarray(center[:3], dtype=np.float64)) ** 2).sum(axis=1)
        return np.sort(cand[d2 <= radius * radius])

    def query_all(self, radius) -> list:
        """``query(xyz[i], radius)`` for every indexed point, batched per cell."""
        if not radius > 0:
            raise ValueError("radius must be positive")
        reach = int(np.ceil(radius / self.cell))
        offsets = list(product(range(-reach, reach + 1), repeat=3))
        out = [None] * len(self.xyz)
        r2 = radius * radius
        for key, (s, e) in self.cells.items():
            members = self.order[s:e]
            parts = []
            for off in offsets:
                span = self.cells.get((key[0] + off[0], key[1] + off[1], key[2] + off[2]))
                if span is not None:
                    parts.append(self.order[span[0]:span[1]])
            cand = np.sort(np.concatenate(parts))
            diff = self.xyz[members][:, None, :] - self.xyz[cand][None, :, :]
            within = np.einsum("ijk,ijk->ij", diff, diff) <= r2
            for row, m in enumerate(members):
                out[m] = cand[within[row]]
        return out


def build_index(cloud, cell: float) -> SpatialIndex:
    xyz = cloud.xyz if isinstance(cloud, PointCloud) else cloud
    return SpatialIndex(xyz, cell)


def radius_query(index: SpatialIndex, center, radius: float) -> np.ndarray:
    return index.query(center, radius)


def summarize_cluster(cloud, indices, cluster_id: int = 0) -> Cluster:
    idx = np.asarray(indices, dtype=np.intp).ravel()
    if idx.size == 0:
        raise ValueError("cannot summarize an empty cluster")
    xyz = cloud.xyz if isinstance(cloud, PointCloud) else np.asarray(cloud)[:, :3]
    pts = xyz[idx]
    extent = Extent3(tuple(pts.min(axis=0).tolist()), tuple(pts.max(axis=0).tolist()))
    return Cluster(cluster_id, idx, extent, tuple(pts.mean(axis=0).tolist()))


def dbscan_labels(xyz, params: DbscanParams) -> np.ndarray:
    """Per-point cluster label, -1 for noise.

    Clusters are numbered in order of their lowest-index core point; a
    border point reachable from several clusters keeps the first one.
    """
    xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
    n = len(xyz)
    labels = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return labels
    index = SpatialIndex(xyz, params.eps)
    neighbors = index.query_all(params.eps)
    core = np.fromiter((len(nb) >= params.min_pts for nb in neighbors), dtype=bool, count=n)
    demoted = -2
    next_id = 0
    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        labels[i] = next_id
        members = [np.array([i])]
        queue = deque([i])
        while queue:
            nb = neighbors[queue.popleft()]
            fresh = nb[labels[nb] == -1]
            labels[fresh] = next_id
            members.append(fresh)
            queue.extend(fresh[core[fresh]].tolist())
        members = np.concatenate(members)
        if len(members) < params.min_pts:
            # border points taken by earlier clusters left this group too small:
            # its cores become noise, its borders stay claimable by later clusters
            labels[members] = np.where(core[members], demoted, -1)
            continue
        next_id += 1
    labels[labels == demoted] = -1
    return labels


def dbscan(cloud, params: DbscanParams = DbscanParams()):
    """Cluster ``cloud``; returns ``(clusters, noise_indices)``."""
    xyz = cloud.xyz if isinstance(cloud, PointCloud) else np.asarray(cloud)[:, :3]
    labels = dbscan_labels(xyz, params)
    clusters = []
    if len(labels):
        for cid in range(labels.max() + 1):
            clusters.append(summarize_cluster(xyz, np.flatnonzero(labels == cid), cid))
    return clusters, np.flatnonzero(labels == -1)

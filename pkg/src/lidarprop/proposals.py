"""Cluster validation, box correction and proposal generation.

The cluster pipeline is: downsample -> ground removal -> DBSCAN -> extent
validation -> projection -> ground-line extension -> fixed aspect ratio.
``generate_sliding_windows`` is the exhaustive baseline.
"""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .boxes import BBox2D
from .calib import CalibrationSet, project, project_cluster_bbox
from .cloud_io import PointCloud
from .clustering import Cluster, DbscanParams, Extent3, dbscan
from .errors import FormatError
from .preprocess import DownsampleParams, GroundModel, GroundParams, downsample, extract_ground, remove_ground

log = logging.getLogger(__name__)


@dataclass
class Proposal:
    bbox: BBox2D
    source: str
    cluster_extent: Optional[Extent3] = None
    score: Optional[float] = None


@dataclass(frozen=True)
class ValidationParams:
    """Accepted ``[min, max]`` extent range per sensor axis, meters (z is up)."""

    dx: tuple = (0.1, 1.2)
    dy: tuple = (0.1, 1.2)
    dz: tuple = (0.4, 2.2)

    def __post_init__(self):
        for name in ("dx", "dy", "dz"):
            lo, hi = getattr(self, name)
            if not 0 <= lo <= hi:
                raise ValueError(f"bad {name} range {(lo, hi)}")


@dataclass(frozen=True)
class SlidingWindowParams:
    heights: tuple = (32, 48, 72, 108, 162, 243)
    aspect_ratio: float = 0.41
    stride_x: float = 0.25
    stride_y: float = 0.25

    def __post_init__(self):
        h = list(self.heights)
        if not h or min(h) <= 0 or h != sorted(h):
            raise ValueError("window heights must be positive and ascending")
        if not (0 < self.stride_x <= 1 and 0 < self.stride_y <= 1):
            raise ValueError("strides must lie in (0, 1]")
        if not self.aspect_ratio > 0:
            raise ValueError("aspect_ratio must be positive")


@dataclass(frozen=True)
class PipelineParams:
    downsample: DownsampleParams = field(default_factory=DownsampleParams)
    ground: GroundParams = field(default_factory=GroundParams)
    dbscan: DbscanParams = field(default_factory=DbscanParams)
    validation: ValidationParams = field(default_factory=ValidationParams)
    aspect_ratio: Optional[float] = 0.41  # None keeps the projected cluster box

    def __post_init__(self):
        if self.aspect_ratio is not None and not self.aspect_ratio > 0:
            raise ValueError("aspect_ratio must be positive (or None to keep cluster boxes)")


def validate_cluster(cluster: Cluster, params: ValidationParams) -> bool:
    sizes = cluster.extent.sizes
    return all(lo <= s <= hi for s, (lo, hi) in zip(sizes, (params.dx, params.dy, params.dz)))


def adjust_ground_line(bbox: BBox2D, cluster: Cluster, ground: GroundModel,
                       calib: CalibrationSet) -> BBox2D:
    """Extend the box bottom down to the image row of the ground under the
    cluster footprint center.  Never moves the bottom up."""
    cx, cy = cluster.centroid[0], cluster.centroid[1]
    zg = float(ground.z(cx, cy))
    px = project((cx, cy, zg), calib)
    if px is None or px.v <= bbox.bottom:
        return bbox
    bottom = min(px.v, float(calib.image_size[1]))
    if bottom <= bbox.bottom:
        return bbox
    return BBox2D(bbox.left, bbox.top, bbox.right, bottom)


def fix_aspect_ratio(bbox: BBox2D, ratio: float, image_size) -> BBox2D:
    """Set width to ``ratio * height`` around the same horizontal center.

    The box is shifted back inside the image when it sticks out; it is only
    shrunk (symmetrically, to the full image width) when wider than the
    image.
    """
    if not ratio > 0:
        raise ValueError("ratio must be positive")
    img_w = float(image_size[0])
    width = ratio * bbox.height
    if width >= img_w:
        return BBox2D(0.0, bbox.top, img_w, bbox.bottom)
    center = 0.5 * (bbox.left + bbox.right)
    left = center - width / 2
    if left < 0:
        left = 0.0
    elif left + width > img_w:
        left = img_w - width
    return BBox2D(left, bbox.top, left + width, bbox.bottom)


@dataclass
class StageTimes:
    downsample: float = 0.0
    ground: float = 0.0
    cluster: float = 0.0
    proposals: float = 0.0

    @property
    def total(self):
        return self.downsample + self.ground + self.cluster + self.proposals

    def as_dict(self):
        return {"downsample_ms": self.downsample, "ground_ms": self.ground,
                "cluster_ms": self.cluster, "proposals_ms": self.proposals,
                "total_ms": self.total}


@dataclass
class PipelineResult:
    proposals: list
    clusters: list
    ground: Optional[GroundModel]
    nonground: PointCloud
    times: StageTimes


def run_cluster_pipeline(cloud: PointCloud, calib: CalibrationSet,
                         params: PipelineParams = PipelineParams()) -> PipelineResult:
    """Full cluster pipeline with intermediate products and stage timings (ms)."""
    times = StageTimes()
    t0 = time.perf_counter()
    reduced = downsample(cloud, params.downsample)
    t1 = time.perf_counter()
    times.downsample = 1e3 * (t1 - t0)
    if len(reduced) == 0:
        return PipelineResult([], [], None, reduced, times)

    ground, ground_idx = extract_ground(reduced, params.ground)
    objects, _ = remove_ground(reduced, ground_idx)
    t2 = time.perf_counter()
    times.ground = 1e3 * (t2 - t1)

    clusters, _ = dbscan(objects, params.dbscan)
    t3 = time.perf_counter()
    times.cluster = 1e3 * (t3 - t2)

    out = []
    for cluster in clusters:
        if not validate_cluster(cluster, params.validation):
            continue
        box = project_cluster_bbox(objects.xyz[cluster.point_indices], calib)
        if box is None:
            continue
        box = box.clip(calib.image_size)
        if not box.is_valid:
            continue
        box = adjust_ground_line(box, cluster, ground, calib)
        if params.aspect_ratio is not None:
            box = fix_aspect_ratio(box, params.aspect_ratio, calib.image_size)
        if box.is_valid and box.intersects_image(calib.image_size):
            out.append(Proposal(box, f"c{cluster.id}", cluster.extent))
    times.proposals = 1e3 * (time.perf_counter() - t3)
    return PipelineResult(out, clusters, ground, objects, times)


def generate_cluster_proposals(cloud: PointCloud, calib: CalibrationSet,
                               params: PipelineParams = PipelineParams()) -> list:
    return run_cluster_pipeline(cloud, calib, params).proposals


def _positions(extent, size, step):
    """Window origins along one axis; the last one is snapped to the edge."""
    last = extent - size
    pos = list(np.arange(0.0, last + 1e-9, step))
    if pos[-1] < last - 1e-9:
        pos.append(last)
    return pos


def generate_sliding_windows(image_size, params: SlidingWindowParams = SlidingWindowParams()) -> list:
    img_w, img_h = float(image_size[0]), float(image_size[1])
    out = []
    for h in params.heights:
        w = params.aspect_ratio * h
        if h > img_h or w > img_w:
            log.warning("sliding window %.1fx%.1f exceeds image %gx%g, scale skipped",
                        w, h, img_w, img_h)
            continue
        for top in _positions(img_h, h, params.stride_y * h):
            for left in _positions(img_w, w, params.stride_x * w):
                out.append(Proposal(BBox2D(float(left), float(top), float(left + w), float(top + h)),
                                    f"w{len(out)}"))
    return out


def count_sliding_windows(image_size, params: SlidingWindowParams = SlidingWindowParams()) -> int:
    img_w, img_h = float(image_size[0]), float(image_size[1])
    total = 0
    for h in params.heights:
        w = params.aspect_ratio * h
        if h <= img_h and w <= img_w:
            total += len(_positions(img_h, h, params.stride_y * h)) * len(
                _positions(img_w, w, params.stride_x * w))
    return total


# ---------------------------------------------------------------------------
# proposal files
#
# text: one line per proposal, ``frame_id left top right bottom source score``
# with ``-`` for a missing score.  JSON: {"frame_id": ..., "proposals": [...]}


def format_proposals(frame_id: str, proposals) -> str:
    lines = []
    for p in proposals:
        b = p.bbox
        score = "-" if p.score is None else f"{p.score:.6f}"
        lines.append(f"{frame_id} {b.left:.2f} {b.top:.2f} {b.right:.2f} {b.bottom:.2f} {p.source} {score}")
    return "".join(line + "\n" for line in lines)


def write_proposals(path, frame_id: str, proposals) -> None:
    with open(path, "w") as fh:
        fh.write(format_proposals(frame_id, proposals))


def proposals_to_json(frame_id: str, proposals) -> str:
    rows = []
    for p in proposals:
        row = {"bbox": [round(v, 2) for v in p.bbox.as_tuple()], "source": p.source,
               "score": p.score}
        if p.cluster_extent is not None:
            row["extent"] = [round(v, 4) for v in p.cluster_extent.sizes]
        rows.append(row)
    return json.dumps({"frame_id": frame_id, "proposals": rows}, indent=1, sort_keys=True) + "\n"


def read_proposals(path):
    """Parse a text proposal file into ``(frame_id, proposals)``.

    ``frame_id`` is None for an empty file.
    """
    frame_id = None
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 7:
                raise FormatError(f"{path}:{lineno}: expected 7 fields, got {len(parts)}")
            try:
                coords = [float(v) for v in parts[1:5]]
                score = None if parts[6] == "-" else float(parts[6])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-numeric field") from None
            if math.isnan(coords[0]):
                raise FormatError(f"{path}:{lineno}: NaN coordinate")
            frame_id = parts[0]
            out.append(Proposal(BBox2D(*coords), parts[5], None, score))
    return frame_id, out

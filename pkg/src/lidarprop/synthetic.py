"""Synthetic KITTI-shaped datasets: velodyne bins, calib files and labels."""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .boxes import BBox2D
from .calib import CalibrationSet, kitti_like_calib, project_points, write_calib
from .cloud_io import GroundTruthObject, SceneSpec, scene_for_frame, synth_scene, write_kitti_bin
from .evaluation import GroundTruthLabel, LabelList, format_label_line


def object_label(obj: GroundTruthObject, calib: CalibrationSet, frame_id=""):
    """Image label for a synthesized box, or None when it is not visible.

    The box is the hull of the 8 projected corners, clipped to the image;
    truncation is the fraction of the hull area cut away by clipping.
    """
    uv, _, ok = project_points(obj.corners(), calib)
    if not ok.all():
        return None
    raw = BBox2D(uv[:, 0].min(), uv[:, 1].min(), uv[:, 0].max(), uv[:, 1].max())
    if not raw.intersects_image(calib.image_size):
        return None
    box = raw.clip(calib.image_size)
    if not box.is_valid:
        return None
    trunc = 1.0 - box.area / raw.area if raw.area > 0 else 0.0
    return GroundTruthLabel(frame_id, "Pedestrian", box, float(trunc), 0)


def scene_labels(objects, calib: CalibrationSet, frame_id="") -> LabelList:
    labels = [object_label(o, calib, frame_id) for o in objects]
    return LabelList([lab for lab in labels if lab is not None])


def _label_line(obj: GroundTruthObject, label: GroundTruthLabel, calib: CalibrationSet) -> str:
    # KITTI stores h, w, l and the bottom-center location in camera coordinates
    cx, cy = obj.center
    dx, dy, dz = obj.extent
    bottom = np.array([[cx, cy, obj.z_bottom, 1.0]])
    loc = (bottom @ calib.velo_to_rect().T)[0, :3]
    return format_label_line("Pedestrian", label.bbox, label.truncation, label.occlusion,
                             dims=(dz, dy, dx), location=tuple(loc))


@dataclass
class SyntheticFrame:
    frame_id: str
    cloud: object
    objects: list
    labels: LabelList


def make_frame(spec: SceneSpec, index: int, calib: CalibrationSet) -> SyntheticFrame:
    frame_id = f"{index:06d}"
    cloud, objects = synth_scene(scene_for_frame(spec, index), frame_id)
    labels = LabelList()
    for obj in objects:
        lab = object_label(obj, calib, frame_id)
        if lab is not None:
            labels.append(lab)
    return SyntheticFrame(frame_id, cloud, objects, labels)


def write_dataset(spec: SceneSpec, out_dir, frames: int, calib: CalibrationSet | None = None) -> list:
    """Write ``velodyne/``, ``calib/`` and ``label_2/`` for ``frames`` frames.

    Returns the frame ids.  The written velodyne files are float32, so
    reading them back gives the generated cloud to float32 precision.
    """
    calib = calib or kitti_like_calib()
    dirs = {name: os.path.join(out_dir, name) for name in ("velodyne", "calib", "label_2")}
    for d in dirs.values():
        os.makedirs(d, exist_ok=True)
    ids = []
    for i in range(frames):
        frame_id = f"{i:06d}"
        cloud, objects = synth_scene(scene_for_frame(spec, i), frame_id)
        write_kitti_bin(cloud, os.path.join(dirs["velodyne"], frame_id + ".bin"))
        write_calib(calib, os.path.join(dirs["calib"], frame_id + ".txt"))
        lines = []
        for obj in objects:
            lab = object_label(obj, calib, frame_id)
            if lab is not None:
                lines.append(_label_line(obj, lab, calib))
        with open(os.path.join(dirs["label_2"], frame_id + ".txt"), "w") as fh:
            fh.write("".join(line + "\n" for line in lines))
        ids.append(frame_id)
    return ids


def clean_suite_spec(seed: int = 0, points_per_pedestrian: int = 400) -> SceneSpec:
    """2-5 pedestrians per frame on flat ground 1.73 m below the sensor, no clutter."""
    return SceneSpec(seed=seed, random_pedestrians=(2, 5), pedestrian_points=points_per_pedestrian)

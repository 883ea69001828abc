"""
A synthetic scene, end to end
=============================

Build a small street scene, write it in KITTI layout, read it back and
look at where the pedestrians land in the image.
"""

import os
import tempfile

import numpy as np

from lidarprop import (Pedestrian, SceneSpec, kitti_like_calib, read_kitti_bin, synth_scene,
                       write_kitti_bin)
from lidarprop.synthetic import object_label

# three pedestrians standing on ground 1.73 m below the sensor
spec = SceneSpec(
    pedestrians=[Pedestrian((9.0, -3.0), (0.5, 0.6, 1.75), 1200),
                 Pedestrian((14.0, 1.0), (0.6, 0.5, 1.60), 1200),
                 Pedestrian((22.0, 4.5), (0.5, 0.7, 1.80), 1200)],
    clutter_points=300,
    seed=4,
)
cloud, objects = synth_scene(spec, frame_id="000000")
print("points:", len(cloud))
print("z range: %.2f .. %.2f m" % (cloud.xyz[:, 2].min(), cloud.xyz[:, 2].max()))

# the on-disk format is float32 x4, so a round trip keeps float32 precision
out = tempfile.mkdtemp(prefix="lidarprop-demo-")
path = os.path.join(out, "000000.bin")
write_kitti_bin(cloud, path)
back = read_kitti_bin(path)
print("file bytes:", os.path.getsize(path), "max round-trip error:",
      np.abs(back.points - cloud.points).max())

# project every ground-truth box into the left color camera
calib = kitti_like_calib()
for obj in objects:
    lab = object_label(obj, calib)
    b = lab.bbox
    print("pedestrian at x=%5.1f m -> box (%.0f, %.0f, %.0f, %.0f), %.0f px tall"
          % (obj.center[0], b.left, b.top, b.right, b.bottom, b.height))

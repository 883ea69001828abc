"""
How good are cluster proposals?
===============================

Compare cluster proposals with an exhaustive sliding-window search on a
synthetic suite: coverage recall at several IoU thresholds and the number
of regions each scheme hands to a classifier.
"""

import numpy as np

from lidarprop import (count_sliding_windows, generate_cluster_proposals, generate_sliding_windows,
                       kitti_like_calib, max_recall, recall_curve)
from lidarprop.synthetic import clean_suite_spec, make_frame

calib = kitti_like_calib()
spec = clean_suite_spec(seed=1)

cluster_props, windows, labels = {}, {}, {}
all_windows = generate_sliding_windows(calib.image_size)
for i in range(15):
    frame = make_frame(spec, i, calib)
    cluster_props[frame.frame_id] = generate_cluster_proposals(frame.cloud, calib)
    windows[frame.frame_id] = all_windows
    labels[frame.frame_id] = frame.labels

n_labels = sum(len(v) for v in labels.values())
print("frames: %d, pedestrian labels: %d" % (len(labels), n_labels))
print("regions per frame: clustering %.1f, sliding window %d"
      % (np.mean([len(p) for p in cluster_props.values()]), count_sliding_windows(calib.image_size)))

for name, props in (("clustering", cluster_props), ("sliding", windows)):
    missed, recall = max_recall(props, labels, 0.5)
    print("%-10s missed %3d  max recall %.3f" % (name, missed, recall))

# recall falls as the overlap requirement tightens
print("\nIoU   clustering  sliding")
for (t, rc), (_, rs) in zip(recall_curve(cluster_props, labels), recall_curve(windows, labels)):
    print("%.2f  %9.3f  %7.3f" % (t, rc, rs))

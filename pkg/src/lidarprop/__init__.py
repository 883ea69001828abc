"""LiDAR clustering region proposals for pedestrian detection."""
from .boxes import BBox2D, iou_matrix
from .calib import CalibrationSet, kitti_like_calib, parse_calib, project, project_cluster_bbox
from .cloud_io import Pedestrian, PointCloud, SceneSpec, read_kitti_bin, synth_scene, write_kitti_bin
from .clustering import Cluster, DbscanParams, Extent3, build_index, dbscan, radius_query, summarize_cluster
from .evaluation import average_precision, iou, match, max_recall, parse_labels, recall_curve
from .preprocess import DownsampleParams, GroundModel, GroundParams, downsample, extract_ground, remove_ground
from .proposals import (PipelineParams, Proposal, SlidingWindowParams, ValidationParams, adjust_ground_line,
                        count_sliding_windows, fix_aspect_ratio, generate_cluster_proposals, generate_sliding_windows,
                        validate_cluster)

__version__ = "0.1.0"

"""Proposal quality and detection metrics on KITTI-style labels.

Two recall notions are kept apart.  ``max_recall`` measures coverage: a
label counts as found when any proposal overlaps it with IoU above the
threshold, so it is the ceiling a downstream classifier can reach.
``match`` is one-to-one and greedy; a second proposal on an already matched
label is a false positive.  ``average_precision`` is built on ``match``.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .boxes import BBox2D, boxes_to_array, iou_matrix
from .errors import FormatError

RECALL_THRESHOLDS = tuple(round(0.30 + 0.05 * i, 2) for i in range(13))


@dataclass(frozen=True)
class GroundTruthLabel:
    frame_id: str
    cls: str
    bbox: BBox2D
    truncation: float = 0.0
    occlusion: int = 0

    @property
    def height_px(self) -> float:
        return self.bbox.height


class LabelList(list):
    """Labels of the requested classes; ``dontcare`` holds DontCare boxes."""

    def __init__(self, labels=(), dontcare=()):
        super().__init__(labels)
        self.dontcare = list(dontcare)


@dataclass(frozen=True)
class DifficultyTier:
    name: str
    min_height_px: float
    max_occlusion: int
    max_truncation: float

    def admits(self, label: GroundTruthLabel) -> bool:
        return (label.height_px >= self.min_height_px
                and label.occlusion <= self.max_occlusion
                and label.truncation <= self.max_truncation)


TIERS = {
    "easy": DifficultyTier("easy", 40, 0, 0.15),
    "moderate": DifficultyTier("moderate", 25, 1, 0.30),
    "hard": DifficultyTier("hard", 25, 2, 0.50),
}
TIERS["medium"] = TIERS["moderate"]


def iou(a: BBox2D, b: BBox2D) -> float:
    return float(iou_matrix([a.as_tuple()], [b.as_tuple()])[0, 0])


def parse_labels_text(text: str, frame_id: str = "", classes=("Pedestrian",),
                      source="<labels>") -> LabelList:
    labels, dontcare = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) < 15:
            raise FormatError(f"{source}:{lineno}: expected at least 15 fields, got {len(parts)}")
        try:
            trunc = float(parts[1])
            occ = int(float(parts[2]))
            box = BBox2D(*(float(v) for v in parts[4:8]))
        except ValueError:
            raise FormatError(f"{source}:{lineno}: non-numeric field") from None
        if parts[0] == "DontCare":
            dontcare.append(box)
        elif classes is None or parts[0] in classes:
            labels.append(GroundTruthLabel(frame_id, parts[0], box, trunc, occ))
    return LabelList(labels, dontcare)


def parse_labels(path, classes=("Pedestrian",), frame_id: Optional[str] = None) -> LabelList:
    import os

    if frame_id is None:
        frame_id = os.path.splitext(os.path.basename(os.fspath(path)))[0]
    with open(path) as fh:
        return parse_labels_text(fh.read(), frame_id, classes, source=str(path))


def format_label_line(cls, bbox: BBox2D, truncation=0.0, occlusion=0, alpha=0.0,
                      dims=(0.0, 0.0, 0.0), location=(0.0, 0.0, 0.0), ry=0.0) -> str:
    vals = [f"{truncation:.2f}", str(int(occlusion)), f"{alpha:.2f}",
            *(f"{v:.2f}" for v in bbox.as_tuple()),
            *(f"{v:.2f}" for v in dims), *(f"{v:.2f}" for v in location), f"{ry:.2f}"]
    return " ".join([cls, *vals])


# ---------------------------------------------------------------------------
# matching


@dataclass
class MatchResult:
    label_match: list                # per label: matched proposal index or None
    proposal_flags: list             # per proposal: "TP", "FP" or "ignored"
    tp: int = 0
    fp: int = 0
    fn: int = 0
    ignored: int = 0


def _as_array(items):
    if isinstance(items, np.ndarray):
        return items.reshape(-1, 4).astype(np.float64)
    boxes = []
    for it in items:
        if isinstance(it, BBox2D):
            boxes.append(it)
        elif hasattr(it, "bbox"):
            boxes.append(it.bbox)
        else:
            boxes.append(BBox2D(*it))
    return boxes_to_array(boxes)


def processing_order(proposals, ious: np.ndarray) -> list:
    """Descending score; unscored sets go by descending best-label IoU.
    Ties keep proposal index order."""
    n = len(proposals)
    scores = [getattr(p, "score", None) for p in proposals]
    if n and all(s is not None for s in scores):
        key = np.asarray(scores, dtype=np.float64)
    else:
        key = ious.max(axis=1) if ious.shape[1] else np.zeros(n)
    return list(np.argsort(-key, kind="stable"))


def match(proposals, labels, iou_threshold: float = 0.5, dontcare=None,
          ignore=()) -> MatchResult:
    """Greedy one-to-one matching of ``proposals`` against ``labels``.

    Each proposal, in processing order, takes the unmatched label with the
    highest IoU if that IoU is strictly above ``iou_threshold``.  Otherwise
    it is a false positive, unless it overlaps a DontCare box (or a box in
    ``ignore``) above the threshold, in which case it is ignored.
    """
    pb = _as_array(proposals)
    lb = _as_array(labels)
    if dontcare is None:
        dontcare = getattr(labels, "dontcare", [])
    ignore_boxes = _as_array(list(dontcare) + list(ignore))
    ious = iou_matrix(pb, lb)
    ign = iou_matrix(pb, ignore_boxes)
    label_match = [None] * len(lb)
    flags = [None] * len(pb)
    taken = np.zeros(len(lb), dtype=bool)
    for p in processing_order(proposals, ious):
        row = np.where(taken, -1.0, ious[p]) if len(lb) else ious[p]
        best = int(np.argmax(row)) if len(lb) else -1
        if best >= 0 and row[best] > iou_threshold:
            taken[best] = True
            label_match[best] = int(p)
            flags[p] = "TP"
        elif ign.shape[1] and ign[p].max() > iou_threshold:
            flags[p] = "ignored"
        else:
            flags[p] = "FP"
    tp = flags.count("TP")
    return MatchResult(label_match, flags, tp, flags.count("FP"), len(lb) - tp, flags.count("ignored"))


# ---------------------------------------------------------------------------
# coverage recall


def _frames(proposals_per_frame, labels_per_frame):
    if isinstance(proposals_per_frame, dict):
        keys = list(labels_per_frame)
        return [(proposals_per_frame.get(k, []), labels_per_frame[k]) for k in keys]
    return list(zip(proposals_per_frame, labels_per_frame))


def covered_labels(proposals, labels, iou_threshold: float) -> np.ndarray:
    ious = iou_matrix(_as_array(proposals), _as_array(labels))
    if ious.shape[0] == 0:
        return np.zeros(ious.shape[1], dtype=bool)
    return (ious > iou_threshold).any(axis=0)


def max_recall(proposals_per_frame, labels_per_frame, iou_threshold: float = 0.5):
    """``(missed, recall)`` under coverage semantics; recall is 1.0 when
    there are no labels at all."""
    covered = total = 0
    for props, labels in _frames(proposals_per_frame, labels_per_frame):
        c = covered_labels(props, labels, iou_threshold)
        covered += int(c.sum())
        total += len(c)
    recall = covered / total if total else 1.0
    return total - covered, recall


def best_overlaps(proposals_per_frame, labels_per_frame) -> np.ndarray:
    """Best IoU reached by any proposal for every label, frames concatenated."""
    out = []
    for props, labels in _frames(proposals_per_frame, labels_per_frame):
        ious = iou_matrix(_as_array(props), _as_array(labels))
        out.append(ious.max(axis=0) if ious.shape[0] else np.zeros(ious.shape[1]))
    return np.concatenate(out) if out else np.zeros(0)


def recall_curve(proposals_per_frame, labels_per_frame, thresholds=RECALL_THRESHOLDS):
    thresholds = list(thresholds)
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be strictly ascending")
    best = best_overlaps(proposals_per_frame, labels_per_frame)
    if best.size == 0:
        return [(t, 1.0) for t in thresholds]
    return [(t, float((best > t).sum() / best.size)) for t in thresholds]


# ---------------------------------------------------------------------------
# average precision


def eleven_point_ap(precision, recall) -> float:
    precision = np.asarray(precision, dtype=np.float64)
    recall = np.asarray(recall, dtype=np.float64)
    total = 0.0
    for t in np.linspace(0.0, 1.0, 11):
        mask = recall >= t - 1e-12
        total += precision[mask].max() if mask.any() else 0.0
    return total / 11.0


def average_precision(scored_proposals_per_frame, labels_per_frame, tier: DifficultyTier = TIERS["moderate"],
                      iou_threshold: float = 0.5) -> float:
    """11-point interpolated AP of scored proposals on the labels of ``tier``.

    Labels outside the tier act like DontCare regions: matching them is
    neither rewarded nor penalized.
    """
    scores, hits = [], []
    n_pos = 0
    for props, labels in _frames(scored_proposals_per_frame, labels_per_frame):
        if any(getattr(p, "score", None) is None for p in props):
            raise ValueError("every proposal needs a score; supply a score file "
                             "(lines 'frame_id proposal_index score')")
        care = [lab for lab in labels if tier.admits(lab)]
        rest = [lab.bbox for lab in labels if not tier.admits(lab)]
        dc = getattr(labels, "dontcare", [])
        res = match(props, care, iou_threshold, dontcare=dc, ignore=rest)
        n_pos += len(care)
        for p, flag in zip(props, res.proposal_flags):
            if flag != "ignored":
                scores.append(p.score)
                hits.append(flag == "TP")
    if n_pos == 0 or not scores:
        return 0.0
    order = np.argsort(-np.asarray(scores), kind="stable")
    tp = np.cumsum(np.asarray(hits)[order])
    fp = np.cumsum(~np.asarray(hits)[order])
    precision = tp / (tp + fp)
    recall = tp / n_pos
    return float(eleven_point_ap(precision, recall))


# ---------------------------------------------------------------------------
# score files and reports


def read_scores(path) -> dict:
    """``{(frame_id, proposal_index): score}`` from ``frame_id index score`` lines."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 3:
                raise FormatError(f"{path}:{lineno}: expected 'frame_id proposal_index score'")
            try:
                out[(parts[0], int(parts[1]))] = float(parts[2])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-numeric field") from None
    return out


def attach_scores(frame_id, proposals, scores: dict) -> list:
    from dataclasses import replace

    return [replace(p, score=scores.get((frame_id, i))) for i, p in enumerate(proposals)]


@dataclass
class EvalReport:
    frames: int
    labels: int
    missed_labels: int
    max_recall: float
    iou_threshold: float
    recall_curve: list
    region_count_mean: float
    ap: Optional[dict] = None
    timing: dict = field(default_factory=dict)

    def metrics(self) -> list:
        rows = [("frames", self.frames), ("labels", self.labels),
                ("missed_labels", self.missed_labels), ("max_recall", self.max_recall),
                ("iou_threshold", self.iou_threshold),
                ("region_count_mean", self.region_count_mean)]
        for t, r in self.recall_curve:
            rows.append((f"recall@{t:.2f}", r))
        for name, v in (self.ap or {}).items():
            rows.append((f"ap_{name}", v))
        for name, v in self.timing.items():
            rows.append((f"time_{name}", v))
        return rows

    def to_json(self) -> str:
        doc = {"frames": self.frames, "labels": self.labels,
               "missed_labels": self.missed_labels, "max_recall": self.max_recall,
               "iou_threshold": self.iou_threshold,
               "recall_curve": [[t, r] for t, r in self.recall_curve],
               "region_count_mean": self.region_count_mean}
        if self.ap is not None:
            doc["ap"] = self.ap
        if self.timing:
            doc["timing"] = self.timing
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "value"])
        w.writerows(self.metrics())
        return buf.getvalue()

    def curve_csv(self) -> str:
        return format_curve_csv(self.recall_curve)


def format_curve_csv(curve) -> str:
    lines = ["threshold,recall"] + [f"{t:.2f},{r:.6f}" for t, r in curve]
    return "\n".join(lines) + "\n"


def read_curve_csv(path) -> list:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or (lineno == 1 and line.startswith("threshold")):
                continue
            parts = line.split(",")
            try:
                t, r = (float(v) for v in parts)
            except ValueError:
                raise FormatError(f"{path}:{lineno}: expected 'threshold,recall'") from None
            out.append((t, r))
    return out


def evaluate(proposals_per_frame: dict, labels_per_frame: dict, iou_threshold: float = 0.5,
             thresholds=RECALL_THRESHOLDS, with_ap: bool = False) -> EvalReport:
    """Aggregate report over aligned frame dicts."""
    missed, recall = max_recall(proposals_per_frame, labels_per_frame, iou_threshold)
    curve = recall_curve(proposals_per_frame, labels_per_frame, thresholds)
    counts = [len(proposals_per_frame.get(k, [])) for k in labels_per_frame]
    ap = None
    if with_ap:
        ap = {name: average_precision(proposals_per_frame, labels_per_frame, TIERS[name], iou_threshold)
              for name in ("easy", "moderate", "hard")}
    return EvalReport(
        frames=len(labels_per_frame),
        labels=sum(len(v) for v in labels_per_frame.values()),
        missed_labels=missed, max_recall=recall, iou_threshold=iou_threshold,
        recall_curve=curve, region_count_mean=float(np.mean(counts)) if counts else 0.0, ap=ap,
    )

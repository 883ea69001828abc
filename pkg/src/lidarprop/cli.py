"""Command line front end: ``propose``, ``eval``, ``bench``, ``synth``, ``plot``.

Every failure prints one line ``lidarprop-error: <kind>: <message>`` on
stderr and the process exits nonzero.
"""
from __future__ import annotations

import argparse
import csv
import io
import os
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor

from . import config as config_mod
from .calib import parse_calib
from .cloud_io import parse_scene_spec, read_kitti_bin
from .errors import FormatError, LidarPropError
from .evaluation import (RECALL_THRESHOLDS, attach_scores, evaluate, max_recall, parse_labels,
                         read_scores)
from .plot import plot_curve_files
from .proposals import (format_proposals, generate_sliding_windows, proposals_to_json,
                        read_proposals, run_cluster_pipeline)
from .synthetic import write_dataset

ERROR_PREFIX = "lidarprop-error"


class FrameError(LidarPropError):
    kind = "frame"


def _error(kind, message):
    print(f"{ERROR_PREFIX}: {kind}: {message}", file=sys.stderr)


def _frame_ids(directory, ext):
    if not os.path.isdir(directory):
        raise FormatError(f"directory not found: {directory}")
    return sorted(os.path.splitext(f)[0] for f in os.listdir(directory) if f.endswith(ext))


def select_frames(ids, selector):
    """Filter ``ids`` by a selector such as ``"0-9,15"`` (numeric frame ids)
    or a comma list of literal ids.  None keeps everything."""
    if not selector:
        return list(ids)
    wanted_nums, wanted_ids = set(), set()
    for tok in selector.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if "-" in tok:
            lo, hi = tok.split("-", 1)
            wanted_nums.update(range(int(lo), int(hi) + 1))
        elif tok.isdigit():
            wanted_nums.add(int(tok))
            wanted_ids.add(tok)
        else:
            wanted_ids.add(tok)
    return [f for f in ids if f in wanted_ids or (f.isdigit() and int(f) in wanted_nums)]


def _load_config(args):
    cfg = config_mod.load(args.config) if getattr(args, "config", None) else config_mod.PipelineConfig()
    if getattr(args, "seed", None) is not None:
        cfg.set("run.seed", args.seed)
    if getattr(args, "workers", None) is not None:
        cfg.set("run.workers", args.workers)
    if getattr(args, "image_size", None):
        cfg.set("data.image_size", args.image_size)
    return cfg


# ---------------------------------------------------------------------------
# per-frame work (module level so it pickles for the worker pool)


def _frame_proposals(task):
    frame_id, cfg_values, scheme, root = task
    cfg = config_mod.PipelineConfig(dict(cfg_values))
    calib_path = os.path.join(cfg.data_dir("calib", root), frame_id + ".txt")
    try:
        if not os.path.exists(calib_path):
            raise FrameError(f"frame {frame_id}: missing calibration file {calib_path}")
        calib = parse_calib(calib_path, cfg["data.image_size"])
        if scheme == "sliding":
            t0 = time.perf_counter()
            props = generate_sliding_windows(calib.image_size, cfg.sliding_params())
            return frame_id, props, {"total_ms": 1e3 * (time.perf_counter() - t0)}, None
        velo_path = os.path.join(cfg.data_dir("velodyne", root), frame_id + ".bin")
        if not os.path.exists(velo_path):
            raise FrameError(f"frame {frame_id}: missing velodyne file {velo_path}")
        cloud = read_kitti_bin(velo_path, frame_id)
        res = run_cluster_pipeline(cloud, calib, cfg.pipeline_params())
        return frame_id, res.proposals, res.times.as_dict(), None
    except (LidarPropError, OSError, ValueError) as exc:
        kind = getattr(exc, "kind", "io")
        return frame_id, None, None, (kind, str(exc))


def run_frames(cfg, frame_ids, scheme="clustering", root=None):
    """Proposals for every frame, in frame order regardless of worker count."""
    tasks = [(f, dict(cfg.values), scheme, root) for f in frame_ids]
    workers = cfg["run.workers"]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_frame_proposals, tasks, chunksize=1))
    return [_frame_proposals(t) for t in tasks]


def _timing_summary(times):
    if not times:
        return {}
    keys = times[0].keys()
    return {k: statistics.median(t[k] for t in times) for k in keys}


# ---------------------------------------------------------------------------
# commands


def cmd_propose(args) -> int:
    cfg = _load_config(args)
    ids = set(_frame_ids(cfg.data_dir("calib"), ".txt"))
    if args.scheme == "clustering":
        ids |= set(_frame_ids(cfg.data_dir("velodyne"), ".bin"))
    ids = select_frames(sorted(ids), args.frames)
    os.makedirs(args.out, exist_ok=True)
    failed = 0
    times = []
    for frame_id, props, t, err in run_frames(cfg, ids, args.scheme):
        if err:
            _error(*err)
            failed += 1
            continue
        with open(os.path.join(args.out, frame_id + ".txt"), "w") as fh:
            fh.write(format_proposals(frame_id, props))
        with open(os.path.join(args.out, frame_id + ".json"), "w") as fh:
            fh.write(proposals_to_json(frame_id, props))
        times.append(t)
    summary = _timing_summary(times)
    print(f"frames: {len(ids) - failed} ok, {failed} failed")
    for k, v in summary.items():
        print(f"median {k}: {v:.2f}")
    return 1 if failed else 0


def load_eval_inputs(proposals_dir, label_dir, classes, scores_path=None, frames=None):
    """Aligned ``(proposals_by_frame, labels_by_frame)``.

    An empty proposals directory means "no proposals anywhere"; otherwise
    every label frame needs a proposal file and vice versa.
    """
    label_ids = select_frames(_frame_ids(label_dir, ".txt"), frames)
    prop_ids = select_frames(_frame_ids(proposals_dir, ".txt"), frames)
    if prop_ids:
        missing = sorted(set(label_ids) - set(prop_ids))
        extra = sorted(set(prop_ids) - set(label_ids))
        if missing or extra:
            parts = []
            if missing:
                parts.append("no proposals for " + " ".join(missing))
            if extra:
                parts.append("no labels for " + " ".join(extra))
            raise FrameError("frame id mismatch: " + "; ".join(parts))
    scores = read_scores(scores_path) if scores_path else None
    props, labels = {}, {}
    for f in label_ids:
        labels[f] = parse_labels(os.path.join(label_dir, f + ".txt"), classes, frame_id=f)
        plist = []
        if prop_ids:
            _, plist = read_proposals(os.path.join(proposals_dir, f + ".txt"))
        if scores is not None:
            plist = attach_scores(f, plist, scores)
        props[f] = plist
    return props, labels


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    label_dir = args.labels or cfg.data_dir("label")
    props, labels = load_eval_inputs(args.proposals, label_dir, cfg["evaluation.classes"],
                                     args.scores, args.frames)
    report = evaluate(props, labels, cfg["evaluation.iou_threshold"], RECALL_THRESHOLDS,
                      with_ap=args.scores is not None)
    os.makedirs(args.out, exist_ok=True)
    for name, text in (("report.json", report.to_json()), ("report.csv", report.to_csv()),
                       ("recall_curve.csv", report.curve_csv())):
        with open(os.path.join(args.out, name), "w") as fh:
            fh.write(text)
    print(f"labels {report.labels}  missed {report.missed_labels}  max recall {report.max_recall:.4f}")
    if report.ap:
        print("AP " + "  ".join(f"{k} {v:.4f}" for k, v in report.ap.items()))
    return 0


BENCH_FIELDS = ("scheme", "mean_regions", "missed_labels", "max_recall", "roi_time_ms")


def bench_rows(cfg, frame_ids, schemes, sweep=(), root=None):
    """One row per scheme (plus one per swept aspect ratio)."""
    label_dir = cfg.data_dir("label", root)
    labels = {f: parse_labels(os.path.join(label_dir, f + ".txt"), cfg["evaluation.classes"], frame_id=f)
              for f in frame_ids}
    runs = [(s, cfg) for s in schemes]
    for ratio in sweep:
        c = config_mod.PipelineConfig(dict(cfg.values))
        c.set("proposals.aspect_ratio", ratio)
        runs.append((f"clustering@{ratio:.2f}", c))
    rows = []
    for name, c in runs:
        scheme = "sliding" if name == "sliding" else "clustering"
        results = run_frames(c, frame_ids, scheme, root)
        errors = [err for *_, err in results if err]
        if errors:
            raise FrameError(errors[0][1])
        props = {f: p for f, p, _, _ in results}
        missed, recall = max_recall(props, labels, c["evaluation.iou_threshold"])
        counts = [len(p) for p in props.values()]
        roi = statistics.median(t["total_ms"] for *_, t, _ in results) if results else 0.0
        rows.append({"scheme": name, "mean_regions": sum(counts) / len(counts) if counts else 0.0,
                     "missed_labels": missed, "max_recall": recall, "roi_time_ms": roi})
    return rows


def format_bench(rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, BENCH_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({**r, "mean_regions": f"{r['mean_regions']:.2f}",
                    "max_recall": f"{r['max_recall']:.4f}", "roi_time_ms": f"{r['roi_time_ms']:.2f}"})
    text = [f"{'scheme':<18}{'regions/frame':>15}{'missed':>9}{'max recall':>12}{'ROI ms':>10}"]
    for r in rows:
        text.append(f"{r['scheme']:<18}{r['mean_regions']:>15.2f}{r['missed_labels']:>9d}"
                    f"{r['max_recall']:>12.4f}{r['roi_time_ms']:>10.2f}")
    return buf.getvalue(), "\n".join(text) + "\n"


def cmd_bench(args) -> int:
    cfg = _load_config(args)
    ids = select_frames(_frame_ids(cfg.data_dir("label"), ".txt"), args.frames)
    schemes = [args.scheme] if args.scheme else ["clustering", "sliding"]
    sweep = [float(v) for v in args.sweep_aspect.split(",")] if args.sweep_aspect else []
    rows = bench_rows(cfg, ids, schemes, sweep)
    csv_text, table = format_bench(rows)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "bench.csv"), "w") as fh:
            fh.write(csv_text)
        with open(os.path.join(args.out, "bench.txt"), "w") as fh:
            fh.write(table)
    print(table, end="")
    return 0


def cmd_synth(args) -> int:
    with open(args.spec) as fh:
        spec = parse_scene_spec(fh.read())
    calib = None
    if args.image_size:
        from .calib import kitti_like_calib

        calib = kitti_like_calib(config_mod.parse_image_size(args.image_size))
    try:
        ids = write_dataset(spec, args.out, args.count, calib)
    except OSError as exc:
        raise FrameError(f"cannot write dataset to {args.out}: {exc}") from None
    print(f"wrote {len(ids)} frames to {args.out}")
    return 0


def cmd_plot(args) -> int:
    plot_curve_files(args.curves, args.out)
    print(f"wrote {args.out}")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _error("usage", f"{self.prog}: {message}")
        sys.exit(2)


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="pipeline config file (section.key = value)")
    common.add_argument("--frames", help="frame selector, e.g. 0-99,150")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--image-size", help="WxH, overrides calibration and config")

    p = _Parser(prog="lidarprop", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("propose", parents=[common], help="write per-frame proposal files")
    sp.add_argument("--scheme", choices=("clustering", "sliding"), default="clustering")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_propose)

    sp = sub.add_parser("eval", parents=[common], help="score proposal files against labels")
    sp.add_argument("--proposals", required=True)
    sp.add_argument("--labels")
    sp.add_argument("--scores", help="score file with 'frame_id proposal_index score' lines")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("bench", parents=[common], help="clustering vs sliding-window comparison")
    sp.add_argument("--scheme", choices=("clustering", "sliding"))
    sp.add_argument("--sweep-aspect", help="comma list of aspect ratios for extra clustering rows")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("synth", help="write a synthetic KITTI-shaped dataset")
    sp.add_argument("spec")
    sp.add_argument("out")
    sp.add_argument("--count", type=int, default=1)
    sp.add_argument("--image-size")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("plot", help="recall-vs-IoU SVG from curve CSVs")
    sp.add_argument("curves", nargs="+")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LidarPropError as exc:
        _error(exc.kind, str(exc))
    except (OSError, ValueError) as exc:
        _error("io" if isinstance(exc, OSError) else "value", str(exc))
    return 1


if __name__ == "__main__":
    sys.exit(main())

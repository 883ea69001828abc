"""Pipeline configuration: a plain-text file of ``section.key = value`` lines.

Unknown keys are rejected and every value is checked by building the
parameter objects it feeds.  Relative data directories are resolved
against ``$LIDARPROP_DATA_ROOT`` when that variable is set.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

from .errors import ConfigError
from .preprocess import DownsampleParams, GroundParams
from .clustering import DbscanParams
from .proposals import PipelineParams, SlidingWindowParams, ValidationParams

DATA_ROOT_ENV = "LIDARPROP_DATA_ROOT"


def _floats(s):
    return tuple(float(v) for v in s.split())


def _range(s):
    vals = _floats(s)
    if len(vals) != 2:
        raise ValueError("expected 'min max'")
    return vals


def _opt_float(s):
    """A float, or None for ``none`` / empty (used to switch a stage off)."""
    if s is None or str(s).strip().lower() in ("", "none"):
        return None
    return float(s)


def parse_image_size(s):
    if s is None or str(s).strip() in ("", "auto", "none"):
        return None
    if isinstance(s, (tuple, list)):
        return (int(s[0]), int(s[1]))
    w, h = str(s).lower().split("x")
    size = (int(w), int(h))
    if min(size) <= 0:
        raise ValueError("image size must be positive")
    return size


def _fmt(value):
    if value is None:
        return "none"
    if isinstance(value, tuple):
        if len(value) == 2 and all(isinstance(v, int) for v in value):
            return f"{value[0]}x{value[1]}"
        return " ".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


# key -> (parser, default)
SCHEMA = {
    "downsample.density_reference": (int, 30),
    "downsample.bin_width": (float, 1.0),
    "ground.grid_step": (float, 0.5),
    "ground.seed_band": (float, 0.20),
    "ground.removal_band": (float, 0.15),
    "dbscan.eps": (float, 0.5),
    "dbscan.min_pts": (int, 10),
    "validation.dx": (_range, (0.1, 1.2)),
    "validation.dy": (_range, (0.1, 1.2)),
    "validation.dz": (_range, (0.4, 2.2)),
    "proposals.aspect_ratio": (_opt_float, 0.41),
    "sliding.heights": (_floats, (32.0, 48.0, 72.0, 108.0, 162.0, 243.0)),
    "sliding.aspect_ratio": (float, 0.41),
    "sliding.stride_x": (float, 0.25),
    "sliding.stride_y": (float, 0.25),
    "evaluation.iou_threshold": (float, 0.5),
    "evaluation.classes": (lambda s: tuple(s.split()), ("Pedestrian",)),
    "data.velodyne_dir": (str, "velodyne"),
    "data.calib_dir": (str, "calib"),
    "data.label_dir": (str, "label_2"),
    "data.image_size": (parse_image_size, None),
    "run.seed": (int, 0),
    "run.workers": (int, 1),
}


@dataclass
class PipelineConfig:
    values: dict = field(default_factory=lambda: {k: d for k, (_, d) in SCHEMA.items()})

    def __getitem__(self, key):
        return self.values[key]

    def set(self, key, raw):
        """Set ``key`` from a string (or an already typed value) and re-validate."""
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        parser, _ = SCHEMA[key]
        try:
            value = parser(raw) if isinstance(raw, str) else raw
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: invalid value {raw!r} ({exc})") from None
        self.values[key] = value
        self.validate()

    def validate(self):
        try:
            self.pipeline_params()
            self.sliding_params()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if not 0 < self["evaluation.iou_threshold"] < 1:
            raise ConfigError("evaluation.iou_threshold must lie in (0, 1)")
        if self["run.workers"] < 1:
            raise ConfigError("run.workers must be >= 1")

    def pipeline_params(self) -> PipelineParams:
        v = self.values
        return PipelineParams(
            downsample=DownsampleParams(v["downsample.density_reference"],
                                        v["downsample.bin_width"], v["run.seed"]),
            ground=GroundParams(v["ground.grid_step"], v["ground.seed_band"],
                                v["ground.removal_band"]),
            dbscan=DbscanParams(v["dbscan.eps"], v["dbscan.min_pts"]),
            validation=ValidationParams(v["validation.dx"], v["validation.dy"],
                                        v["validation.dz"]),
            aspect_ratio=v["proposals.aspect_ratio"],
        )

    def sliding_params(self) -> SlidingWindowParams:
        v = self.values
        return SlidingWindowParams(v["sliding.heights"], v["sliding.aspect_ratio"],
                                   v["sliding.stride_x"], v["sliding.stride_y"])

    def data_dir(self, name, root=None) -> str:
        path = self.values[f"data.{name}_dir"]
        root = root if root is not None else os.environ.get(DATA_ROOT_ENV)
        if root and not os.path.isabs(path):
            path = os.path.join(root, path)
        return path

    def dumps(self) -> str:
        return "".join(f"{k} = {_fmt(self.values[k])}\n" for k in SCHEMA)


def loads(text: str, source="<config>") -> PipelineConfig:
    cfg = PipelineConfig()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        parser, _ = SCHEMA[key]
        try:
            cfg.values[key] = parser(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{source}:{lineno}: {key}: invalid value {value!r} ({exc})") from None
        # no constraint spans keys, so checking after each line pins the culprit
        try:
            cfg.validate()
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {key}: {exc}") from None
    return cfg


def load(path) -> PipelineConfig:
    with open(path) as fh:
        return loads(fh.read(), source=str(path))

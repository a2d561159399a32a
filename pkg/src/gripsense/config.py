"""Run configuration read from ``key = value`` text files.

Blank lines and ``#`` comments are ignored. Tuple-valued keys take
comma- or space-separated numbers. Unknown keys are rejected so typos do
not pass silently.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .errors import InvalidArgumentError
from .extract import FeatureConfig
from .features import RoiSpec
from .flow import FlowParams
from .preprocess import CanvasSpec, PreprocessConfig
from .signal import FilterSpec


@dataclass(frozen=True)
class Config:
    # preprocessing
    skin_lo: tuple = (0.9, 0.15, 0.2)
    skin_hi: tuple = (0.14, 0.9, 1.0)
    skin_open_radius: int = 2
    skin_open_iterations: int = 2
    skin_close_radius: int = 2
    skin_close_iterations: int = 2
    marker_lo: tuple = (0.12, 0.5, 0.5)
    marker_hi: tuple = (0.2, 1.0, 1.0)
    marker_open_radius: int = 1
    canvas_x_min: float = -1.0
    canvas_x_max: float = 3.0
    canvas_y_min: float = -2.0
    canvas_y_max: float = 2.0
    canvas_ppu: float = 256.0
    led_margin: float = 0.2
    # optical flow
    flow_alpha: float = 0.012
    flow_ratio: float = 0.75
    flow_min_width: int = 20
    flow_n_outer: int = 7
    flow_n_inner: int = 1
    flow_n_sor: int = 30
    flow_omega: float = 1.8
    flow_margin: int = 4
    # features
    roi_width: float = 0.68
    roi_height: float = 0.82
    spatial_bins: int = 20
    mag_bins: int = 10
    dir_bins: int = 10
    magnitude_coverage: float = 95.0
    spatial_lo_pct: float = 1.0
    spatial_hi_pct: float = 99.0
    calib_stride: int = 10
    failure_ratio: float = 0.01
    # labels
    cutoff_hz: float = 3.0
    filter_order: int = 1
    # regression
    model_kind: str = "ridge"
    ridge_lambda: float = 1.0
    knn_k: int = 15
    block_len: int = 1500
    # fusion
    em_max_iters: int = 50
    em_tol: float = 1e-6
    em_learn: tuple = ("Q", "R")

    def preprocess(self) -> PreprocessConfig:
        canvas = CanvasSpec(self.canvas_x_min, self.canvas_x_max, self.canvas_y_min, self.canvas_y_max,
                            self.canvas_ppu)
        return PreprocessConfig(self.skin_lo, self.skin_hi, self.skin_open_radius, self.skin_open_iterations,
                                self.skin_close_radius, self.skin_close_iterations, self.marker_lo,
                                self.marker_hi, self.marker_open_radius, canvas)

    def flow(self) -> FlowParams:
        return FlowParams(self.flow_alpha, self.flow_ratio, self.flow_min_width, self.flow_n_outer,
                          self.flow_n_inner, self.flow_n_sor, self.flow_omega)

    def features(self) -> FeatureConfig:
        return FeatureConfig(self.preprocess(), self.flow(), RoiSpec(self.roi_width, self.roi_height),
                             self.flow_margin, self.spatial_bins, self.mag_bins, self.dir_bins,
                             self.magnitude_coverage, self.spatial_lo_pct, self.spatial_hi_pct,
                             self.calib_stride, self.failure_ratio)

    def filter_spec(self, sample_rate_hz: float = 59.95) -> FilterSpec:
        return FilterSpec(self.cutoff_hz, self.filter_order, sample_rate_hz)


_FIELDS = {f.name: f for f in dataclasses.fields(Config)}


def _convert(name, raw):
    default = getattr(Config, name)
    try:
        if isinstance(default, tuple):
            items = [t for t in raw.replace(",", " ").split() if t]
            return tuple(items) if name == "em_learn" else tuple(float(t) for t in items)
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        raise InvalidArgumentError(f"config key {name}: cannot parse {raw!r}") from None


def parse_config(text: str, source: str = "<config>") -> Config:
    values = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep:
            raise InvalidArgumentError(f"{source}:{n}: expected 'key = value'")
        if key not in _FIELDS:
            raise InvalidArgumentError(f"{source}:{n}: unknown config key {key!r}")
        values[key] = _convert(key, raw.strip())
    try:
        cfg = Config(**values)
        # build the derived objects once so invalid values fail here
        cfg.features()
        cfg.filter_spec()
    except (TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"{source}: {exc}") from None
    return cfg


def load_config(path=None) -> Config:
    if path is None:
        return Config()
    p = Path(path)
    if not p.is_file():
        raise InvalidArgumentError(f"config file {p} does not exist")
    return parse_config(p.read_text(), str(p))


def config_lines(cfg: Config) -> list[str]:
    out = []
    for name in _FIELDS:
        v = getattr(cfg, name)
        if isinstance(v, tuple):
            v = ", ".join(str(x) for x in v)
        out.append(f"{name} = {v}")
    return out

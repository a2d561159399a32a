"""Spatial colour histograms and temporal optical-flow histograms.

Spatial features describe the skin inside a fixed rectangle around the tool
marker: three 20-bin HSV histograms, 60 values. Temporal features describe
the rectified flow of the whole hand: a 10 x 10 histogram over signed
magnitude and direction, 100 values.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CalibrationError, EmptyRegionError, FormatError, InvalidArgumentError, InvalidGeometryError
from .flow import FlowField
from .imaging import HistogramSpec, masked_histogram, rgb_to_hsv
from .preprocess import CanvasSpec, MarkerSet

SPATIAL_BINS = 20
MAG_BINS = 10
DIR_BINS = 10
MIN_CALIBRATION_VECTORS = 1000
DIR_SPEC = HistogramSpec(DIR_BINS, -math.pi, math.pi)
UNIT_SPEC = HistogramSpec(SPATIAL_BINS, 0.0, 1.0)
# hue enters the spatial histogram centred on red, so skin hue is one interval
HUE_SPEC = HistogramSpec(SPATIAL_BINS, -0.5, 0.5)
DEFAULT_SPATIAL = (HUE_SPEC, UNIT_SPEC, UNIT_SPEC)


@dataclass(frozen=True)
class RoiSpec:
    width: float = 0.68    # l1, normalised units
    height: float = 0.82   # l2

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise InvalidArgumentError(f"ROI size must be positive, got {self.width} x {self.height}")


# -- spatial stream ------------------------------------------------------------

def roi_slices(canvas: CanvasSpec, center, roi: RoiSpec):
    """Row and column slices of canvas pixels whose centres lie in the ROI."""
    cx, cy = center
    h, w = canvas.shape
    c0 = math.ceil((cx - roi.width / 2 - canvas.x_min) * canvas.ppu - 1e-9)
    c1 = math.floor((cx + roi.width / 2 - canvas.x_min) * canvas.ppu + 1e-9)
    r0 = math.ceil((cy - roi.height / 2 - canvas.y_min) * canvas.ppu - 1e-9)
    r1 = math.floor((cy + roi.height / 2 - canvas.y_min) * canvas.ppu + 1e-9)
    c0, r0 = max(c0, 0), max(r0, 0)
    c1, r1 = min(c1, w - 1), min(r1, h - 1)
    if c0 > c1 or r0 > r1:
        raise InvalidGeometryError(f"ROI around {center} lies outside the canvas")
    return slice(r0, r1 + 1), slice(c0, c1 + 1)


def roi_skin_hsv(norm_frame, norm_mask, markers: MarkerSet, canvas: CanvasSpec | None = None,
                 roi: RoiSpec | None = None) -> np.ndarray:
    """HSV values (n x 3) of the skin pixels inside the ROI, hue on [-0.5, 0.5)."""
    canvas = canvas or CanvasSpec()
    rows, cols = roi_slices(canvas, markers.marker1, roi or RoiSpec())
    patch = np.asarray(norm_frame)[rows, cols]
    sel = np.asarray(norm_mask, dtype=bool)[rows, cols]
    if not sel.any():
        return np.zeros((0, 3))
    hsv = rgb_to_hsv(patch[sel][None, :, :])[0]
    hsv[:, 0] = np.where(hsv[:, 0] >= 0.5, hsv[:, 0] - 1.0, hsv[:, 0])
    return hsv


def spatial_features(norm_frame, norm_mask, markers: MarkerSet, roi: RoiSpec | None = None,
                     specs=None, canvas: CanvasSpec | None = None) -> np.ndarray:
    """Concatenated H, S and V relative histograms of ROI skin (60 values by default)."""
    specs = specs or DEFAULT_SPATIAL
    if len(specs) != 3:
        raise InvalidArgumentError("need one histogram spec per HSV channel")
    hsv = roi_skin_hsv(norm_frame, norm_mask, markers, canvas, roi)
    return np.concatenate([masked_histogram(hsv[:, c], specs[c]) for c in range(3)])


def calibrate_spatial_limits(samples, bins=SPATIAL_BINS, lo_pct=1.0, hi_pct=99.0):
    """Per-channel histogram limits spanning the central part of the training skin."""
    arr = np.concatenate([np.asarray(s, dtype=float).reshape(-1, 3) for s in samples])
    if arr.shape[0] < MIN_CALIBRATION_VECTORS:
        raise CalibrationError(f"only {arr.shape[0]} skin pixels for spatial calibration")
    specs = []
    for c in range(3):
        lo, hi = np.percentile(arr[:, c], [lo_pct, hi_pct])
        if hi - lo < 1e-6:
            lo, hi = lo - 1e-3, hi + 1e-3
        specs.append(HistogramSpec(bins, float(lo), float(hi)))
    return tuple(specs)


# -- temporal stream -----------------------------------------------------------

def rectify_flow(f: FlowField, skin) -> FlowField:
    """Zero non-skin vectors and subtract the skin mean from the rest."""
    m = np.asarray(skin, dtype=bool)
    if m.shape != f.u.shape:
        raise InvalidArgumentError(f"mask {m.shape} does not match flow {f.u.shape}")
    if not m.any():
        raise EmptyRegionError("no skin pixels to rectify")
    u = np.zeros_like(f.u, dtype=float)
    v = np.zeros_like(f.v, dtype=float)
    u[m] = f.u[m] - f.u[m].mean()
    v[m] = f.v[m] - f.v[m].mean()
    return FlowField(u, v)


def flow_direction(u, v) -> np.ndarray:
    """atan2(v, u) folded onto (-pi, pi]."""
    a = np.arctan2(v, u)
    return np.where(a <= -math.pi, math.pi, a)


def sign_magnitudes(f: FlowField, c_y: float, y=None):
    """Signed magnitude and direction of every vector.

    The magnitude becomes negative where ``(y - c_y) * atan2(v, u) > 0``.
    ``y`` gives the vertical coordinate of each row (or pixel) in the units
    of ``c_y``; by default the row index.
    """
    u, v = np.asarray(f.u, dtype=float), np.asarray(f.v, dtype=float)
    if y is None:
        y = np.arange(u.shape[0], dtype=float)
    y = np.asarray(y, dtype=float)
    if y.ndim == 1 and u.ndim == 2:
        y = y[:, None]
    alpha = flow_direction(u, v)
    mag = np.hypot(u, v)
    signed = np.where((y - c_y) * alpha > 0, -mag, mag)
    return signed, alpha


def temporal_features(signed, direction, mag_spec: HistogramSpec, dir_spec: HistogramSpec = DIR_SPEC,
                      valid=None) -> np.ndarray:
    """Relative 2-D histogram, magnitude-major (row = magnitude bin)."""
    m = np.asarray(signed, dtype=float).ravel()
    a = np.asarray(direction, dtype=float).ravel()
    if valid is not None:
        keep = np.asarray(valid, dtype=bool).ravel()
        m, a = m[keep], a[keep]
    out = np.zeros(mag_spec.bins * dir_spec.bins)
    if m.size == 0:
        return out
    mi = np.clip(np.floor((m - mag_spec.lo) * (mag_spec.bins / (mag_spec.hi - mag_spec.lo))),
                 0, mag_spec.bins - 1).astype(np.int64)
    di = np.clip(np.floor((a - dir_spec.lo) * (dir_spec.bins / (dir_spec.hi - dir_spec.lo))),
                 0, dir_spec.bins - 1).astype(np.int64)
    out += np.bincount(mi * dir_spec.bins + di, minlength=out.size)
    return out / m.size


def calibrate_limits(magnitudes, bins=MAG_BINS, coverage=95.0):
    """Symmetric magnitude limits covering ``coverage`` percent of the vectors."""
    if isinstance(magnitudes, (list, tuple)):
        magnitudes = np.concatenate([np.ravel(m) for m in magnitudes]) if magnitudes else np.zeros(0)
    m = np.abs(np.asarray(magnitudes, dtype=float).ravel())
    if m.size < MIN_CALIBRATION_VECTORS:
        raise CalibrationError(f"need at least {MIN_CALIBRATION_VECTORS} flow vectors, got {m.size}")
    M = float(np.percentile(m, coverage))
    if not M > 0:
        raise CalibrationError("flow magnitudes are all zero; cannot set histogram limits")
    return HistogramSpec(bins, -M, M), DIR_SPEC


# -- limits persistence --------------------------------------------------------

@dataclass(frozen=True)
class HistogramLimits:
    spatial: tuple = DEFAULT_SPATIAL
    magnitude: HistogramSpec | None = None
    direction: HistogramSpec = DIR_SPEC

    KEYS = ("spatial_h", "spatial_s", "spatial_v", "temporal_mag", "temporal_dir")

    def items(self):
        specs = list(self.spatial) + [self.magnitude, self.direction]
        return [(k, s) for k, s in zip(self.KEYS, specs) if s is not None]

    def lines(self):
        return [f"{k} = {s.bins} {s.lo:.17g} {s.hi:.17g}" for k, s in self.items()]

    @classmethod
    def from_mapping(cls, d):
        def spec(key):
            if key not in d:
                return None
            parts = d[key].split()
            if len(parts) != 3:
                raise FormatError(f"bad histogram limit entry {key} = {d[key]!r}")
            return HistogramSpec(int(parts[0]), float(parts[1]), float(parts[2]))

        spatial = tuple(spec(k) or d for k, d in zip(cls.KEYS[:3], DEFAULT_SPATIAL))
        return cls(spatial, spec("temporal_mag"), spec("temporal_dir") or DIR_SPEC)


def write_limits(path, limits: HistogramLimits):
    Path(path).write_text("# histogram limits\n" + "\n".join(limits.lines()) + "\n")


def read_limits(path) -> HistogramLimits:
    d = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise FormatError(f"{path}: expected 'key = value', got {line!r}")
        d[key.strip()] = value.strip()
    return HistogramLimits.from_mapping(d)


# -- feature tables --------------------------------------------------------------

def spatial_names(bins=SPATIAL_BINS):
    return [f"{c}{i:02d}" for c in "hsv" for i in range(bins)]


def temporal_names(mag_bins=MAG_BINS, dir_bins=DIR_BINS):
    return [f"m{i}d{j}" for i in range(mag_bins) for j in range(dir_bins)]


def write_features(path, frames, X, names):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(names) or X.shape[0] != len(frames):
        raise InvalidArgumentError("feature matrix does not match frame list and column names")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame"] + list(names))
        for k, row in zip(frames, X):
            w.writerow([int(k)] + [f"{x:.17g}" for x in row])


def read_features(path):
    """Return ``(frames, X, names)``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "frame":
            raise FormatError(f"{path}: feature file must start with a 'frame' column")
        frames, rows = [], []
        for n, r in enumerate(reader, 2):
            if not r:
                continue
            if len(r) != len(header):
                raise FormatError(f"{path}: line {n} has {len(r)} fields, expected {len(header)}")
            try:
                frames.append(int(r[0]))
                rows.append([float(x) for x in r[1:]])
            except ValueError:
                raise FormatError(f"{path}: line {n} is not numeric") from None
    X = np.array(rows, dtype=float).reshape(len(rows), len(header) - 1)
    return np.array(frames, dtype=int), X, header[1:]

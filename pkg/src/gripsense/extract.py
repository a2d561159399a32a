"""Dataset-level feature extraction for both streams.

Flow is computed on the original frames, restricted to the bounding box of
the two frames' (slightly dilated) skin masks, then carried onto the
normalised canvas of the earlier frame. Histogram limits come from a
strided subset of calibration frames, so extraction is two passes: a cheap
calibration pass and the full pass.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DatasetError
from .features import (DIR_BINS, MAG_BINS, SPATIAL_BINS, HistogramLimits, RoiSpec, calibrate_limits,
                       calibrate_spatial_limits, rectify_flow, roi_skin_hsv, sign_magnitudes,
                       spatial_features, temporal_features)
from .flow import FlowField, FlowParams, dense_flow, transform_flow
from .imaging import HistogramSpec, morphology
from .preprocess import PreprocessConfig, PreprocessedFrame, preprocess_frame
from .transform import SimilarityTransform

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FeatureConfig:
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    flow: FlowParams = field(default_factory=FlowParams)
    roi: RoiSpec = field(default_factory=RoiSpec)
    flow_margin: int = 4               # pixels of dilation around the skin for the flow crop
    spatial_bins: int = SPATIAL_BINS
    mag_bins: int = MAG_BINS
    dir_bins: int = DIR_BINS
    magnitude_coverage: float = 95.0
    spatial_lo_pct: float = 1.0
    spatial_hi_pct: float = 99.0
    calib_stride: int = 10
    failure_ratio: float = 0.01


def canvas_flow(prev_img, next_img, prev: PreprocessedFrame, nxt: PreprocessedFrame,
                cfg: FeatureConfig) -> FlowField:
    """Flow between two frames, resampled onto the earlier frame's canvas."""
    union = prev.skin | nxt.skin
    if cfg.flow_margin > 0:
        union = morphology(union, "dilate", cfg.flow_margin, 1)
    rows, cols = np.nonzero(union)
    r0, r1, c0, c1 = rows.min(), rows.max() + 1, cols.min(), cols.max() + 1
    # the pyramid needs a few pixels to work with
    if min(r1 - r0, c1 - c0) < 8:
        h, w = union.shape
        r0, r1 = max(r0 - 4, 0), min(r1 + 4, h)
        c0, c1 = max(c0 - 4, 0), min(c1 + 4, w)
    f = dense_flow(prev_img[r0:r1, c0:c1], next_img[r0:r1, c0:c1], cfg.flow)
    crop_to_canvas = prev.pixel_transform.compose(SimilarityTransform(1.0, 0.0, float(c0), float(r0)))
    return transform_flow(f, crop_to_canvas, prev.canvas.shape)


def pair_signed_flow(prev_img, next_img, prev: PreprocessedFrame, nxt: PreprocessedFrame,
                     cfg: FeatureConfig):
    """Signed magnitudes and directions of the participating canvas vectors."""
    f = canvas_flow(prev_img, next_img, prev, nxt, cfg)
    valid = prev.mask & ((f.u != 0) | (f.v != 0))
    if not valid.any():
        return np.zeros(0), np.zeros(0)
    r = rectify_flow(f, prev.mask)
    canvas = prev.canvas
    y = np.arange(canvas.shape[0]) / canvas.ppu + canvas.y_min
    signed, alpha = sign_magnitudes(r, prev.markers.central[1], y)
    return signed[valid], alpha[valid]


def _preprocess(frames, k, cfg):
    img = frames[k]
    try:
        return img, preprocess_frame(img, cfg.preprocess), None
    except DataError as exc:
        return img, None, f"frame {k}: {exc}"


def calibrate(sources, cfg: FeatureConfig, streams=("spatial", "temporal")) -> HistogramLimits:
    """Histogram limits from ``(frames, allowed_frame_indices)`` pairs."""
    hsv_samples, magnitudes = [], []
    for frames, allowed in sources:
        allowed = sorted(set(int(k) for k in allowed))
        allowed_set = set(allowed)
        for k in allowed[:: max(cfg.calib_stride, 1)]:
            img, pp, err = _preprocess(frames, k, cfg)
            if err:
                log.warning("calibration: %s", err)
                continue
            if "spatial" in streams:
                hsv_samples.append(roi_skin_hsv(pp.image, pp.mask, pp.markers, pp.canvas, cfg.roi))
            if "temporal" in streams and k + 1 < len(frames) and (k + 1) in allowed_set:
                img2, pp2, err = _preprocess(frames, k + 1, cfg)
                if err:
                    log.warning("calibration: %s", err)
                    continue
                signed, _ = pair_signed_flow(img, img2, pp, pp2, cfg)
                magnitudes.append(signed)
    spatial = (HistogramSpec(cfg.spatial_bins, -0.5, 0.5),) + (HistogramSpec(cfg.spatial_bins, 0.0, 1.0),) * 2
    mag = None
    if "spatial" in streams:
        spatial = calibrate_spatial_limits(hsv_samples, cfg.spatial_bins, cfg.spatial_lo_pct,
                                           cfg.spatial_hi_pct)
    if "temporal" in streams:
        mag, _ = calibrate_limits(magnitudes, cfg.mag_bins, cfg.magnitude_coverage)
    return HistogramLimits(spatial, mag, HistogramSpec(cfg.dir_bins, -np.pi, np.pi))


def _extract_range(frames, lo, hi, limits: HistogramLimits, cfg: FeatureConfig, streams):
    """Feature rows for frames ``lo..hi-1``; temporal rows need frame ``k-1``."""
    spatial, temporal, failures = [], [], []
    prev_img = prev_pp = None
    if "temporal" in streams and lo > 0:
        prev_img, prev_pp, _ = _preprocess(frames, lo - 1, cfg)
    for k in range(lo, hi):
        img, pp, err = _preprocess(frames, k, cfg)
        if err:
            failures.append(err)
        elif "spatial" in streams:
            spatial.append((k, spatial_features(pp.image, pp.mask, pp.markers, cfg.roi, limits.spatial,
                                                pp.canvas)))
        if "temporal" in streams and k > 0 and pp is not None and prev_pp is not None:
            signed, alpha = pair_signed_flow(prev_img, img, prev_pp, pp, cfg)
            temporal.append((k, temporal_features(signed, alpha, limits.magnitude, limits.direction)))
        prev_img, prev_pp = img, pp
    return spatial, temporal, failures


def _job(args):
    return _extract_range(*args)


def extract_features(frames, limits: HistogramLimits, cfg: FeatureConfig,
                     streams=("spatial", "temporal"), jobs: int = 1, chunk: int = 250):
    """Return ``{stream: (frame_indices, matrix)}`` and the list of failures.

    Spatial rows cover every frame that preprocesses; temporal rows start
    at frame 1 (row ``k`` describes the pair ``k-1, k``).
    """
    n = len(frames)
    bounds = [(a, min(a + chunk, n)) for a in range(0, n, chunk)]
    tasks = [(frames, a, b, limits, cfg, streams) for a, b in bounds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(_job, tasks))
    else:
        parts = [_job(t) for t in tasks]
    spatial = [r for p in parts for r in p[0]]
    temporal = [r for p in parts for r in p[1]]
    failures = [f for p in parts for f in p[2]]
    for f in failures:
        log.warning("preprocessing failed: %s", f)
    if len(failures) > cfg.failure_ratio * n:
        raise DatasetError(f"{len(failures)} of {n} frames failed preprocessing "
                           f"(limit {cfg.failure_ratio:.1%}); first: {failures[0]}")
    out = {}
    width = {"spatial": 3 * cfg.spatial_bins, "temporal": cfg.mag_bins * cfg.dir_bins}
    for name, rows in (("spatial", spatial), ("temporal", temporal)):
        if name in streams:
            idx = np.array([k for k, _ in rows], dtype=int)
            X = np.array([v for _, v in rows]).reshape(len(rows), width[name])
            out[name] = (idx, X)
    return out, failures

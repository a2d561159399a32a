"""Per-frame preprocessing: skin segmentation, markers, motion normalisation.

Normalised coordinates put the tool marker at (0, 0) and the skin centroid
at (2, 0), so the central marker halfway between them sits at (1, 0). A
fixed canvas samples that plane so every frame is represented on the same
raster.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, EmptyRegionError, MarkerNotFoundError, SegmentationError
from .imaging import centroid, largest_component, morphology, rgb_to_hsv, threshold_mask, warp_image
from .transform import SimilarityTransform

__all__ = [
    "CanvasSpec",
    "MarkerSet",
    "PreprocessConfig",
    "PreprocessedFrame",
    "SimilarityTransform",
    "compute_normalization",
    "detect_tool_marker",
    "preprocess_frame",
    "segment_skin",
]


@dataclass(frozen=True)
class CanvasSpec:
    x_min: float = -1.0
    x_max: float = 3.0
    y_min: float = -2.0
    y_max: float = 2.0
    ppu: float = 256.0   # canvas pixels per normalised unit

    @property
    def shape(self) -> tuple[int, int]:
        return (int(round((self.y_max - self.y_min) * self.ppu)),
                int(round((self.x_max - self.x_min) * self.ppu)))

    @property
    def to_pixels(self) -> SimilarityTransform:
        """Normalised units to canvas pixel coordinates."""
        return SimilarityTransform(self.ppu, 0.0, -self.x_min * self.ppu, -self.y_min * self.ppu)

    def pixel_to_units(self, x, y):
        return x / self.ppu + self.x_min, y / self.ppu + self.y_min


@dataclass(frozen=True)
class PreprocessConfig:
    skin_lo: tuple = (0.9, 0.15, 0.2)
    skin_hi: tuple = (0.14, 0.9, 1.0)
    skin_open_radius: int = 2
    skin_open_iterations: int = 2
    skin_close_radius: int = 2
    skin_close_iterations: int = 2
    marker_lo: tuple = (0.12, 0.5, 0.5)
    marker_hi: tuple = (0.2, 1.0, 1.0)
    marker_open_radius: int = 1
    canvas: CanvasSpec = CanvasSpec()


@dataclass(frozen=True)
class MarkerSet:
    marker1: tuple
    marker2: tuple

    @property
    def central(self) -> tuple:
        return ((self.marker1[0] + self.marker2[0]) / 2.0, (self.marker1[1] + self.marker2[1]) / 2.0)

    def mapped(self, T: SimilarityTransform) -> MarkerSet:
        a, b = T.apply([self.marker1, self.marker2])
        return MarkerSet(tuple(map(float, a)), tuple(map(float, b)))


@dataclass
class PreprocessedFrame:
    image: np.ndarray               # frame on the normalised canvas
    mask: np.ndarray                # skin mask on the canvas
    markers: MarkerSet              # in normalised units
    transform: SimilarityTransform  # frame pixels -> normalised units
    canvas: CanvasSpec
    image_markers: MarkerSet        # in frame pixels
    skin: np.ndarray                # skin mask in frame pixels

    @property
    def pixel_transform(self) -> SimilarityTransform:
        """Frame pixels to canvas pixels."""
        return self.canvas.to_pixels.compose(self.transform)


def segment_skin(frame, cfg: PreprocessConfig | None = None, hsv=None) -> np.ndarray:
    """HSV threshold, opening, closing, then the largest connected component."""
    cfg = cfg or PreprocessConfig()
    if hsv is None:
        hsv = rgb_to_hsv(frame)
    m = threshold_mask(hsv, cfg.skin_lo, cfg.skin_hi)
    if m.any():
        m = morphology(m, "open", cfg.skin_open_radius, cfg.skin_open_iterations)
    if m.any():
        m = morphology(m, "close", cfg.skin_close_radius, cfg.skin_close_iterations)
    if not m.any():
        raise SegmentationError("no skin pixels survive thresholding and morphology")
    return largest_component(m)


def detect_tool_marker(frame, cfg: PreprocessConfig | None = None, hsv=None) -> tuple[float, float]:
    """Centroid ``(x, y)`` of the largest yellow blob."""
    cfg = cfg or PreprocessConfig()
    if hsv is None:
        hsv = rgb_to_hsv(frame)
    m = threshold_mask(hsv, cfg.marker_lo, cfg.marker_hi)
    if m.any() and cfg.marker_open_radius > 0:
        opened = morphology(m, "open", cfg.marker_open_radius, 1)
        # tiny markers may vanish under opening; fall back to the raw threshold
        if opened.any():
            m = opened
    if not m.any():
        raise MarkerNotFoundError("no yellow marker found")
    return centroid(largest_component(m))


def compute_normalization(markers: MarkerSet) -> SimilarityTransform:
    """Similarity sending marker1 to (0, 0), the central marker to (1, 0), marker2 to (2, 0)."""
    (x1, y1), (x2, y2) = markers.marker1, markers.marker2
    dx, dy = x2 - x1, y2 - y1
    dist = math.hypot(dx, dy)
    if not dist > 1e-9:
        raise DegenerateGeometryError("tool marker and skin centroid coincide")
    scale = 2.0 / dist
    rotation = -math.atan2(dy, dx)
    c, s = math.cos(rotation), math.sin(rotation)
    tx = -scale * (c * x1 - s * y1)
    ty = -scale * (s * x1 + c * y1)
    return SimilarityTransform(scale, rotation, tx, ty)


def preprocess_frame(frame, cfg: PreprocessConfig | None = None) -> PreprocessedFrame:
    cfg = cfg or PreprocessConfig()
    hsv = rgb_to_hsv(frame)
    skin = segment_skin(frame, cfg, hsv=hsv)
    m1 = detect_tool_marker(frame, cfg, hsv=hsv)
    try:
        m2 = centroid(skin)
    except EmptyRegionError as exc:
        raise SegmentationError(str(exc)) from exc
    image_markers = MarkerSet(m1, m2)
    T = compute_normalization(image_markers)
    P = cfg.canvas.to_pixels.compose(T)
    shape = cfg.canvas.shape
    return PreprocessedFrame(
        image=warp_image(frame, P, shape),
        mask=warp_image(skin, P, shape),
        markers=image_markers.mapped(T),
        transform=T,
        canvas=cfg.canvas,
        image_markers=image_markers,
        skin=skin,
    )

"""Raster primitives shared by the vision stages.

Images are numpy arrays shaped ``(height, width)`` or ``(height, width, 3)``,
either ``uint8`` or float on the unit interval. Masks are boolean
``(height, width)`` arrays. Pixel ``(row, col)`` has its center at the
continuous coordinate ``(x=col, y=row)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import ndimage

from .errors import EmptyRegionError, InvalidArgumentError
from .transform import SimilarityTransform

__all__ = [
    "HistogramSpec",
    "to_unit",
    "rgb_to_hsv",
    "hsv_to_rgb",
    "to_gray",
    "threshold_mask",
    "morphology",
    "largest_component",
    "centroid",
    "masked_histogram",
    "bilinear_sample",
    "warp_image",
]


@dataclass(frozen=True)
class HistogramSpec:
    bins: int
    lo: float
    hi: float

    def __post_init__(self):
        if int(self.bins) != self.bins or self.bins < 1:
            raise InvalidArgumentError(f"histogram needs at least one bin, got {self.bins}")
        if not self.lo < self.hi:
            raise InvalidArgumentError(f"histogram limits must satisfy lo < hi, got ({self.lo}, {self.hi})")


def to_unit(img) -> np.ndarray:
    """Return ``img`` as float64 on [0, 1]; 8-bit input is divided by 255."""
    a = np.asarray(img)
    if a.dtype == np.uint8:
        return a.astype(np.float64) / 255.0
    return a.astype(np.float64, copy=False)


def _require_rgb(img):
    a = np.asarray(img)
    if a.ndim != 3 or a.shape[2] != 3:
        raise InvalidArgumentError(f"expected a 3-channel image, got shape {a.shape}")
    return a


def rgb_to_hsv(img) -> np.ndarray:
    """Hexcone RGB to HSV. All output channels lie on the unit interval, hue on [0, 1)."""
    a = _require_rgb(img)
    if a.dtype == np.uint8:
        out = np.empty(a.shape, dtype=np.float64)
        _hsv_u8(np.ascontiguousarray(a).reshape(-1, 3), out.reshape(-1, 3))
        return out
    rgb = to_unit(a)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=-1)
    c = v - rgb.min(axis=-1)
    s = np.divide(c, v, out=np.zeros_like(v), where=v > 0)
    safe_c = np.where(c > 0, c, 1.0)
    h = np.where(
        v == r,
        ((g - b) / safe_c) % 6.0,
        np.where(v == g, (b - r) / safe_c + 2.0, (r - g) / safe_c + 4.0),
    )
    h = np.where(c > 0, h / 6.0, 0.0)
    h = np.where(h >= 1.0, h - 1.0, h)
    return np.stack([h, s, v], axis=-1)


@njit(cache=True)
def _hsv_u8(rgb, out):
    for n in range(rgb.shape[0]):
        r = rgb[n, 0] / 255.0
        g = rgb[n, 1] / 255.0
        b = rgb[n, 2] / 255.0
        v = max(r, g, b)
        c = v - min(r, g, b)
        h = 0.0
        if c > 0:
            if v == r:
                h = ((g - b) / c) % 6.0
            elif v == g:
                h = (b - r) / c + 2.0
            else:
                h = (r - g) / c + 4.0
            h /= 6.0
            if h >= 1.0:
                h -= 1.0
        out[n, 0] = h
        out[n, 1] = c / v if v > 0 else 0.0
        out[n, 2] = v


def hsv_to_rgb(hsv) -> np.ndarray:
    """Inverse of :func:`rgb_to_hsv`, returning float RGB on [0, 1]."""
    hsv = np.asarray(hsv, dtype=np.float64)
    h, s, v = hsv[..., 0] % 1.0, hsv[..., 1], hsv[..., 2]
    h6 = h * 6.0
    sector = np.floor(h6).astype(int) % 6
    f = h6 - np.floor(h6)
    p = v * (1 - s)
    q = v * (1 - s * f)
    t = v * (1 - s * (1 - f))
    choices_r = [v, q, p, p, t, v]
    choices_g = [t, v, v, q, p, p]
    choices_b = [p, p, t, v, v, q]
    r = np.choose(sector, choices_r)
    g = np.choose(sector, choices_g)
    b = np.choose(sector, choices_b)
    return np.stack([r, g, b], axis=-1)


LUMA = (0.299, 0.587, 0.114)


def to_gray(img) -> np.ndarray:
    """Luma grayscale on [0, 1]. Single-channel input passes through."""
    a = to_unit(img)
    if a.ndim == 2:
        return a
    return a[..., 0] * LUMA[0] + a[..., 1] * LUMA[1] + a[..., 2] * LUMA[2]


def threshold_mask(img, lo, hi) -> np.ndarray:
    """Pixels whose every channel falls in ``[lo[c], hi[c]]``.

    When ``lo[c] > hi[c]`` the interval wraps: values ``>= lo`` or ``<= hi``
    pass. This is how hue ranges straddling red are expressed.
    """
    a = np.asarray(img)
    if a.ndim == 2:
        a = a[..., None]
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if lo.shape != (a.shape[2],) or hi.shape != (a.shape[2],):
        raise InvalidArgumentError(
            f"bounds have {lo.size}/{hi.size} entries for a {a.shape[2]}-channel image"
        )
    out = np.ones(a.shape[:2], dtype=bool)
    for c in range(a.shape[2]):
        ch = a[..., c]
        if lo[c] <= hi[c]:
            out &= (ch >= lo[c]) & (ch <= hi[c])
        else:
            out &= (ch >= lo[c]) | (ch <= hi[c])
    return out


def morphology(mask, op: str, radius: int = 1, iterations: int = 1) -> np.ndarray:
    """Binary morphology with a square element and false-padded borders.

    ``open`` is erosion applied ``iterations`` times followed by the same
    number of dilations; ``close`` is the reverse. Iterating a square of
    side ``2r+1`` equals one pass with side ``2*r*iterations+1``, and squares
    separate into row and column passes, so each step is two 1-D filters.
    """
    if int(iterations) != iterations or iterations < 1:
        raise InvalidArgumentError(f"iterations must be >= 1, got {iterations}")
    if int(radius) != radius or radius < 1:
        raise InvalidArgumentError(f"structuring element radius must be >= 1, got {radius}")
    size = 2 * int(radius) * int(iterations) + 1
    m = np.asarray(mask, dtype=bool).view(np.uint8)

    def erode(x):
        x = ndimage.minimum_filter1d(x, size, axis=0, mode="constant", cval=0)
        return ndimage.minimum_filter1d(x, size, axis=1, mode="constant", cval=0)

    def dilate(x):
        x = ndimage.maximum_filter1d(x, size, axis=0, mode="constant", cval=0)
        return ndimage.maximum_filter1d(x, size, axis=1, mode="constant", cval=0)

    if op == "erode":
        out = erode(m)
    elif op == "dilate":
        out = dilate(m)
    elif op == "open":
        out = dilate(erode(m))
    elif op == "close":
        out = erode(dilate(m))
    else:
        raise InvalidArgumentError(f"unknown morphology op {op!r}")
    return out.astype(bool)


_EIGHT = np.ones((3, 3), dtype=bool)


def largest_component(mask) -> np.ndarray:
    """Keep only the largest 8-connected component (lowest label on ties)."""
    m = np.asarray(mask, dtype=bool)
    labels, n = ndimage.label(m, structure=_EIGHT)
    if n <= 1:
        return m.copy()
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    return labels == int(np.argmax(sizes))


def centroid(mask) -> tuple[float, float]:
    """Mean ``(x, y)`` of true pixel centers."""
    rows, cols = np.nonzero(np.asarray(mask, dtype=bool))
    if rows.size == 0:
        raise EmptyRegionError("centroid of an empty mask")
    return float(cols.mean()), float(rows.mean())


def masked_histogram(values, spec: HistogramSpec) -> np.ndarray:
    """Relative histogram; out-of-range values land in the edge bins."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        return np.zeros(spec.bins)
    idx = np.floor((v - spec.lo) * (spec.bins / (spec.hi - spec.lo))).astype(np.int64)
    np.clip(idx, 0, spec.bins - 1, out=idx)
    return np.bincount(idx, minlength=spec.bins) / v.size


def bilinear_sample(img, xs, ys, outside=0.0):
    """Sample ``img`` at continuous coordinates, returning float values.

    Points outside ``[0, w-1] x [0, h-1]`` receive ``outside``. Pass
    ``outside=None`` to clamp to the border instead.
    """
    a = np.asarray(img, dtype=np.float64)
    h, w = a.shape[:2]
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if outside is None:
        xs = np.clip(xs, 0, w - 1)
        ys = np.clip(ys, 0, h - 1)
        inside = None
    else:
        inside = (xs >= 0) & (xs <= w - 1) & (ys >= 0) & (ys <= h - 1)
        xs = np.clip(xs, 0, w - 1)
        ys = np.clip(ys, 0, h - 1)
    x0 = np.minimum(np.floor(xs).astype(np.int64), max(w - 2, 0))
    y0 = np.minimum(np.floor(ys).astype(np.int64), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    if a.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = a[y0, x0] * (1 - fx) + a[y0, x1] * fx
    bottom = a[y1, x0] * (1 - fx) + a[y1, x1] * fx
    out = top * (1 - fy) + bottom * fy
    if inside is not None:
        if a.ndim == 3:
            out[~inside] = outside
        else:
            out = np.where(inside, out, outside)
    return out


def _source_grid(T: SimilarityTransform, out_shape):
    h, w = out_shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    src = T.inverse().apply(np.stack([xs, ys], axis=-1))
    return src[..., 0], src[..., 1]


def warp_image(img, T: SimilarityTransform, out_shape) -> np.ndarray:
    """Resample ``img`` so that source point ``p`` lands at ``T(p)``.

    Images are interpolated bilinearly, masks (bool arrays) by nearest
    neighbour. Output pixels whose preimage falls outside the source are
    zero/false. 8-bit images come back as 8-bit.
    """
    if not T.scale > 0:
        raise InvalidArgumentError("warp needs a positive scale")
    a = np.asarray(img)
    sx, sy = _source_grid(T, tuple(out_shape))
    h, w = a.shape[:2]
    if a.dtype == bool:
        # half-pixel tolerance so exact integer maps survive rounding noise
        xi = np.rint(sx).astype(np.int64)
        yi = np.rint(sy).astype(np.int64)
        inside = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        out = np.zeros(tuple(out_shape), dtype=bool)
        out[inside] = a[yi[inside], xi[inside]]
        return out
    # snap coordinates that are within rounding noise of a pixel center
    rx, ry = np.rint(sx), np.rint(sy)
    sx = np.where(np.abs(sx - rx) < 1e-9, rx, sx)
    sy = np.where(np.abs(sy - ry) < 1e-9, ry, sy)
    out = bilinear_sample(a, sx, sy, outside=0.0)
    if a.dtype == np.uint8:
        return np.clip(np.rint(out), 0, 255).astype(np.uint8)
    return out

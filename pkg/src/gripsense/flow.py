"""Coarse-to-fine variational dense optical flow.

The energy minimised at every pyramid level is

    E(u, v) = sum psi((I2(x + w) - I1(x))^2) + alpha * sum psi(|grad u|^2 + |grad v|^2)

with the Charbonnier penalty ``psi(s2) = sqrt(s2 + eps^2)``. Each level runs
``n_outer`` warping steps; each warping step linearises the data term,
freezes the robust weights ``n_inner`` times and solves the resulting linear
system with ``n_sor`` sweeps of successive over-relaxation. An outer step is
only accepted if it does not raise the (unlinearised) energy; otherwise the
increment is halved, which keeps the per-level energy sequence monotone.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit
from scipy import ndimage

from .errors import FormatError, InvalidArgumentError
from .imaging import bilinear_sample, to_gray, warp_image
from .transform import SimilarityTransform

EPS = 1e-3
_BACKTRACK_STEPS = 6


@dataclass(frozen=True)
class FlowParams:
    alpha: float = 0.012
    ratio: float = 0.75
    min_width: int = 20
    n_outer: int = 7
    n_inner: int = 1
    n_sor: int = 30
    omega: float = 1.8

    def __post_init__(self):
        if not 0 < self.ratio < 1:
            raise InvalidArgumentError(f"pyramid ratio must be in (0, 1), got {self.ratio}")
        if self.min_width < 4:
            raise InvalidArgumentError(f"min_width must be >= 4, got {self.min_width}")
        if min(self.n_outer, self.n_inner, self.n_sor) < 1:
            raise InvalidArgumentError("iteration counts must be >= 1")
        if not self.alpha > 0:
            raise InvalidArgumentError(f"alpha must be positive, got {self.alpha}")
        if not 0 < self.omega < 2:
            raise InvalidArgumentError(f"SOR factor must be in (0, 2), got {self.omega}")


@dataclass
class FlowField:
    """Per-pixel displacement ``(u, v)`` in pixels per frame."""

    u: np.ndarray
    v: np.ndarray
    # energy after each accepted outer step, one list per pyramid level
    energy_trace: list = field(default_factory=list, repr=False)

    @property
    def shape(self):
        return self.u.shape

    @property
    def magnitude(self) -> np.ndarray:
        return np.hypot(self.u, self.v)


# -- numerical kernels -------------------------------------------------------

@njit(cache=True)
def _warp_clamped(img, u, v, out):
    h, w = img.shape
    for i in range(h):
        for j in range(w):
            x = min(max(j + u[i, j], 0.0), w - 1.0)
            y = min(max(i + v[i, j], 0.0), h - 1.0)
            x0 = min(int(x), max(w - 2, 0))
            y0 = min(int(y), max(h - 2, 0))
            x1 = min(x0 + 1, w - 1)
            y1 = min(y0 + 1, h - 1)
            fx = x - x0
            fy = y - y0
            top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
            bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
            out[i, j] = top * (1.0 - fy) + bot * fy


@njit(cache=True)
def _grad_sq(u, v, i, j):
    h, w = u.shape
    g = 0.0
    if j + 1 < w:
        a = u[i, j + 1] - u[i, j]
        b = v[i, j + 1] - v[i, j]
        g += a * a + b * b
    if i + 1 < h:
        a = u[i + 1, j] - u[i, j]
        b = v[i + 1, j] - v[i, j]
        g += a * a + b * b
    return g


@njit(cache=True)
def _energy(i1, i2, u, v, alpha, scratch):
    _warp_clamped(i2, u, v, scratch)
    h, w = u.shape
    eps2 = EPS * EPS
    data = 0.0
    smooth = 0.0
    for i in range(h):
        for j in range(w):
            d = scratch[i, j] - i1[i, j]
            data += math.sqrt(d * d + eps2)
            smooth += math.sqrt(_grad_sq(u, v, i, j) + eps2)
    return data + alpha * smooth


@njit(cache=True)
def _deriv(img, i, j, axis):
    # 5-tap central difference, replicated border
    h, w = img.shape
    if axis == 1:
        a = img[i, max(j - 2, 0)]
        b = img[i, max(j - 1, 0)]
        c = img[i, min(j + 1, w - 1)]
        d = img[i, min(j + 2, w - 1)]
    else:
        a = img[max(i - 2, 0), j]
        b = img[max(i - 1, 0), j]
        c = img[min(i + 1, h - 1), j]
        d = img[min(i + 2, h - 1), j]
    return (a - 8.0 * b + 8.0 * c - d) / 12.0


@njit(cache=True)
def _sor(du, dv, u, v, a11d, a12d, a22d, b1d, b2d, phi, alpha, omega, n_iter):
    """SOR sweeps (lexicographic order) on the linearised increment system."""
    h, w = du.shape
    # padded copies: edge weights and increments are zero outside the image
    wx = np.zeros((h + 2, w + 2))
    wy = np.zeros((h + 2, w + 2))
    pu = np.zeros((h + 2, w + 2))
    pv = np.zeros((h + 2, w + 2))
    for i in range(h):
        for j in range(w):
            if j + 1 < w:
                wx[i + 1, j + 1] = alpha * phi[i, j]
            if i + 1 < h:
                wy[i + 1, j + 1] = alpha * phi[i, j]
            pu[i + 1, j + 1] = du[i, j]
            pv[i + 1, j + 1] = dv[i, j]
    inv_u = np.empty((h, w))
    inv_v = np.empty((h, w))
    ru0 = np.empty((h, w))
    rv0 = np.empty((h, w))
    for i in range(h):
        for j in range(w):
            er = wx[i + 1, j + 1]
            el = wx[i + 1, j]
            ed = wy[i + 1, j + 1]
            eu = wy[i, j + 1]
            sw = er + el + ed + eu
            inv_u[i, j] = omega / (a11d[i, j] + sw + 1e-12)
            inv_v[i, j] = omega / (a22d[i, j] + sw + 1e-12)
            su = 0.0
            sv = 0.0
            if j + 1 < w:
                su += er * u[i, j + 1]
                sv += er * v[i, j + 1]
            if j > 0:
                su += el * u[i, j - 1]
                sv += el * v[i, j - 1]
            if i + 1 < h:
                su += ed * u[i + 1, j]
                sv += ed * v[i + 1, j]
            if i > 0:
                su += eu * u[i - 1, j]
                sv += eu * v[i - 1, j]
            ru0[i, j] = b1d[i, j] + su - sw * u[i, j]
            rv0[i, j] = b2d[i, j] + sv - sw * v[i, j]
    keep = 1.0 - omega
    for _ in range(n_iter):
        for i in range(h):
            pi = i + 1
            for j in range(w):
                pj = j + 1
                er = wx[pi, pj]
                el = wx[pi, j]
                ed = wy[pi, pj]
                eu = wy[i, pj]
                ru = (ru0[i, j] + er * pu[pi, pj + 1] + el * pu[pi, j]
                      + ed * pu[pi + 1, pj] + eu * pu[i, pj] - a12d[i, j] * pv[pi, pj])
                nu = keep * pu[pi, pj] + ru * inv_u[i, j]
                pu[pi, pj] = nu
                rv = (rv0[i, j] + er * pv[pi, pj + 1] + el * pv[pi, j]
                      + ed * pv[pi + 1, pj] + eu * pv[i, pj] - a12d[i, j] * nu)
                pv[pi, pj] = keep * pv[pi, pj] + rv * inv_v[i, j]
    for i in range(h):
        for j in range(w):
            du[i, j] = pu[i + 1, j + 1]
            dv[i, j] = pv[i + 1, j + 1]


@njit(cache=True)
def _solve_level(i1, i2, u, v, alpha, omega, n_outer, n_inner, n_sor, trace):
    h, w = u.shape
    eps2 = EPS * EPS
    i2w = np.empty((h, w))
    blend = np.empty((h, w))
    ix = np.empty((h, w))
    iy = np.empty((h, w))
    iz = np.empty((h, w))
    a11 = np.empty((h, w))
    a12 = np.empty((h, w))
    a22 = np.empty((h, w))
    b1 = np.empty((h, w))
    b2 = np.empty((h, w))
    phi = np.empty((h, w))
    cu = np.empty((h, w))
    cv = np.empty((h, w))
    energy = _energy(i1, i2, u, v, alpha, i2w)
    trace[0] = energy
    for k in range(n_outer):
        _warp_clamped(i2, u, v, i2w)
        for i in range(h):
            for j in range(w):
                blend[i, j] = 0.5 * (i1[i, j] + i2w[i, j])
        for i in range(h):
            for j in range(w):
                ix[i, j] = _deriv(blend, i, j, 1)
                iy[i, j] = _deriv(blend, i, j, 0)
                iz[i, j] = i2w[i, j] - i1[i, j]
        du = np.zeros((h, w))
        dv = np.zeros((h, w))
        for _ in range(n_inner):
            for i in range(h):
                for j in range(w):
                    cu[i, j] = u[i, j] + du[i, j]
                    cv[i, j] = v[i, j] + dv[i, j]
            for i in range(h):
                for j in range(w):
                    r = iz[i, j] + ix[i, j] * du[i, j] + iy[i, j] * dv[i, j]
                    wd = 0.5 / math.sqrt(r * r + eps2)
                    a11[i, j] = wd * ix[i, j] * ix[i, j]
                    a12[i, j] = wd * ix[i, j] * iy[i, j]
                    a22[i, j] = wd * iy[i, j] * iy[i, j]
                    b1[i, j] = -wd * ix[i, j] * iz[i, j]
                    b2[i, j] = -wd * iy[i, j] * iz[i, j]
                    phi[i, j] = 0.5 / math.sqrt(_grad_sq(cu, cv, i, j) + eps2)
            _sor(du, dv, u, v, a11, a12, a22, b1, b2, phi, alpha, omega, n_sor)
        step = 1.0
        for _ in range(_BACKTRACK_STEPS):
            for i in range(h):
                for j in range(w):
                    cu[i, j] = u[i, j] + step * du[i, j]
                    cv[i, j] = v[i, j] + step * dv[i, j]
            cand = _energy(i1, i2, cu, cv, alpha, i2w)
            if cand <= energy:
                u[:, :] = cu
                v[:, :] = cv
                energy = cand
                break
            step *= 0.5
        trace[k + 1] = energy


def level_energy(i1, i2, u, v, alpha) -> float:
    """Nonlinear energy of flow ``(u, v)`` between two same-size gray images."""
    i1 = np.ascontiguousarray(i1, dtype=np.float64)
    return float(_energy(i1, np.ascontiguousarray(i2, dtype=np.float64),
                         np.ascontiguousarray(u, dtype=np.float64),
                         np.ascontiguousarray(v, dtype=np.float64), alpha, np.empty_like(i1)))


def _resize(img, shape):
    """Bilinear resize treating pixels as unit cells."""
    h, w = img.shape
    nh, nw = shape
    ys = (np.arange(nh) + 0.5) * (h / nh) - 0.5
    xs = (np.arange(nw) + 0.5) * (w / nw) - 0.5
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    return bilinear_sample(img, gx, gy, outside=None)


def _pyramid(img, p: FlowParams):
    levels = [img]
    sigma = math.sqrt(1.0 / p.ratio**2 - 1.0) * 0.6
    while True:
        h, w = levels[-1].shape
        nw = int(round(w * p.ratio))
        nh = max(int(round(h * p.ratio)), 2)
        if nw < p.min_width:
            break
        smooth = ndimage.gaussian_filter(levels[-1], sigma, mode="nearest")
        levels.append(_resize(smooth, (nh, nw)))
    return levels


def dense_flow(prev, next, params: FlowParams | None = None) -> FlowField:
    """Dense flow from ``prev`` to ``next``: ``next(x + w(x)) ≈ prev(x)``."""
    p = params or FlowParams()
    a = to_gray(prev)
    b = to_gray(next)
    if a.shape != b.shape:
        raise InvalidArgumentError(f"frame extents differ: {a.shape} vs {b.shape}")
    pyr1 = _pyramid(a, p)
    pyr2 = _pyramid(b, p)
    u = np.zeros_like(pyr1[-1])
    v = np.zeros_like(pyr1[-1])
    traces = []
    for lvl in range(len(pyr1) - 1, -1, -1):
        i1, i2 = pyr1[lvl], pyr2[lvl]
        if u.shape != i1.shape:
            sx = i1.shape[1] / u.shape[1]
            sy = i1.shape[0] / u.shape[0]
            u = _resize(u, i1.shape) * sx
            v = _resize(v, i1.shape) * sy
        u = np.ascontiguousarray(u)
        v = np.ascontiguousarray(v)
        trace = np.empty(p.n_outer + 1)
        _solve_level(np.ascontiguousarray(i1), np.ascontiguousarray(i2), u, v,
                     p.alpha, p.omega, p.n_outer, p.n_inner, p.n_sor, trace)
        traces.append(trace.tolist())
    return FlowField(u, v, traces)


def transform_flow(f: FlowField, T: SimilarityTransform, out_shape) -> FlowField:
    """Carry a flow field into the frame of ``T``.

    Vector positions are resampled like :func:`warp_image`; vector
    components are rotated and scaled by the linear part of ``T``.
    """
    u = warp_image(f.u, T, out_shape)
    v = warp_image(f.v, T, out_shape)
    lin = T.linear()
    nu = lin[0, 0] * u + lin[0, 1] * v
    nv = lin[1, 0] * u + lin[1, 1] * v
    return FlowField(nu, nv)


# -- cache files ---------------------------------------------------------------

def write_flow(path, f: FlowField):
    """Little-endian: int32 width, int32 height, float32 u-plane, float32 v-plane."""
    h, w = f.u.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<ii", w, h))
        fh.write(np.asarray(f.u, dtype="<f4").tobytes())
        fh.write(np.asarray(f.v, dtype="<f4").tobytes())


def read_flow(path) -> FlowField:
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise FormatError(f"{path}: truncated flow header")
    w, h = struct.unpack("<ii", data[:8])
    n = w * h
    if w < 1 or h < 1 or len(data) != 8 + 8 * n:
        raise FormatError(f"{path}: flow file size does not match {w}x{h}")
    planes = np.frombuffer(data, dtype="<f4", offset=8).astype(np.float64)
    return FlowField(planes[:n].reshape(h, w), planes[n:].reshape(h, w))

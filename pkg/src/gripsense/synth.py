"""Synthetic grip scenes with exact ground truth.

A scene is a cartoon two-finger pinch: an index finger and a thumb pivot
about points on a palm and press on a grey bar carrying a yellow marker
disc. Force darkens the fingertips (value channel, linear in force) and
rotates the fingers toward the bar (tip displacement linear in force), so
clenching produces inward flow. The hand-and-tool layer is moved by a slow
similarity jitter against a static background; a green LED square switches
on when the force log starts.

Geometry is defined in scene units with the marker at the origin and the
hand extending toward +x; ``SceneParams.hand_scale`` converts to pixels.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import InvalidArgumentError
from .imaging import hsv_to_rgb
from .transform import SimilarityTransform

LOG_RATE_HZ = 100.0

# scene geometry, in scene units
BAR_X = (-1.6, 0.15)
BAR_HALF_HEIGHT = 0.075
MARKER_RADIUS = 0.085
FINGER_PIVOT = (1.9, 0.42)        # thumb pivot; the index finger mirrors it to -y
FINGER_REST_TIP = (0.0, 0.33)
FINGER_HALF_WIDTH = 0.15
FINGER_TAIL = 0.1                 # capsule extends this far behind the pivot
PALM_CENTER = (2.2, 0.0)
PALM_AXES = (0.45, 0.75)
DARKEN_REACH = 0.5                # fingertip darkening falls to zero this far from the tip

BAR_RGB = (105, 105, 112)
MARKER_RGB = (250, 222, 12)
LED_OFF_RGB = (35, 38, 35)
LED_ON_RGB = (40, 230, 60)
BACKGROUND_RGB = (55, 70, 98)


@dataclass
class ForceTrajectory:
    """Per-sensor force sampled at 100 Hz, in raw 10-bit units."""

    left: np.ndarray
    right: np.ndarray
    rate_hz: float = LOG_RATE_HZ

    def __post_init__(self):
        self.left = np.asarray(self.left, dtype=float)
        self.right = np.asarray(self.right, dtype=float)
        if self.left.shape != self.right.shape or self.left.ndim != 1:
            raise InvalidArgumentError("left and right force series must be 1-D and equally long")
        lo = min(self.left.min(), self.right.min())
        hi = max(self.left.max(), self.right.max())
        if lo < 0 or hi > 1023:
            raise InvalidArgumentError(f"force outside [0, 1023]: [{lo:.1f}, {hi:.1f}]")

    @property
    def duration(self) -> float:
        return self.left.size / self.rate_hz

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.left.size) / self.rate_hz

    @property
    def average(self) -> np.ndarray:
        return 0.5 * (self.left + self.right)


def make_trajectory(duration=100.0, seed=0, level=(150.0, 850.0), n_components=6,
                    max_freq=3.0, imbalance=20.0, quiet=()) -> ForceTrajectory:
    """Random band-limited grip profile.

    The average force is a sum of sinusoids with frequencies at most
    ``max_freq`` Hz, rescaled to span ``level``. ``quiet`` holds
    ``(t_start, t_end, f_start, f_end)`` tuples: inside each window the force
    follows a slow linear ramp, blended in and out over one second.
    """
    if max_freq <= 0 or max_freq > 3.0:
        raise InvalidArgumentError("grip trajectories are band-limited to 3 Hz")
    lo, hi = level
    if not 0 <= lo < hi <= 1023:
        raise InvalidArgumentError(f"invalid force level range {level}")
    rng = np.random.default_rng(seed)
    n = int(round(duration * LOG_RATE_HZ))
    t = np.arange(n) / LOG_RATE_HZ
    freqs = np.exp(rng.uniform(np.log(0.05), np.log(min(1.2, max_freq)), n_components))
    freqs[-1] = rng.uniform(1.2, max_freq) if max_freq > 1.2 else freqs[-1]
    amps = 1.0 / np.sqrt(freqs)
    amps[-1] *= 0.25
    phases = rng.uniform(0, 2 * np.pi, n_components)
    f = (amps[:, None] * np.sin(2 * np.pi * freqs[:, None] * t + phases[:, None])).sum(axis=0)
    f = lo + (f - f.min()) * (hi - lo) / (f.max() - f.min())
    for t0, t1, f0, f1 in quiet:
        ramp = np.interp(t, [t0, t1], [f0, f1])
        weight = np.clip(np.minimum(t - t0, t1 - t) + 0.5, 0.0, 1.0)
        weight = 0.5 - 0.5 * np.cos(np.pi * weight)
        f = (1 - weight) * f + weight * ramp
    d_freq = rng.uniform(0.05, 0.3)
    d = imbalance * np.sin(2 * np.pi * d_freq * t + rng.uniform(0, 2 * np.pi))
    left = np.clip(f + d, 0, 1023)
    right = np.clip(f - d, 0, 1023)
    return ForceTrajectory(left, right)


@dataclass
class SceneParams:
    width: int = 480
    height: int = 360
    hand_scale: float = 60.0           # pixels per scene unit
    origin: tuple | None = None        # image position of the marker; default (0.36 W, 0.5 H)
    base_rotation: float = 0.0
    skin_hsv: tuple = (0.04, 0.42, 0.85)
    color_gain: float = 3.0e-4         # value-channel drop per unit force at the fingertip
    contraction_gain: float = 0.008    # fingertip approach in pixels per unit force
    texture_contrast: float = 0.08
    jitter_rotation: float = 0.03      # radians
    jitter_translation: float = 3.0    # pixels
    jitter_scale: float = 0.02         # relative
    jitter_max_freq: float = 0.2       # Hz
    led_onset: int = 12
    led_rect: tuple = (18, 18, 42, 42)   # x0, y0, x1, y1 (exclusive)
    noise_sigma: float = 2.0           # counts
    fps: float = 59.95
    supersample: int = 2               # samples per pixel along each axis
    seed: int = 0

    def __post_init__(self):
        if self.width < 16 or self.height < 16:
            raise InvalidArgumentError("canvas must be at least 16x16")
        if self.hand_scale <= 0 or self.fps <= 0:
            raise InvalidArgumentError("hand_scale and fps must be positive")
        gains = (self.color_gain, self.contraction_gain, self.texture_contrast, self.noise_sigma,
                 self.jitter_rotation, self.jitter_translation, self.jitter_scale)
        if min(gains) < 0:
            raise InvalidArgumentError("gains, jitter amplitudes and noise must be non-negative")
        if self.jitter_scale >= 0.5:
            raise InvalidArgumentError("jitter_scale must be below 0.5")
        if self.led_onset < 0 or self.supersample < 1:
            raise InvalidArgumentError("led_onset must be >= 0 and supersample >= 1")
        x0, y0, x1, y1 = self.led_rect
        if not (0 <= x0 < x1 <= self.width and 0 <= y0 < y1 <= self.height):
            raise InvalidArgumentError(f"LED rectangle {self.led_rect} outside the canvas")

    @property
    def led_region(self) -> tuple:
        """Inner half of the LED square, safe to average over."""
        x0, y0, x1, y1 = self.led_rect
        qx, qy = (x1 - x0) // 4, (y1 - y0) // 4
        return (x0 + qx, y0 + qy, x1 - qx, y1 - qy)


def _smooth_noise(rng, shape, sigma):
    n = ndimage.gaussian_filter(rng.standard_normal(shape), sigma, mode="wrap")
    return n / (np.abs(n).max() + 1e-12)


class _Texture:
    """Smooth noise on a regular grid of scene-unit cells."""

    def __init__(self, rng, x_range, y_range, cell=0.01, sigma_cells=2.0):
        self.x0, self.y0 = x_range[0], y_range[0]
        self.cell = cell
        nx = int(math.ceil((x_range[1] - x_range[0]) / cell)) + 1
        ny = int(math.ceil((y_range[1] - y_range[0]) / cell)) + 1
        self.grid = _smooth_noise(rng, (ny, nx), sigma_cells)

    def __call__(self, x, y):
        coords = np.stack([(y - self.y0) / self.cell, (x - self.x0) / self.cell])
        return ndimage.map_coordinates(self.grid, coords, order=1, mode="nearest")


class SyntheticScene:
    """Renders frame ``k`` of a scene on demand; all randomness is seeded."""

    def __init__(self, traj: ForceTrajectory, params: SceneParams | None = None):
        self.traj = traj
        self.p = params or SceneParams()
        p = self.p
        self.n_frames = int(round(traj.duration * p.fps))
        if self.n_frames < 2:
            raise InvalidArgumentError("trajectory too short for two frames")
        self.log_t_ms = np.arange(traj.left.size) * int(round(1000 / traj.rate_hz))
        self.log_left = np.rint(traj.left).astype(int)
        self.log_right = np.rint(traj.right).astype(int)
        tau = np.maximum((np.arange(self.n_frames) - p.led_onset) / p.fps, 0.0) * 1000.0
        if tau[-1] > self.log_t_ms[-1]:
            raise InvalidArgumentError("force log shorter than the video")
        self.frame_left = np.interp(tau, self.log_t_ms, self.log_left)
        self.frame_right = np.interp(tau, self.log_t_ms, self.log_right)

        rng = np.random.default_rng([p.seed, 1])
        self._jitter = self._jitter_processes(rng)
        self._finger_tex = [_Texture(rng, (-0.2, 1.9), (-0.25, 0.25)) for _ in range(2)]
        self._palm_tex = _Texture(rng, (1.6, 2.8), (-0.9, 0.9))
        self._background = self._render_background(rng)
        if p.origin is None:
            self.origin = (0.36 * p.width, 0.5 * p.height)
        else:
            self.origin = tuple(p.origin)
        b = np.array(FINGER_PIVOT) - np.array(FINGER_REST_TIP)
        self._finger_len = float(np.hypot(*b))
        self._rest_angle = math.atan2(FINGER_REST_TIP[1] - FINGER_PIVOT[1],
                                      FINGER_REST_TIP[0] - FINGER_PIVOT[0])

    # -- per-frame state -------------------------------------------------------

    def _jitter_processes(self, rng):
        t = np.arange(self.n_frames) / self.p.fps
        out = []
        for _ in range(4):
            freqs = rng.uniform(0.02, self.p.jitter_max_freq, 3)
            phases = rng.uniform(0, 2 * np.pi, 3)
            s = np.sin(2 * np.pi * freqs[:, None] * t + phases[:, None]).sum(axis=0) / 3.0
            out.append(s)
        return np.array(out)

    def jitter(self, k) -> tuple:
        """(rotation, log-scale, tx, ty) of the hand layer in frame ``k``."""
        p = self.p
        r, s, x, y = self._jitter[:, k]
        return (p.jitter_rotation * r, math.log1p(p.jitter_scale * s),
                p.jitter_translation * x, p.jitter_translation * y)

    def scene_to_image(self, k) -> SimilarityTransform:
        p = self.p
        rot, log_s, jx, jy = self.jitter(k)
        return SimilarityTransform(p.hand_scale * math.exp(log_s), p.base_rotation + rot,
                                   self.origin[0] + jx, self.origin[1] + jy)

    def led_on(self, k) -> bool:
        return k >= self.p.led_onset

    def finger_angles(self, k):
        """Pivot angles of the index finger and thumb in frame ``k``."""
        # _rest_angle is the thumb's pivot-to-tip direction; the index finger mirrors it
        per_unit = self.p.contraction_gain / (self._finger_len * self.p.hand_scale)
        upper = -self._rest_angle - per_unit * self.frame_left[k]
        lower = self._rest_angle + per_unit * self.frame_right[k]
        return upper, lower

    # -- rendering -------------------------------------------------------------

    def _render_background(self, rng):
        p = self.p
        ys, xs = np.mgrid[0:p.height, 0:p.width].astype(float)
        shade = 10 * np.sin(xs / 53.0 + rng.uniform(0, 6)) * np.cos(ys / 41.0 + rng.uniform(0, 6))
        bg = np.array(BACKGROUND_RGB, float)[None, None, :] + shade[..., None]
        return bg

    def _hand_bbox(self, T):
        ext = PALM_AXES[1] + 0.05
        corners = np.array([[BAR_X[0], -ext], [BAR_X[0], ext],
                            [PALM_CENTER[0] + PALM_AXES[0] + 0.05, -ext],
                            [PALM_CENTER[0] + PALM_AXES[0] + 0.05, ext]])
        img = T.apply(corners)
        x0 = max(int(math.floor(img[:, 0].min())) - 2, 0)
        x1 = min(int(math.ceil(img[:, 0].max())) + 3, self.p.width)
        y0 = max(int(math.floor(img[:, 1].min())) - 2, 0)
        y1 = min(int(math.ceil(img[:, 1].max())) + 3, self.p.height)
        return x0, y0, x1, y1

    def _shade_layer(self, k, sx, sy):
        """Colour and skin/coverage labels of the hand layer at scene points."""
        p = self.p
        rgb = np.zeros(sx.shape + (3,))
        covered = np.zeros(sx.shape, dtype=bool)
        skin = np.zeros(sx.shape, dtype=bool)

        bar = (sx >= BAR_X[0]) & (sx <= BAR_X[1]) & (np.abs(sy) <= BAR_HALF_HEIGHT)
        rgb[bar] = BAR_RGB
        covered |= bar

        h0, s0, v0 = p.skin_hsv
        pcx, pcy = PALM_CENTER
        palm = ((sx - pcx) / PALM_AXES[0]) ** 2 + ((sy - pcy) / PALM_AXES[1]) ** 2 <= 1.0
        if palm.any():
            tex = self._palm_tex(sx[palm], sy[palm])
            hsv = np.stack([np.full(tex.shape, h0), s0 * (1 + 0.5 * p.texture_contrast * tex),
                            v0 * (1 + p.texture_contrast * tex)], axis=-1)
            rgb[palm] = hsv_to_rgb(np.clip(hsv, 0, 1)) * 255.0
        skin |= palm

        upper, lower = self.finger_angles(k)
        forces = (self.frame_left[k], self.frame_right[k])
        seg_end = self._finger_len - FINGER_HALF_WIDTH
        for idx, (ang, sign) in enumerate(((upper, -1.0), (lower, 1.0))):
            bx, by = FINGER_PIVOT[0], sign * FINGER_PIVOT[1]
            c, s = math.cos(ang), math.sin(ang)
            # finger-local coordinates: along from the pivot, across (mirrored for the thumb)
            dx, dy = sx - bx, sy - by
            along = dx * c + dy * s
            across = (-dx * s + dy * c) * sign
            clamped = np.clip(along, -FINGER_TAIL, seg_end)
            inside = (along - clamped) ** 2 + across**2 <= FINGER_HALF_WIDTH**2
            if not inside.any():
                continue
            a_in, c_in = along[inside], across[inside]
            tex = self._finger_tex[idx](a_in, c_in)
            tip_dist = np.hypot(self._finger_len - a_in, c_in)
            weight = np.clip(1.0 - tip_dist / DARKEN_REACH, 0.0, 1.0)
            val = v0 * (1 + p.texture_contrast * tex) - p.color_gain * forces[idx] * weight
            hsv = np.stack([np.full(tex.shape, h0), s0 * (1 + 0.5 * p.texture_contrast * tex),
                            val], axis=-1)
            rgb[inside] = hsv_to_rgb(np.clip(hsv, 0, 1)) * 255.0
            skin |= inside
        covered |= skin

        marker = sx * sx + sy * sy <= MARKER_RADIUS**2
        rgb[marker] = MARKER_RGB
        skin &= ~marker
        covered |= marker
        return rgb, covered, skin

    def render(self, k):
        """Return ``(frame uint8 HxWx3, skin mask, truth dict)`` for frame ``k``."""
        if not 0 <= k < self.n_frames:
            raise InvalidArgumentError(f"frame {k} outside [0, {self.n_frames})")
        p = self.p
        T = self.scene_to_image(k)
        x0, y0, x1, y1 = self._hand_bbox(T)
        ss = p.supersample
        offs = (np.arange(ss) + 0.5) / ss - 0.5
        ys = (np.arange(y0, y1)[:, None] + offs[None, :]).ravel()
        xs = (np.arange(x0, x1)[:, None] + offs[None, :]).ravel()
        gy, gx = np.meshgrid(ys, xs, indexing="ij")
        scene = T.inverse().apply(np.stack([gx, gy], axis=-1))
        rgb, covered, skin = self._shade_layer(k, scene[..., 0], scene[..., 1])

        bh, bw = y1 - y0, x1 - x0
        bg = self._background[y0:y1, x0:x1]
        bg_up = np.repeat(np.repeat(bg, ss, axis=0), ss, axis=1)
        layer = np.where(covered[..., None], rgb, bg_up)
        patch = layer.reshape(bh, ss, bw, ss, 3).mean(axis=(1, 3))
        skin_cov = skin.reshape(bh, ss, bw, ss).mean(axis=(1, 3))

        img = self._background.copy()
        img[y0:y1, x0:x1] = patch
        lx0, ly0, lx1, ly1 = p.led_rect
        img[ly0:ly1, lx0:lx1] = LED_ON_RGB if self.led_on(k) else LED_OFF_RGB
        if p.noise_sigma > 0:
            rng = np.random.default_rng([p.seed, 2, k])
            img = img + rng.normal(0.0, p.noise_sigma, img.shape)
        frame = np.clip(np.rint(img), 0, 255).astype(np.uint8)

        mask = np.zeros((p.height, p.width), dtype=bool)
        mask[y0:y1, x0:x1] = skin_cov >= 0.5
        marker_xy = T.apply([0.0, 0.0])
        rows, cols = np.nonzero(mask)
        rot, log_s, jx, jy = self.jitter(k)
        truth = {
            "frame": k,
            "force_left": float(self.frame_left[k]),
            "force_right": float(self.frame_right[k]),
            "force_avg": 0.5 * float(self.frame_left[k] + self.frame_right[k]),
            "marker_x": float(marker_xy[0]),
            "marker_y": float(marker_xy[1]),
            "skin_cx": float(cols.mean()) if cols.size else float("nan"),
            "skin_cy": float(rows.mean()) if rows.size else float("nan"),
            "led_on": int(self.led_on(k)),
            "scale": T.scale,
            "rotation": T.rotation,
            "tx": T.tx,
            "ty": T.ty,
            "jitter_rotation": rot,
            "jitter_log_scale": log_s,
            "jitter_tx": jx,
            "jitter_ty": jy,
        }
        return frame, mask, truth

    # -- force log -------------------------------------------------------------

    def force_log_rows(self):
        return zip(self.log_t_ms.tolist(), self.log_left.tolist(), self.log_right.tolist())


TRUTH_COLUMNS = ["frame", "force_left", "force_right", "force_avg", "marker_x", "marker_y",
                 "skin_cx", "skin_cy", "led_on", "scale", "rotation", "tx", "ty",
                 "jitter_rotation", "jitter_log_scale", "jitter_tx", "jitter_ty"]


def generate(traj: ForceTrajectory, params: SceneParams, out_dir, save_masks=False,
             progress=None):
    """Write a dataset directory in the ingest formats.

    Produces ``manifest``, ``frames/frame_%06d.ppm``, ``forces.csv``,
    ``truth.csv`` and optionally ``masks/mask_%06d.pbm``.
    """
    from .ingest import write_force_log, write_manifest, write_pbm, write_ppm

    scene = SyntheticScene(traj, params)
    out = Path(out_dir)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    if save_masks:
        (out / "masks").mkdir(exist_ok=True)
    write_force_log(out / "forces.csv", scene.force_log_rows())
    with open(out / "truth.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRUTH_COLUMNS)
        for k in range(scene.n_frames):
            frame, mask, truth = scene.render(k)
            write_ppm(out / "frames" / f"frame_{k:06d}.ppm", frame)
            if save_masks:
                write_pbm(out / "masks" / f"mask_{k:06d}.pbm", mask)
            w.writerow([_fmt(truth[c]) for c in TRUTH_COLUMNS])
            if progress is not None:
                progress(k + 1, scene.n_frames)
    write_manifest(out / "manifest", fps=params.fps, frames=scene.n_frames,
                   width=params.width, height=params.height, pattern="frame_%06d.ppm",
                   led_region=params.led_region,
                   scene=asdict(params))
    return scene


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)

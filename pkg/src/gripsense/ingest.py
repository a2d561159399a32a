"""Frame sequences, force logs and their synchronisation.

A dataset directory holds::

    manifest            "key value" lines: fps, frames, width, height, pattern, ...
    frames/frame_%06d.ppm (or .png)
    forces.csv          header-less "t_ms,left_raw,right_raw" at 100 Hz
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidArgumentError, ParseError, RangeError, SyncError
from .imaging import to_unit

ADC_MAX = 1023
DEFAULT_FPS = 59.95
LED_MARGIN = 0.2


@dataclass(frozen=True)
class ForceRecord:
    t_ms: int
    left_raw: int
    right_raw: int


# -- image files -------------------------------------------------------------

def write_ppm(path, img):
    a = np.ascontiguousarray(img, dtype=np.uint8)
    if a.ndim != 3 or a.shape[2] != 3:
        raise InvalidArgumentError("PPM frames must be 3-channel")
    h, w = a.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(a.tobytes())


def write_pbm(path, mask):
    m = np.asarray(mask, dtype=bool)
    h, w = m.shape
    with open(path, "wb") as fh:
        fh.write(f"P4\n{w} {h}\n".encode("ascii"))
        fh.write(np.packbits(m, axis=1).tobytes())


def _pnm_header(data, n_fields):
    fields = []
    pos = 0
    while len(fields) < n_fields:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    return fields, pos + 1


def read_pnm(path) -> np.ndarray:
    """Read binary PPM (P6, 8-bit) or PBM (P4) files."""
    data = Path(path).read_bytes()
    magic = data[:2]
    if magic == b"P6":
        (_, w, h, maxval), off = _pnm_header(data, 4)
        w, h = int(w), int(h)
        if int(maxval) != 255:
            raise FormatError(f"{path}: only 8-bit PPM is supported")
        if len(data) - off < w * h * 3:
            raise FormatError(f"{path}: truncated PPM")
        return np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=off).reshape(h, w, 3).copy()
    if magic == b"P4":
        (_, w, h), off = _pnm_header(data, 3)
        w, h = int(w), int(h)
        row = (w + 7) // 8
        bits = np.frombuffer(data, dtype=np.uint8, count=row * h, offset=off).reshape(h, row)
        return np.unpackbits(bits, axis=1)[:, :w].astype(bool)
    raise FormatError(f"{path}: not a binary PPM/PBM file")


def read_frame(path) -> np.ndarray:
    p = Path(path)
    if p.suffix.lower() in (".ppm", ".pbm"):
        return read_pnm(p)
    from PIL import Image

    with Image.open(p) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


# -- manifest ----------------------------------------------------------------

def write_manifest(path, fps, frames, width, height, pattern, led_region=None, scene=None):
    lines = [f"fps {fps!r}", f"frames {frames}", f"width {width}", f"height {height}",
             f"pattern {pattern}"]
    if led_region is not None:
        lines.append("led_region " + " ".join(str(int(v)) for v in led_region))
    if scene is not None:
        lines.append("scene " + json.dumps(scene, sort_keys=True))
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path) -> dict:
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition(" ")
        if not value:
            raise ParseError(f"manifest entry {key!r} has no value", n)
        out[key] = value.strip()
    try:
        out["fps"] = float(out.get("fps", DEFAULT_FPS))
        out["frames"] = int(out["frames"])
        if "led_region" in out:
            out["led_region"] = tuple(int(v) for v in out["led_region"].split())
        if "scene" in out:
            out["scene"] = json.loads(out["scene"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: bad manifest ({exc})") from exc
    return out


class FrameSequence:
    """Numbered frames in a directory, loaded lazily."""

    def __init__(self, root, fps=None, pattern=None, count=None):
        self.root = Path(root)
        manifest = {}
        if (self.root / "manifest").exists():
            manifest = read_manifest(self.root / "manifest")
        self.manifest = manifest
        self.fps = float(fps if fps is not None else manifest.get("fps", DEFAULT_FPS))
        self.pattern = pattern or manifest.get("pattern", "frame_%06d.ppm")
        frame_dir = self.root / "frames"
        self.frame_dir = frame_dir if frame_dir.is_dir() else self.root
        if count is None:
            count = manifest.get("frames")
        if count is None:
            count = 0
            while (self.frame_dir / (self.pattern % count)).exists():
                count += 1
        self.count = int(count)
        if not self.fps > 0:
            raise FormatError(f"{root}: fps must be positive")
        if self.count < 2:
            raise FormatError(f"{root}: need at least two frames, found {self.count}")

    def __len__(self):
        return self.count

    def path(self, k) -> Path:
        return self.frame_dir / (self.pattern % k)

    def __getitem__(self, k) -> np.ndarray:
        if not 0 <= k < self.count:
            raise IndexError(k)
        p = self.path(k)
        if not p.exists():
            raise FormatError(f"missing frame file {p}")
        return read_frame(p)

    def __iter__(self):
        for k in range(self.count):
            yield self[k]


# -- force logs ----------------------------------------------------------------

def parse_force_log(path) -> list[ForceRecord]:
    records = []
    prev_t = None
    with open(path, "r", newline="") as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ParseError(f"expected 't_ms,left_raw,right_raw', got {line!r}", n)
            try:
                t, left, right = (int(x) for x in parts)
            except ValueError:
                raise ParseError(f"non-integer field in {line!r}", n) from None
            for v in (left, right):
                if not 0 <= v <= ADC_MAX:
                    raise RangeError(f"line {n}: sample {v} outside the 10-bit range")
            if prev_t is not None and t <= prev_t:
                kind = "duplicate" if t == prev_t else "non-monotonic"
                raise FormatError(f"line {n}: {kind} timestamp {t} after {prev_t}")
            prev_t = t
            records.append(ForceRecord(t, left, right))
    if not records:
        raise FormatError(f"{path}: empty force log")
    return records


def write_force_log(path, rows):
    with open(path, "w", newline="") as fh:
        for t, left, right in rows:
            fh.write(f"{int(t)},{int(left)},{int(right)}\n")


# -- synchronisation ---------------------------------------------------------

def _region_means(frame, region):
    x0, y0, x1, y1 = region
    patch = to_unit(frame)[y0:y1, x0:x1]
    return patch.reshape(-1, patch.shape[-1]).mean(axis=0)


def detect_led_onset(frames, led_region, margin=LED_MARGIN) -> int:
    """First frame where the LED region is green-dominant and brighter than frame 0.

    Green must exceed both red and blue by ``margin`` (fraction of full
    scale). From frame 1 on it must also exceed its frame-0 level by
    ``margin``; frame 0 itself qualifies on dominance alone, which covers
    an LED already lit when recording began.
    """
    x0, y0, x1, y1 = led_region
    it = iter(frames)
    first = next(it)
    h, w = first.shape[:2]
    if not (0 <= x0 < x1 <= w and 0 <= y0 < y1 <= h):
        raise InvalidArgumentError(f"LED region {led_region} outside the {w}x{h} frame")
    r, g, b = _region_means(first, led_region)
    green0 = g
    if g - r > margin and g - b > margin:
        return 0
    for k, frame in enumerate(it, 1):
        r, g, b = _region_means(frame, led_region)
        if g - r > margin and g - b > margin and g - green0 > margin:
            return k
    raise SyncError("LED onset not found")


def resample_force(records, onset_frame, fps, n_frames):
    """Force at each frame time, by linear interpolation in the log.

    Frame ``k`` sits ``(k - onset_frame) / fps`` seconds after the first
    record; frames before the onset take the first record's values.
    Returns ``(left, right)`` float arrays.
    """
    t = np.array([r.t_ms for r in records], dtype=float)
    left = np.array([r.left_raw for r in records], dtype=float)
    right = np.array([r.right_raw for r in records], dtype=float)
    tau = (np.arange(n_frames) - onset_frame) / fps * 1000.0 + t[0]
    tau = np.maximum(tau, t[0])
    if tau.size and tau[-1] > t[-1] + 1e-9:
        bad = int(np.argmax(tau > t[-1] + 1e-9))
        raise RangeError(f"frame {bad} at {tau[bad]:.3f} ms lies beyond the log end ({t[-1]:.0f} ms)")
    return np.interp(tau, t, left), np.interp(tau, t, right)


@dataclass
class SyncedDataset:
    frames: FrameSequence
    force_left: np.ndarray
    force_right: np.ndarray
    sync_offset_frames: int

    @property
    def force_avg(self) -> np.ndarray:
        return 0.5 * (self.force_left + self.force_right)

    def __len__(self):
        return len(self.frames)


def load_dataset(root, led_region=None, margin=LED_MARGIN) -> SyncedDataset:
    frames = FrameSequence(root)
    region = led_region or frames.manifest.get("led_region")
    if region is None:
        raise InvalidArgumentError(f"{root}: no LED region given and none in the manifest")
    onset = detect_led_onset(frames, region, margin=margin)
    records = parse_force_log(Path(root) / "forces.csv")
    left, right = resample_force(records, onset, frames.fps, len(frames))
    return SyncedDataset(frames, left, right, onset)


SYNC_COLUMNS = ["frame", "force_left", "force_right", "force_avg"]


def write_sync(path, ds: SyncedDataset):
    with open(path, "w", newline="") as fh:
        fh.write(f"# sync_offset_frames {ds.sync_offset_frames}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SYNC_COLUMNS)
        for k in range(len(ds.force_left)):
            w.writerow([k, repr(float(ds.force_left[k])), repr(float(ds.force_right[k])),
                        repr(float(ds.force_avg[k]))])


def read_sync(path):
    """Return ``(frame, left, right, avg, offset)`` from a sync CSV."""
    offset = None
    rows = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "sync_offset_frames":
                    offset = int(parts[1])
                continue
            rows.append(line)
    reader = csv.reader(rows)
    header = next(reader, None)
    if header != SYNC_COLUMNS:
        raise FormatError(f"{path}: unexpected sync header {header}")
    data = [[float(x) for x in r] for r in reader if r]
    if not data:
        raise FormatError(f"{path}: no rows")
    a = np.array(data)
    if not all(math.isfinite(v) for v in a.ravel()):
        raise FormatError(f"{path}: non-finite force values")
    return a[:, 0].astype(int), a[:, 1], a[:, 2], a[:, 3], offset

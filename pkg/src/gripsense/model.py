"""Per-stream regression from histogram features to force labels.

Features are standardised, then either ridge regression or an
inverse-distance weighted k-nearest-neighbour average maps them to a label.
Both are deterministic, and predictions are computed row by row so a batch
and a single query give the same bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import DatasetError, FormatError, InvalidArgumentError, NumericalError
from .features import DEFAULT_SPATIAL, DIR_SPEC, HistogramLimits
from .imaging import HistogramSpec
from .signal import FilterSpec, butterworth_lowpass, discrete_diff

MODEL_MAGIC = "gripsense-model"
MODEL_VERSION = "v1"
KINDS = ("ridge", "knn")
STREAMS = ("spatial", "temporal")


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    frames: np.ndarray
    stream: str = "spatial"
    source: np.ndarray | None = None   # which recording each row comes from

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.frames = np.asarray(self.frames, dtype=int)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0] or self.frames.shape != self.y.shape:
            raise DatasetError(f"{self.X.shape[0]} feature rows, {self.y.size} labels, {self.frames.size} frames")
        if self.source is None:
            self.source = np.zeros(self.y.size, dtype=int)
        self.source = np.asarray(self.source, dtype=int)

    def __len__(self):
        return self.y.size

    def subset(self, idx) -> Dataset:
        return Dataset(self.X[idx], self.y[idx], self.frames[idx], self.stream, self.source[idx])


# -- splitting -----------------------------------------------------------------

def split_sequential(n: int, block_len: int = 1500, starts=None, test_blocks: int | None = None,
                     segments=None):
    """Indices of contiguous test blocks and of the remaining training rows.

    ``segments`` lists the lengths of consecutive recordings; by default the
    last ``block_len`` rows of each recording form one test block. Explicit
    ``starts`` (global row offsets) override this.
    """
    n = int(n)
    if block_len < 1:
        raise InvalidArgumentError("block length must be positive")
    if starts is None:
        segments = list(segments) if segments is not None else [n]
        if sum(segments) != n:
            raise InvalidArgumentError(f"segment lengths sum to {sum(segments)}, not {n}")
        ends = np.cumsum(segments)
        starts = [int(e) - block_len for e in ends]
        if test_blocks is not None:
            starts = starts[-test_blocks:] if test_blocks > 0 else []
    starts = sorted(int(s) for s in starts)
    if block_len * len(starts) > n:
        raise InvalidArgumentError(f"{len(starts)} blocks of {block_len} exceed {n} rows")
    test = np.zeros(n, dtype=bool)
    for s in starts:
        if s < 0 or s + block_len > n:
            raise InvalidArgumentError(f"test block [{s}, {s + block_len}) outside [0, {n})")
        if test[s:s + block_len].any():
            raise InvalidArgumentError("test blocks overlap")
        test[s:s + block_len] = True
    train_idx = np.flatnonzero(~test)
    test_idx = np.flatnonzero(test)
    if train_idx.size == 0:
        raise InvalidArgumentError("split leaves no training rows")
    return train_idx, test_idx


# -- labels --------------------------------------------------------------------

def make_labels(force_avg, stream: str, spec: FilterSpec | None = None) -> np.ndarray:
    """Spatial labels are the force itself; temporal labels its filtered difference."""
    f = np.asarray(force_avg, dtype=float)
    if stream == "spatial":
        return f.copy()
    if stream == "temporal":
        return butterworth_lowpass(discrete_diff(f), spec or FilterSpec())
    raise InvalidArgumentError(f"unknown stream {stream!r}")


# -- regressors ----------------------------------------------------------------

@dataclass
class RegressorModel:
    kind: str
    mean: np.ndarray
    scale: np.ndarray
    stream: str = "spatial"
    weights: np.ndarray | None = None
    bias: float = 0.0
    lam: float = 1.0
    k: int = 15
    train_X: np.ndarray | None = None   # standardised rows (knn)
    train_y: np.ndarray | None = None
    limits: HistogramLimits | None = None
    extra: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return int(self.mean.size)


def _standardise_params(X):
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    # constant columns carry no information; leave them unscaled
    scale = np.where(scale > 1e-12, scale, 1.0)
    return mean, scale


def train(ds: Dataset, kind: str = "ridge", lam: float = 1.0, k: int = 15,
          limits: HistogramLimits | None = None) -> RegressorModel:
    if kind not in KINDS:
        raise InvalidArgumentError(f"unknown regressor {kind!r}")
    X, y = ds.X, ds.y
    n, d = X.shape
    if n == 0:
        raise DatasetError("no training rows")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise DatasetError("training data contain non-finite values")
    mean, scale = _standardise_params(X)
    Z = (X - mean) / scale
    if kind == "ridge":
        if n < d:
            raise DatasetError(f"ridge needs at least {d} rows, got {n}")
        if lam < 0:
            raise InvalidArgumentError("ridge penalty must be non-negative")
        bias = float(np.mean(y))
        A = Z.T @ Z + lam * np.eye(d)
        rhs = Z.T @ (y - bias)
        try:
            c, low = linalg.cho_factor(A, lower=True, check_finite=True)
            w = linalg.cho_solve((c, low), rhs)
        except linalg.LinAlgError as exc:
            raise NumericalError(f"ridge system is singular (lambda={lam})") from exc
        if np.linalg.cond(A) > 1e14:
            raise NumericalError(f"ridge system is numerically singular (lambda={lam})")
        return RegressorModel("ridge", mean, scale, ds.stream, weights=w, bias=bias, lam=float(lam),
                              limits=limits)
    if k < 1 or n < k:
        raise DatasetError(f"knn with k={k} needs at least {k} rows, got {n}")
    return RegressorModel("knn", mean, scale, ds.stream, k=int(k), train_X=Z, train_y=y.copy(),
                          limits=limits)


def _predict_row(m: RegressorModel, z) -> float:
    if m.kind == "ridge":
        return m.bias + math.fsum((z * m.weights).tolist())
    d2 = ((m.train_X - z) ** 2).sum(axis=1)
    order = np.argsort(d2, kind="stable")[: m.k]
    dist = np.sqrt(d2[order])
    exact = dist == 0
    if exact.any():
        return float(np.mean(m.train_y[order][exact]))
    w = 1.0 / dist
    return math.fsum((w * m.train_y[order]).tolist()) / math.fsum(w.tolist())


def predict(m: RegressorModel, X) -> np.ndarray:
    """Predictions for one feature vector (scalar) or a matrix of rows."""
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X2 = X[None, :] if single else X
    if X2.ndim != 2 or X2.shape[1] != m.dim:
        raise InvalidArgumentError(f"expected {m.dim} features, got shape {X.shape}")
    Z = (X2 - m.mean) / m.scale
    out = np.array([_predict_row(m, z) for z in Z])
    return out[0] if single else out


# -- model files ---------------------------------------------------------------

def _fmt(x) -> str:
    return f"{float(x):.17g}"


def write_model(path, m: RegressorModel):
    lines = [f"{MODEL_MAGIC} {MODEL_VERSION} {m.kind} {m.dim}", f"stream {m.stream}"]
    if m.kind == "ridge":
        lines += [f"lambda {_fmt(m.lam)}", f"bias {_fmt(m.bias)}"]
    else:
        lines += [f"k {m.k}", f"rows {m.train_y.size}"]
    for key, val in sorted(m.extra.items()):
        lines.append(f"extra {key} {val}")

    def block(name, arr):
        arr = np.asarray(arr, dtype=float)
        lines.append(f"block {name} {arr.size}")
        lines.append(" ".join(_fmt(v) for v in arr.ravel()))

    block("mean", m.mean)
    block("scale", m.scale)
    if m.kind == "ridge":
        block("weights", m.weights)
    else:
        block("train_x", m.train_X)
        block("train_y", m.train_y)
    if m.limits is not None:
        for key, s in m.limits.items():
            block(f"limits_{key}", [s.bins, s.lo, s.hi])
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_model(path) -> RegressorModel:
    text = open(path).read().splitlines()
    if not text:
        raise FormatError(f"{path}: empty model file")
    head = text[0].split()
    if len(head) != 4 or head[0] != MODEL_MAGIC:
        raise FormatError(f"{path}: not a model file")
    if head[1] != MODEL_VERSION:
        raise FormatError(f"{path}: unsupported model version {head[1]}")
    kind, dim = head[2], int(head[3])
    if kind not in KINDS:
        raise FormatError(f"{path}: unknown model kind {kind}")
    scalars, blocks, extra = {}, {}, {}
    i = 1
    try:
        while i < len(text):
            parts = text[i].split()
            i += 1
            if not parts:
                continue
            if parts[0] == "block":
                name, count = parts[1], int(parts[2])
                vals = np.array([float(v) for v in text[i].split()]) if count else np.zeros(0)
                i += 1
                if vals.size != count:
                    raise FormatError(f"{path}: block {name} has {vals.size} values, expected {count}")
                blocks[name] = vals
            elif parts[0] == "extra":
                extra[parts[1]] = " ".join(parts[2:])
            else:
                scalars[parts[0]] = parts[1]
    except (IndexError, ValueError) as exc:
        raise FormatError(f"{path}: malformed model file near line {i}") from exc

    specs = {}
    for key in HistogramLimits.KEYS:
        b = blocks.get(f"limits_{key}")
        if b is not None:
            specs[key] = HistogramSpec(int(b[0]), float(b[1]), float(b[2]))
    limits = None
    if specs:
        limits = HistogramLimits(tuple(specs.get(k, d) for k, d in zip(HistogramLimits.KEYS[:3], DEFAULT_SPATIAL)),
                                 specs.get("temporal_mag"), specs.get("temporal_dir", DIR_SPEC))
    try:
        mean, scale = blocks["mean"], blocks["scale"]
        if mean.size != dim or scale.size != dim or not (scale > 0).all():
            raise FormatError(f"{path}: standardisation blocks do not match dimension {dim}")
        stream = scalars.get("stream", "spatial")
        if kind == "ridge":
            w = blocks["weights"]
            if w.size != dim:
                raise FormatError(f"{path}: weight block has {w.size} values, expected {dim}")
            return RegressorModel("ridge", mean, scale, stream, weights=w, bias=float(scalars["bias"]),
                                  lam=float(scalars["lambda"]), limits=limits, extra=extra)
        rows = int(scalars["rows"])
        return RegressorModel("knn", mean, scale, stream, k=int(scalars["k"]),
                              train_X=blocks["train_x"].reshape(rows, dim), train_y=blocks["train_y"],
                              limits=limits, extra=extra)
    except KeyError as exc:
        raise FormatError(f"{path}: missing entry {exc}") from None

"""Kalman fusion of force-level and force-difference predictions.

The state is ``x_k = (f_k, df_k)`` with integrator dynamics
``f_{k+1} = f_k + df_k``; both components are observed directly, the
level by the spatial stream and the difference by the temporal stream.
Observation components may be missing (NaN). Noise covariances are refined
by expectation-maximisation with a fixed-interval smoother as the E-step.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .errors import DatasetError, FormatError, InvalidArgumentError, NumericalError

F_DEFAULT = np.array([[1.0, 1.0], [0.0, 1.0]])
H_DEFAULT = np.eye(2)
R_INIT = np.diag([50000.0, 200.0])
Q_INIT = np.diag([1.0, 1000.0])
# Values reached on the original recordings; kept for reference, never used as defaults.
R_REFERENCE_FINAL = np.array([[2523.1, -15.3], [-15.3, 33.9]])
Q_REFERENCE_FINAL = np.array([[1.0, -3.5e-3], [-3.5e-3, 22.3]])
LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class KalmanModel:
    F: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    x0: np.ndarray
    P0: np.ndarray

    def __post_init__(self):
        for name in ("F", "H", "Q", "R", "x0", "P0"):
            setattr(self, name, np.array(getattr(self, name), dtype=float))
        n = self.F.shape[0]
        if self.F.shape != (n, n) or self.H.shape[1] != n or self.x0.shape != (n,):
            raise InvalidArgumentError("inconsistent state-space dimensions")
        p = self.H.shape[0]
        for name, dim in (("Q", n), ("R", p), ("P0", n)):
            _check_psd(getattr(self, name), dim, name)


def _check_psd(M, dim, name):
    if M.shape != (dim, dim) or not np.isfinite(M).all():
        raise InvalidArgumentError(f"{name} must be a finite {dim}x{dim} matrix")
    if np.abs(M - M.T).max() > 1e-9 * max(1.0, np.abs(M).max()):
        raise InvalidArgumentError(f"{name} is not symmetric")
    if np.linalg.eigvalsh(0.5 * (M + M.T)).min() < -1e-9 * max(1.0, np.abs(M).max()):
        raise InvalidArgumentError(f"{name} is not positive semidefinite")


def default_model(first_spatial=0.0) -> KalmanModel:
    """Integrator model with the initial noise covariances."""
    return KalmanModel(F_DEFAULT.copy(), H_DEFAULT.copy(), Q_INIT.copy(), R_INIT.copy(),
                       np.array([float(first_spatial), 0.0]), R_INIT.copy())


@dataclass
class FusionResult:
    x_pred: np.ndarray      # (N, n) one-step predictions
    P_pred: np.ndarray      # (N, n, n)
    x_filt: np.ndarray      # (N, n) filtered states
    P_filt: np.ndarray
    loglik: float


@dataclass
class SmootherResult:
    x_smooth: np.ndarray
    P_smooth: np.ndarray
    P_lag: np.ndarray       # P_lag[t] = cov(x_t, x_{t-1} | all data); P_lag[0] unused
    filtered: FusionResult


# -- kernels -------------------------------------------------------------------

@njit(cache=True)
def _filter_core(y, obs, F, H, Q, R, x0, P0, xp, Pp, xf, Pf):
    N, p = y.shape
    n = F.shape[0]
    ll = 0.0
    x = x0.copy()
    P = P0.copy()
    eye = np.eye(n)
    for t in range(N):
        if t > 0:
            x = F @ xf[t - 1]
            P = F @ Pf[t - 1] @ F.T + Q
            P = 0.5 * (P + P.T)
        xp[t] = x
        Pp[t] = P
        idx = np.flatnonzero(obs[t])
        m = idx.size
        if m > 0:
            Hs = H[idx, :]
            Rs = R[idx, :][:, idx]
            e = y[t][idx] - Hs @ x
            S = Hs @ P @ Hs.T + Rs
            S = 0.5 * (S + S.T)
            K = np.linalg.solve(S, Hs @ P).T
            x = x + K @ e
            A = eye - K @ Hs
            P = A @ P @ A.T + K @ Rs @ K.T
            P = 0.5 * (P + P.T)
            sign, logdet = np.linalg.slogdet(S)
            if sign <= 0:
                return np.nan
            ll -= 0.5 * (m * LOG_2PI + logdet + e @ np.linalg.solve(S, e))
        xf[t] = x
        Pf[t] = P
    return ll


@njit(cache=True)
def _smooth_core(F, xp, Pp, xf, Pf, xs, Ps, Plag):
    N = xf.shape[0]
    xs[N - 1] = xf[N - 1]
    Ps[N - 1] = Pf[N - 1]
    for t in range(N - 2, -1, -1):
        J = np.linalg.solve(Pp[t + 1], F @ Pf[t]).T
        xs[t] = xf[t] + J @ (xs[t + 1] - xp[t + 1])
        P = Pf[t] + J @ (Ps[t + 1] - Pp[t + 1]) @ J.T
        Ps[t] = 0.5 * (P + P.T)
        Plag[t + 1] = Ps[t + 1] @ J.T


# -- public API ------------------------------------------------------------------

def _observations(obs, p):
    y = np.array(obs, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y.ndim != 2 or y.shape[1] != p:
        raise InvalidArgumentError(f"observations must have {p} columns, got shape {y.shape}")
    if np.isinf(y).any():
        raise InvalidArgumentError("observations must be finite (use NaN for missing)")
    present = ~np.isnan(y)
    y[~present] = 0.0
    return y, present


def kalman_filter(obs, m: KalmanModel) -> FusionResult:
    """Predict/update recursion. NaN entries in ``obs`` are treated as missing."""
    y, present = _observations(obs, m.H.shape[0])
    N, n = y.shape[0], m.F.shape[0]
    if N == 0:
        raise InvalidArgumentError("no observations")
    xp = np.zeros((N, n))
    Pp = np.zeros((N, n, n))
    xf = np.zeros((N, n))
    Pf = np.zeros((N, n, n))
    ll = _filter_core(y, present, m.F, m.H, m.Q, m.R, m.x0, m.P0, xp, Pp, xf, Pf)
    if not math.isfinite(ll):
        raise NumericalError("innovation covariance lost positive definiteness")
    return FusionResult(xp, Pp, xf, Pf, float(ll))


def smoother(obs, m: KalmanModel) -> SmootherResult:
    """Fixed-interval (Rauch-Tung-Striebel) smoother with lag-one covariances."""
    fr = kalman_filter(obs, m)
    N, n = fr.x_filt.shape
    xs = np.zeros((N, n))
    Ps = np.zeros((N, n, n))
    Plag = np.zeros((N, n, n))
    _smooth_core(m.F, fr.x_pred, fr.P_pred, fr.x_filt, fr.P_filt, xs, Ps, Plag)
    return SmootherResult(xs, Ps, Plag, fr)


def _residual_moments(y, present, xs, Ps, H, R):
    """Sum over steps of E[(y - Hx)(y - Hx)^T | data].

    Missing entries are filled in from their conditional distribution given
    the observed ones under the current ``R``. Steps are grouped by which
    components are present so each group is handled in one pass.
    """
    p = H.shape[0]
    total = np.zeros((p, p))
    patterns, inverse = np.unique(present, axis=0, return_inverse=True)
    for g, pat in enumerate(patterns):
        rows = np.flatnonzero(inverse.ravel() == g)
        o = np.flatnonzero(pat)
        mis = np.flatnonzero(~pat)
        if o.size == 0:
            total += rows.size * R
            continue
        Ho = H[o]
        r = y[np.ix_(rows, o)] - xs[rows] @ Ho.T
        Eoo = r.T @ r + np.einsum("ij,tjk,lk->il", Ho, Ps[rows], Ho)
        if mis.size == 0:
            total += Eoo
            continue
        B = R[np.ix_(mis, o)] @ np.linalg.inv(R[np.ix_(o, o)])
        cond = R[np.ix_(mis, mis)] - B @ R[np.ix_(o, mis)]
        block = np.zeros((p, p))
        block[np.ix_(o, o)] = Eoo
        block[np.ix_(mis, o)] = B @ Eoo
        block[np.ix_(o, mis)] = Eoo @ B.T
        block[np.ix_(mis, mis)] = B @ Eoo @ B.T + rows.size * cond
        total += block
    return total


def _as_sequences(obs):
    if isinstance(obs, (list, tuple)) and len(obs) and np.ndim(obs[0]) == 2:
        return [np.asarray(o, dtype=float) for o in obs]
    return [np.asarray(obs, dtype=float)]


def total_loglik(obs, m: KalmanModel, x0s=None) -> float:
    seqs = _as_sequences(obs)
    return float(sum(kalman_filter(s, _seq_model(m, s, x0s, i)).loglik for i, s in enumerate(seqs)))


def _seq_model(m, seq, x0s, i):
    return m if x0s is None else replace(m, x0=np.asarray(x0s[i], dtype=float))


def em_fit(obs, m0: KalmanModel, max_iters: int = 50, learn=("Q", "R"), tol: float = 1e-6,
           history: list | None = None, x0s=None) -> KalmanModel:
    """Refine ``Q`` and/or ``R`` by EM; ``F``, ``H``, ``x0`` and ``P0`` stay fixed.

    ``obs`` is one (N, p) array or a list of independent sequences, for
    which ``x0s`` may give per-sequence initial states. Iteration stops
    when the log-likelihood gains less than ``tol``. Log-likelihood values
    (one per model visited) are appended to ``history`` when given.
    """
    learn = set(learn)
    if not learn <= {"Q", "R"}:
        raise InvalidArgumentError(f"EM can learn Q and R only, got {sorted(learn)}")
    seqs = _as_sequences(obs)
    if sum(s.shape[0] for s in seqs) < 10:
        raise DatasetError("EM needs at least 10 observations")
    m = replace(m0)
    F, H = m.F, m.H
    prev = None
    for it in range(max_iters + 1):
        S11 = np.zeros_like(F)
        S10 = np.zeros_like(F)
        S00 = np.zeros_like(F)
        Rsum = np.zeros_like(m.R)
        n_trans = 0
        n_obs = 0
        ll = 0.0
        for i, seq in enumerate(seqs):
            sm = smoother(seq, _seq_model(m, seq, x0s, i))
            ll += sm.filtered.loglik
            y, present = _observations(seq, H.shape[0])
            xs, Ps, Pl = sm.x_smooth, sm.P_smooth, sm.P_lag
            second = Ps + xs[:, :, None] * xs[:, None, :]
            if xs.shape[0] > 1:
                S11 += second[1:].sum(axis=0)
                S00 += second[:-1].sum(axis=0)
                S10 += (Pl[1:] + xs[1:, :, None] * xs[:-1, None, :]).sum(axis=0)
                n_trans += xs.shape[0] - 1
            Rsum += _residual_moments(y, present, xs, Ps, H, m.R)
            n_obs += xs.shape[0]
        if history is not None:
            history.append(ll)
        if prev is not None:
            if ll < prev - 1e-9 * max(1.0, abs(prev)):
                raise NumericalError(f"EM log-likelihood decreased from {prev:.10g} to {ll:.10g}")
            if ll - prev < tol:
                break
        if it == max_iters:
            break
        prev = ll
        Q, R = m.Q, m.R
        if "Q" in learn and n_trans > 0:
            Q = (S11 - S10 @ F.T - F @ S10.T + F @ S00 @ F.T) / n_trans
            Q = 0.5 * (Q + Q.T)
        if "R" in learn:
            R = 0.5 * (Rsum + Rsum.T) / n_obs
        m = replace(m, Q=Q, R=R)
    return m


# -- files -----------------------------------------------------------------------

FUSION_COLUMNS = ["frame", "f_fused", "df_fused", "var_f", "var_df"]


def write_fusion(path, frames, result: FusionResult):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FUSION_COLUMNS)
        for k, x, P in zip(frames, result.x_filt, result.P_filt):
            w.writerow([int(k)] + [f"{v:.17g}" for v in (x[0], x[1], P[0, 0], P[1, 1])])


def read_fusion(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != FUSION_COLUMNS:
            raise FormatError(f"{path}: unexpected fusion header")
        rows = [[float(v) for v in r] for r in reader if r]
    a = np.array(rows).reshape(-1, 5)
    return a[:, 0].astype(int), a[:, 1:]


def write_kalman(path, m: KalmanModel):
    lines = ["gripsense-kalman v1"]
    for name in ("F", "H", "Q", "R", "x0", "P0"):
        a = getattr(m, name)
        lines.append(f"{name} {' '.join(str(d) for d in a.shape)} " + " ".join(f"{v:.17g}" for v in a.ravel()))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_kalman(path) -> KalmanModel:
    lines = open(path).read().splitlines()
    if not lines or lines[0] != "gripsense-kalman v1":
        raise FormatError(f"{path}: not a Kalman model file")
    vals = {}
    try:
        for line in lines[1:]:
            parts = line.split()
            if not parts:
                continue
            name = parts[0]
            ndim = 1 if name == "x0" else 2
            shape = tuple(int(d) for d in parts[1:1 + ndim])
            vals[name] = np.array([float(v) for v in parts[1 + ndim:]]).reshape(shape)
        return KalmanModel(**{k: vals[k] for k in ("F", "H", "Q", "R", "x0", "P0")})
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: malformed Kalman model ({exc})") from None

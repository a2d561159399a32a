"""Acceptance criteria, one reported line each (see the summary section of the run)."""

import json
import math

import numpy as np
import pytest
from scipy import ndimage

from gripsense import cli
from gripsense.features import sign_magnitudes
from gripsense.flow import FlowField, dense_flow
from gripsense.fusion import (F_DEFAULT, H_DEFAULT, Q_INIT, R_INIT, KalmanModel, default_model, em_fit,
                              kalman_filter, read_kalman)
from gripsense.ingest import read_sync
from gripsense.preprocess import MarkerSet, compute_normalization
from gripsense.signal import FilterSpec, butterworth_design, gain_db

from test_fusion import _naive_filter, _random_model, _simulate


def test_criterion_01_reference_numbers(criterion):
    criterion(1, "INFO", "published error figures need the original recordings, which are not available; "
                         "criteria 2-10 substitute synthetic and property checks")


# -- end to end on two synthetic recordings ----------------------------------------------------------

@pytest.fixture(scope="module")
def metrics(acceptance_run):
    return json.loads((acceptance_run / "run" / "metrics.json").read_text())


def _force_range(acceptance_run, s):
    _, _, _, avg, _ = read_sync(acceptance_run / "run" / f"ds{s}" / "sync.csv")
    return float(avg.max() - avg.min())


def test_criterion_02_recovery(acceptance_run, metrics, criterion):
    split = (acceptance_run / "run" / "split.csv").read_text().splitlines()[1:]
    roles = [line.rsplit(",", 1)[1] for line in split]
    n_train, n_test = roles.count("train"), roles.count("test")
    pcts = []
    for s, entry in enumerate(metrics["datasets"]):
        span = _force_range(acceptance_run, s)
        for block in entry["blocks"]:
            pcts.append(100 * block["fused"]["rmse"] / span)
    ok = (n_train, n_test) == (8990, 3000) and max(pcts) < 10.0
    criterion(2, ok, f"split {n_train}/{n_test} frames; fused RMSE per test block = "
                     + ", ".join(f"{p:.2f}%" for p in pcts) + " of the recording's force range (< 10%)")
    assert ok


def test_criterion_03_fusion_dominance(metrics, criterion):
    p = metrics["pooled"]
    fused, sp, cum = p["fused"], p["spatial"], p["temporal_cumsum"]
    mse_ok = fused["mse"] <= 1.05 * min(sp["mse"], cum["mse"])
    r2_ok = fused["r2"] >= max(sp["r2"], cum["r2"]) - 0.01
    criterion(3, mse_ok and r2_ok,
              f"MSE fused {fused['mse']:.1f} vs spatial {sp['mse']:.1f}, temporal cumsum {cum['mse']:.1f} "
              f"(<= 1.05 x min); r2 fused {fused['r2']:.4f} vs {sp['r2']:.4f}, {cum['r2']:.4f} (>= max - 0.01)")
    assert mse_ok and r2_ok


def _cumulative(truth, temporal, a, b):
    """Running sum of temporal predictions over frames a..b-1, started from the true force."""
    tp = np.nan_to_num(temporal[a:b])
    return truth[a] + np.concatenate([[0.0], np.cumsum(tp[1:])])


def test_criterion_04_temporal_drift(acceptance_run, metrics, drift_run, criterion):
    # held-out minute of slow squeezing, scored by models trained on the main split
    _, _, _, truth, _ = read_sync(drift_run / "sync.csv")
    temporal = cli._frame_series(cli.read_columns(drift_run / "pred_temporal.csv"), "prediction", truth.size)
    fused = cli.read_columns(drift_run / "fused.csv")
    assert fused["frame"].tolist() == list(range(truth.size))
    cum_err = np.abs(_cumulative(truth, temporal, 0, truth.size) - truth)
    quarters = [cum_err[i * truth.size // 4:(i + 1) * truth.size // 4].mean() for i in range(4)]
    grows = all(q1 > q0 for q0, q1 in zip(quarters, quarters[1:]))
    span = float(truth.max() - truth.min())
    fused_final = 100 * abs(fused["f_fused"][-1] - truth[-1]) / span
    cum_final = 100 * cum_err[-1] / span

    # the slow ramp that closes the second recording's test block, for reference
    block = metrics["datasets"][1]["blocks"][0]
    span1 = _force_range(acceptance_run, 1)
    ref = (100 * block["final_abs_error"]["fused"] / span1, 100 * block["final_abs_error"]["temporal_cumsum"] / span1)

    ok = grows and fused_final < 25.0 and cum_final > 50.0
    criterion(4, ok, f"{truth.size}-frame slow squeeze: cumulative temporal |error| by quarter "
                     + " < ".join(f"{q:.0f}" for q in quarters)
                     + f"; final |error| fused {fused_final:.1f}% (< 25%), cumulative {cum_final:.1f}% (> 50%) "
                     f"of the {span:.0f}-count range [in-split ramp block: fused {ref[0]:.1f}%, "
                     f"cumulative {ref[1]:.1f}%]")
    assert ok


# -- component checks ------------------------------------------------------------------------------------

def test_criterion_05_butterworth(criterion):
    spec = FilterSpec(3.0, 1, 59.95)
    b, a = butterworth_design(spec)
    K = math.tan(math.pi * 3.0 / 59.95)
    b_ref, a_ref = [K / (1 + K)] * 2, [1.0, (K - 1) / (K + 1)]
    coef_err = max(np.abs(np.asarray(b) - b_ref).max(), np.abs(np.asarray(a) - a_ref).max())
    g3, g0 = gain_db(spec, 3.0), 10 ** (gain_db(spec, 0.0) / 20)
    ok = abs(g3 + 3.01) <= 0.1 and abs(g0 - 1) <= 1e-6 and coef_err <= 1e-12
    criterion(5, ok, f"gain at 3 Hz {g3:.4f} dB, DC gain {g0:.12f}, coefficient error {coef_err:.1e}")
    assert ok


def test_criterion_06_sign_truth_table(criterion):
    # vertical offset sign x flow angle -> sign applied to the magnitude
    table = {(-1, -math.pi / 2): -1, (-1, 0.0): 1, (-1, math.pi / 2): 1,
             (0, -math.pi / 2): 1, (0, 0.0): 1, (0, math.pi / 2): 1,
             (1, -math.pi / 2): 1, (1, 0.0): 1, (1, math.pi / 2): -1}
    got = {}
    for (dy, angle), _ in table.items():
        f = FlowField(np.array([[math.cos(angle)]]), np.array([[math.sin(angle)]]))
        signed, _ = sign_magnitudes(f, 0.0, np.array([float(dy)]))
        got[(dy, angle)] = int(np.sign(signed[0, 0]))
    mismatches = sum(got[k] != v for k, v in table.items())
    criterion(6, mismatches == 0, f"{9 - mismatches}/9 cases match the hand-evaluated signs")
    assert mismatches == 0


def test_criterion_07_normalization(criterion):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        m1 = rng.uniform(-500, 500, 2)
        d = rng.uniform(-200, 200, 2)
        if np.hypot(*d) < 1.0:
            d += 5.0
        ms = MarkerSet(tuple(m1), tuple(m1 + d))
        T = compute_normalization(ms)
        pts = T.apply([ms.marker1, ms.central, ms.marker2])
        worst = max(worst, float(np.abs(pts - [[0, 0], [1, 0], [2, 0]]).max()))
    criterion(7, worst < 1e-9, f"max deviation over 1000 random marker pairs {worst:.1e} (< 1e-9)")
    assert worst < 1e-9


def test_criterion_08_flow(criterion):
    rng = np.random.default_rng(3)
    t = ndimage.gaussian_filter(rng.standard_normal((140, 140)), 2.0)
    big = (20 + 215 * (t - t.min()) / (t.max() - t.min())) / 255.0
    moved = ndimage.shift(big, (-2.0, 3.0), order=3, mode="nearest")
    a, b = big[20:116, 20:116], moved[20:116, 20:116]
    f = dense_flow(a, b)
    inner = (slice(8, -8), slice(8, -8))
    err = float(np.median(np.hypot(f.u[inner] - 3.0, f.v[inner] + 2.0)))
    still = float(np.abs(dense_flow(a, a).magnitude).max())
    rises = max(float(np.diff(tr).max()) if len(tr) > 1 else 0.0 for tr in f.energy_trace)
    ok = err < 0.2 and still < 1e-3 and rises <= 1e-8
    criterion(8, ok, f"median error on a (3,-2) px shift {err:.3f} px; identical frames max |flow| "
                     f"{still:.1e}; largest energy rise between outer iterations {rises:.1e}")
    assert ok


def test_criterion_09_kalman_em(acceptance_run, criterion):
    rng = np.random.default_rng(9)
    m = _random_model(rng)
    _, y = _simulate(rng, m, 200)
    res = kalman_filter(y, m)
    xf, Pf, _ = _naive_filter(y, m)
    oracle_err = max(np.abs(res.x_filt - xf).max(), np.abs(res.P_filt - Pf).max())

    # the position process noise is weakly separable from the measurement noise, so its
    # estimate from one 5000-step draw scatters by about 9 %; five draws are scored by the median
    Q, R = np.diag([4.0, 1.0]), np.diag([25.0, 4.0])
    truth = KalmanModel(F_DEFAULT, H_DEFAULT, Q, R, np.array([500.0, 0.0]), np.eye(2))
    worst_drop, errors, iters = 0.0, [], []
    for rep in range(5):
        _, obs = _simulate(np.random.default_rng([9, rep]), truth, 5000)
        hist = []
        fit = em_fit(obs, default_model(obs[0, 0]), max_iters=500, tol=1e-6, history=hist)
        drops = np.diff(hist) / np.abs(hist[1:])
        worst_drop = max(worst_drop, float(max(-drops.min(), 0.0)))
        rel = np.concatenate([np.abs(np.diag(fit.Q) / np.diag(Q) - 1), np.abs(np.diag(fit.R) / np.diag(R) - 1)])
        errors.append(float(rel.max()))
        iters.append(len(hist) - 1)

    d0 = default_model(123.0)
    used = read_kalman(acceptance_run / "run" / "kalman.txt")
    wired = (np.array_equal(d0.F, [[1, 1], [0, 1]]) and np.array_equal(d0.H, np.eye(2))
             and np.array_equal(d0.R, [[50000, 0], [0, 200]]) and np.array_equal(d0.Q, [[1, 0], [0, 1000]])
             and np.array_equal(Q_INIT, d0.Q) and np.array_equal(R_INIT, d0.R)
             and np.array_equal(used.F, d0.F) and np.array_equal(used.H, d0.H))
    median = float(np.median(errors))
    ok = oracle_err < 1e-10 and worst_drop <= 1e-9 and median < 0.2 and wired
    criterion(9, ok, f"naive-oracle error {oracle_err:.1e}; largest relative log-likelihood drop "
                     f"{worst_drop:.1e}; worst diag(Q), diag(R) error per 5000-step draw "
                     + ", ".join(f"{100 * e:.1f}%" for e in errors)
                     + f" (median {100 * median:.1f}% < 20%, {min(iters)}-{max(iters)} EM iterations); "
                     f"default matrices wired {'exactly' if wired else 'WRONG'}")
    assert ok


def test_criterion_10_determinism(short_dataset, criterion):
    root = short_dataset
    outs = []
    for name in ("a", "b"):
        out = root / f"pipeline_{name}"
        assert cli.main(["--seed", "21", "--config", str(root / "run.cfg"), "pipeline", str(root / "data"),
                         "--out", str(out)]) == 0
        outs.append(out)
    files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file())
    same = [p for p in files if (outs[0] / p).read_bytes() == (outs[1] / p).read_bytes()]
    kinds = {"features": ["ds0/spatial.csv", "ds0/temporal.csv"],
             "models": ["model_spatial.txt", "model_temporal.txt", "kalman.txt"],
             "fusion": [str(p) for p in files if p.name.startswith("fused_")]}
    covered = all(kinds[k] and all(any(str(p) == f for p in files) for f in kinds[k]) for k in kinds)
    ok = covered and len(same) == len(files)
    criterion(10, ok, f"{len(same)}/{len(files)} output files byte-identical across two pipeline runs "
                      f"(features, models, Kalman model, fusion outputs, metrics, plots)")
    assert ok

"""Command-line driver.

Every subcommand reads and writes plain files, so a full run can be
replayed stage by stage from the dataset directories alone. Exit codes:
0 success, 2 usage or invalid argument, 3 data or format problem,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import Config, config_lines, load_config
from .errors import DatasetError, FormatError, GripsenseError, InvalidArgumentError, NumericalError
from .extract import calibrate, extract_features
from .features import (read_features, read_limits, spatial_names, temporal_names, write_features,
                       write_limits)
from .fusion import default_model, em_fit, kalman_filter, read_kalman, write_fusion, write_kalman
from .ingest import FrameSequence, SyncedDataset, load_dataset, read_sync, write_sync
from .metrics import report, svg_scatter, svg_timeseries
from .model import Dataset, predict, read_model, train, write_model, make_labels
from .synth import SceneParams, generate, make_trajectory

log = logging.getLogger("gripsense")


# -- helpers -------------------------------------------------------------------

def _range(text):
    try:
        a, b = text.split(":")
        a, b = int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected START:END, got {text!r}") from None
    if not 0 <= a < b:
        raise argparse.ArgumentTypeError(f"empty or negative range {text!r}")
    return a, b


def _quiet(text):
    try:
        vals = tuple(float(v) for v in text.split(":"))
    except ValueError:
        vals = ()
    if len(vals) != 4:
        raise argparse.ArgumentTypeError(f"expected T0:T1:F0:F1, got {text!r}")
    return vals


def _require_file(path, what):
    p = Path(path)
    if not p.is_file():
        raise InvalidArgumentError(f"{what} {p} does not exist")
    return p


def _require_dir(path, what):
    p = Path(path)
    if not p.is_dir():
        raise InvalidArgumentError(f"{what} {p} is not a directory")
    return p


def write_predictions(path, frames, values, column="prediction"):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", column])
        for k, v in zip(frames, values):
            w.writerow([int(k), f"{float(v):.17g}"])


def read_columns(path):
    """Read a headed numeric CSV into ``{column: array}``; ``#`` lines are skipped."""
    with open(_require_file(path, "input file"), newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#")) if r]
    if len(rows) < 2:
        raise DatasetError(f"{path}: no data rows")
    header = rows[0]
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:]])
    except ValueError:
        raise FormatError(f"{path}: non-numeric field") from None
    if data.shape[1] != len(header):
        raise FormatError(f"{path}: ragged rows")
    return {name: data[:, i] for i, name in enumerate(header)}


def _frame_series(cols, column, n):
    """Scatter a (frame, value) table onto a dense per-frame array (NaN gaps)."""
    if "frame" not in cols or column not in cols:
        raise DatasetError(f"missing column 'frame' or {column!r}")
    out = np.full(n, np.nan)
    frames = cols["frame"].astype(int)
    if frames.size and (frames.min() < 0 or frames.max() >= n):
        raise DatasetError(f"frame index outside [0, {n})")
    out[frames] = cols[column]
    return out


def _segments(mask):
    """Maximal runs of True as (start, end) pairs."""
    m = np.concatenate([[False], np.asarray(mask, dtype=bool), [False]])
    d = np.diff(m.astype(int))
    return list(zip(np.flatnonzero(d == 1), np.flatnonzero(d == -1)))


def _test_mask(n, start, block_len):
    if start is None:
        start = n - block_len
    if start < 0 or start + block_len > n:
        raise InvalidArgumentError(f"test block [{start}, {start + block_len}) does not fit {n} frames")
    m = np.zeros(n, dtype=bool)
    m[start:start + block_len] = True
    if m.all():
        raise InvalidArgumentError("test block leaves no training frames")
    return m


def write_split(path, test_masks):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["source", "frame", "role"])
        for s, m in enumerate(test_masks):
            for k, is_test in enumerate(m):
                w.writerow([s, k, "test" if is_test else "train"])


def read_split(path):
    masks = {}
    with open(_require_file(path, "split file"), newline="") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != ["source", "frame", "role"]:
            raise FormatError(f"{path}: unexpected split header")
        for r in reader:
            if r:
                masks.setdefault(int(r[0]), {})[int(r[1])] = r[2] == "test"
    out = []
    for s in sorted(masks):
        d = masks[s]
        out.append(np.array([d[k] for k in range(len(d))], dtype=bool))
    return out


def _labels_for(stream, force_avg, cfg: Config, fps):
    return make_labels(force_avg, stream, cfg.filter_spec(fps))


def _training_set(stream, feat_tables, syncs, test_masks, cfg, fpss):
    X, y, frames, src = [], [], [], []
    for s, ((idx, F), (force_avg,), test, fps) in enumerate(zip(feat_tables, syncs, test_masks, fpss)):
        if F.shape[0] == 0:
            raise DatasetError("empty feature table")
        if idx.max() >= force_avg.size:
            raise DatasetError(f"feature rows reference frame {idx.max()} but sync has {force_avg.size}")
        labels = _labels_for(stream, force_avg, cfg, fps)
        keep = ~test[idx]
        X.append(F[keep])
        y.append(labels[idx[keep]])
        frames.append(idx[keep])
        src.append(np.full(keep.sum(), s))
    return Dataset(np.vstack(X), np.concatenate(y), np.concatenate(frames), stream, np.concatenate(src))


# -- subcommands -----------------------------------------------------------------

def cmd_synth(args, cfg):
    out = Path(args.out)
    traj = make_trajectory(args.duration, seed=args.seed, quiet=args.quiet or ())
    params = SceneParams(width=args.width, height=args.height, hand_scale=args.hand_scale,
                         led_onset=args.led_onset, noise_sigma=args.noise, seed=args.seed)
    step = max(1, int(round(traj.duration * params.fps)) // 10)

    def progress(k, n):
        if k % step == 0 or k == n:
            log.info("rendered %d/%d frames", k, n)

    scene = generate(traj, params, out, save_masks=args.masks, progress=progress)
    log.info("wrote %d frames to %s", scene.n_frames, out)
    return 0


def _write_dataset_features(ds: SyncedDataset, out: Path, limits, cfg: Config, streams, jobs):
    out.mkdir(parents=True, exist_ok=True)
    write_sync(out / "sync.csv", ds)
    tables, failures = extract_features(ds.frames, limits, cfg.features(), streams, jobs=jobs)
    if "spatial" in tables:
        idx, X = tables["spatial"]
        write_features(out / "spatial.csv", idx, X, spatial_names(cfg.spatial_bins))
    if "temporal" in tables:
        idx, X = tables["temporal"]
        write_features(out / "temporal.csv", idx, X, temporal_names(cfg.mag_bins, cfg.dir_bins))
    if failures:
        (out / "failures.txt").write_text("\n".join(failures) + "\n")
    return tables


def cmd_features(args, cfg):
    root = _require_dir(args.dataset, "dataset")
    out = Path(args.out)
    streams = ("spatial", "temporal") if args.stream == "both" else (args.stream,)
    ds = load_dataset(root, margin=cfg.led_margin)
    if args.limits:
        limits = read_limits(_require_file(args.limits, "limits file"))
    else:
        allowed = set(range(len(ds)))
        for a, b in args.exclude or ():
            allowed -= set(range(a, b))
        limits = calibrate([(ds.frames, sorted(allowed))], cfg.features(), streams)
    out.mkdir(parents=True, exist_ok=True)
    write_limits(out / "limits.txt", limits)
    _write_dataset_features(ds, out, limits, cfg, streams, args.jobs)
    log.info("features written to %s", out)
    return 0


def cmd_train(args, cfg):
    if len(args.features) != len(args.sync):
        raise InvalidArgumentError("give one --sync file per --features file")
    starts = args.test_start or [None] * len(args.features)
    if len(starts) != len(args.features):
        raise InvalidArgumentError("give one --test-start per dataset")
    tables, syncs, masks = [], [], []
    for fpath, spath, start in zip(args.features, args.sync, starts):
        idx, X, _ = read_features(_require_file(fpath, "feature file"))
        if X.shape[0] == 0:
            raise DatasetError(f"{fpath}: empty feature file")
        _, _, _, avg, _ = read_sync(_require_file(spath, "sync file"))
        tables.append((idx, X))
        syncs.append((avg,))
        masks.append(_test_mask(avg.size, start, cfg.block_len))
    fps = [args.fps] * len(tables)
    ds = _training_set(args.stream, tables, syncs, masks, cfg, fps)
    limits = read_limits(args.limits) if args.limits else None
    m = train(ds, cfg.model_kind, cfg.ridge_lambda, cfg.knn_k, limits)
    write_model(args.out, m)
    if args.split_out:
        write_split(args.split_out, masks)
    log.info("trained %s %s model on %d rows", args.stream, cfg.model_kind, len(ds))
    return 0


def cmd_predict(args, cfg):
    m = read_model(_require_file(args.model, "model file"))
    idx, X, _ = read_features(_require_file(args.features, "feature file"))
    if X.shape[0] == 0:
        raise DatasetError(f"{args.features}: empty feature file")
    if X.shape[1] != m.dim:
        raise DatasetError(f"model expects {m.dim} features, file has {X.shape[1]}")
    write_predictions(args.out, idx, predict(m, X))
    return 0


def fit_and_fuse(obs_list, test_masks, cfg: Config):
    """EM on each recording's training segments, then filter each test segment.

    Returns the fitted model and, per recording, ``[(frames, FusionResult)]``.
    """
    train_seqs, x0s = [], []
    for obs, test in zip(obs_list, test_masks):
        for a, b in _segments(~test):
            seq = obs[a:b]
            first = seq[~np.isnan(seq[:, 0]), 0]
            if b - a < 2 or first.size == 0:
                continue
            train_seqs.append(seq)
            x0s.append([first[0], 0.0])
    if not train_seqs:
        raise DatasetError("no training observations for EM")
    history = []
    m = em_fit(train_seqs, default_model(x0s[0][0]), cfg.em_max_iters, cfg.em_learn, cfg.em_tol,
               history=history, x0s=x0s)
    log.info("EM: %d evaluations, log-likelihood %.6g -> %.6g", len(history), history[0], history[-1])
    return m, [apply_fusion(obs, test, m) for obs, test in zip(obs_list, test_masks)], history


def apply_fusion(obs, test, m):
    """Filter each test segment, starting from its first spatial observation."""
    parts = []
    for a, b in _segments(test):
        seq = obs[a:b]
        first = seq[~np.isnan(seq[:, 0]), 0]
        x0 = np.array([first[0] if first.size else 0.0, 0.0])
        parts.append((np.arange(a, b), kalman_filter(seq, replace(m, x0=x0))))
    return parts


def cmd_fuse(args, cfg):
    sp = read_columns(args.spatial)
    n = int(sp["frame"].max()) + 1
    tp = None
    if not args.no_temporal:
        tp = read_columns(args.temporal) if args.temporal else None
        if tp is None:
            raise InvalidArgumentError("--temporal is required unless --no-temporal is given")
        n = max(n, int(tp["frame"].max()) + 1)
    if args.frames:
        n = args.frames
    obs = np.full((n, 2), np.nan)
    obs[:, 0] = _frame_series(sp, "prediction", n)
    if tp is not None:
        obs[:, 1] = _frame_series(tp, "prediction", n)
    if args.split:
        masks = read_split(args.split)
        if args.source >= len(masks):
            raise DatasetError(f"split file has no source {args.source}")
        test = masks[args.source]
        if test.size != n:
            raise DatasetError(f"split covers {test.size} frames, predictions cover {n}")
    elif args.kalman and args.test_start is None:
        test = np.ones(n, dtype=bool)
    else:
        test = _test_mask(n, args.test_start, cfg.block_len)
    if args.kalman:
        m = read_kalman(_require_file(args.kalman, "Kalman model"))
        parts = apply_fusion(obs, test, m)
    else:
        m, fused, _ = fit_and_fuse([obs], [test], cfg)
        parts = fused[0]
    frames = np.concatenate([f for f, _ in parts])
    res = [r for _, r in parts]
    merged = type(res[0])(*[np.concatenate([getattr(r, k) for r in res]) for k in
                           ("x_pred", "P_pred", "x_filt", "P_filt")], sum(r.loglik for r in res))
    write_fusion(args.out, frames, merged)
    if args.model_out:
        write_kalman(args.model_out, m)
    return 0


def evaluate(pred, truth, out_dir, label, scale=None, frames=None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ok = np.isfinite(pred) & np.isfinite(truth)
    if not ok.any():
        raise DatasetError("no overlapping finite samples to evaluate")
    rep = report(pred[ok], truth[ok], scale)
    x = np.arange(pred.size) if frames is None else np.asarray(frames)
    svg_timeseries(out / f"{label}_timeseries.svg", x, {"truth": truth, label: pred},
                   title=f"{label}: prediction and truth")
    svg_scatter(out / f"{label}_scatter.svg", truth[ok], pred[ok], title=f"{label}: prediction vs truth")
    return rep


def write_metrics(path, metrics: dict):
    Path(path).write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")


def cmd_eval(args, cfg):
    cols = read_columns(args.pred)
    _, _, _, avg, _ = read_sync(_require_file(args.truth, "truth file"))
    truth = avg
    if args.target == "dforce":
        truth = _labels_for("temporal", avg, cfg, args.fps)
    column = args.column or next(c for c in cols if c != "frame")
    pred = _frame_series(cols, column, truth.size)
    if args.frames:
        a, b = args.frames
        if b > truth.size:
            raise DatasetError(f"frame range {a}:{b} exceeds {truth.size} frames")
        sel = slice(a, b)
    else:
        sel = slice(0, truth.size)
    frames = np.arange(truth.size)[sel]
    rep = evaluate(pred[sel], truth[sel], args.out, args.label, args.scale, frames)
    write_metrics(Path(args.out) / f"{args.label}_metrics.json", rep)
    for k in ("n", "mse", "rmse", "r2", "rmse_pct_range"):
        print(f"{k} {rep[k]:.6g}")
    return 0


def cmd_pipeline(args, cfg):
    roots = [_require_dir(d, "dataset") for d in args.datasets]
    run = Path(args.out)
    run.mkdir(parents=True, exist_ok=True)
    (run / "config.txt").write_text("\n".join(config_lines(cfg)) + "\n")
    starts = args.test_start or [None] * len(roots)
    if len(starts) != len(roots):
        raise InvalidArgumentError("give one --test-start per dataset")

    datasets, masks, fpss = [], [], []
    for root, start in zip(roots, starts):
        ds = load_dataset(root, margin=cfg.led_margin)
        log.info("%s: %d frames, LED onset at frame %d", root, len(ds), ds.sync_offset_frames)
        datasets.append(ds)
        masks.append(_test_mask(len(ds), start, cfg.block_len))
        fpss.append(ds.frames.fps)
    write_split(run / "split.csv", masks)

    fcfg = cfg.features()
    sources = [(ds.frames, np.flatnonzero(~m)) for ds, m in zip(datasets, masks)]
    limits = calibrate(sources, fcfg)
    write_limits(run / "limits.txt", limits)
    log.info("calibrated histogram limits; temporal magnitude limit %.6g", limits.magnitude.hi)

    tables = {"spatial": [], "temporal": []}
    for s, ds in enumerate(datasets):
        log.info("extracting features for dataset %d", s)
        t = _write_dataset_features(ds, run / f"ds{s}", limits, cfg, ("spatial", "temporal"), args.jobs)
        for name in tables:
            tables[name].append(t[name])

    syncs = [(ds.force_avg,) for ds in datasets]
    preds = {}
    for stream in ("spatial", "temporal"):
        tr = _training_set(stream, tables[stream], syncs, masks, cfg, fpss)
        m = train(tr, cfg.model_kind, cfg.ridge_lambda, cfg.knn_k, limits)
        write_model(run / f"model_{stream}.txt", m)
        log.info("trained %s model on %d rows", stream, len(tr))
        preds[stream] = []
        for s, (idx, X) in enumerate(tables[stream]):
            p = predict(m, X)
            write_predictions(run / f"ds{s}" / f"pred_{stream}.csv", idx, p)
            dense = np.full(len(datasets[s]), np.nan)
            dense[idx] = p
            preds[stream].append(dense)

    obs_list = [np.column_stack([preds["spatial"][s], preds["temporal"][s]]) for s in range(len(datasets))]
    km, fused, history = fit_and_fuse(obs_list, masks, cfg)
    write_kalman(run / "kalman.txt", km)
    (run / "em_loglik.txt").write_text("\n".join(f"{v:.17g}" for v in history) + "\n")

    metrics = {"datasets": [], "em_iterations": len(history) - 1}
    pooled = {k: ([], []) for k in ("spatial", "temporal_cumsum", "fused", "temporal_dforce")}
    for s, ds in enumerate(datasets):
        d = run / f"ds{s}"
        truth = ds.force_avg
        dlabel = _labels_for("temporal", truth, cfg, fpss[s])
        entry = {"root": str(roots[s]), "blocks": []}
        for frames, res in fused[s]:
            write_fusion(d / f"fused_{frames[0]}_{frames[-1] + 1}.csv", frames, res)
            sp = preds["spatial"][s][frames]
            tp = np.nan_to_num(preds["temporal"][s][frames])
            # cumulative temporal baseline starts from the true force at the block start
            cum = truth[frames[0]] + np.concatenate([[0.0], np.cumsum(tp[1:])])
            series = {"spatial": sp, "temporal_cumsum": cum, "fused": res.x_filt[:, 0],
                      "temporal_dforce": preds["temporal"][s][frames]}
            tr = {"temporal_dforce": dlabel[frames]}
            block = {"start": int(frames[0]), "end": int(frames[-1] + 1)}
            for name, pred in series.items():
                t = tr.get(name, truth[frames])
                block[name] = evaluate(pred, t, d, f"{name}_{frames[0]}", scale=args.scale, frames=frames)
                ok = np.isfinite(pred)
                pooled[name][0].append(pred[ok])
                pooled[name][1].append(t[ok])
            block["final_abs_error"] = {"fused": float(abs(res.x_filt[-1, 0] - truth[frames[-1]])),
                                        "temporal_cumsum": float(abs(cum[-1] - truth[frames[-1]]))}
            svg_timeseries(d / f"overlay_{frames[0]}.svg", frames,
                           {"truth": truth[frames], "fused": res.x_filt[:, 0], "spatial": sp,
                            "temporal cumsum": cum}, title=f"dataset {s}: test block")
            entry["blocks"].append(block)
        metrics["datasets"].append(entry)
    metrics["pooled"] = {name: report(np.concatenate(p), np.concatenate(t), args.scale)
                         for name, (p, t) in pooled.items()}
    write_metrics(run / "metrics.json", metrics)
    for name, rep in metrics["pooled"].items():
        log.info("%-16s mse %.6g  rmse %.6g  r2 %.4f  rmse %% range %.3f", name, rep["mse"], rep["rmse"],
                 rep["r2"], rep["rmse_pct_range"])
    return 0


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gripsense", description="Estimate grip force from video.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--config", help="key = value configuration file")
    ap.add_argument("--seed", type=int, default=0, help="random seed (synthetic data)")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for feature extraction")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--duration", type=float, default=100.0, help="seconds")
    p.add_argument("--width", type=int, default=480)
    p.add_argument("--height", type=int, default=360)
    p.add_argument("--hand-scale", type=float, default=60.0, help="pixels per scene unit")
    p.add_argument("--led-onset", type=int, default=12)
    p.add_argument("--noise", type=float, default=2.0, help="pixel noise sigma in counts")
    p.add_argument("--quiet", type=_quiet, action="append",
                   help="slow ramp T0:T1:F0:F1 (seconds, force); repeatable")
    p.add_argument("--masks", action="store_true", help="also write ground-truth skin masks")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("features", help="extract spatial and temporal features")
    p.add_argument("dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--stream", choices=("spatial", "temporal", "both"), default="both")
    p.add_argument("--limits", help="reuse histogram limits instead of calibrating")
    p.add_argument("--exclude", type=_range, action="append",
                   help="frame range START:END kept out of calibration; repeatable")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="train a per-stream regressor")
    p.add_argument("--features", nargs="+", required=True)
    p.add_argument("--sync", nargs="+", required=True)
    p.add_argument("--stream", choices=("spatial", "temporal"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--limits", help="histogram limits stored with the model")
    p.add_argument("--test-start", type=int, nargs="+", help="first test frame per dataset")
    p.add_argument("--split-out", help="write the train/test split manifest here")
    p.add_argument("--fps", type=float, default=59.95, help="frame rate for label filtering")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="apply a model to a feature file")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("fuse", help="Kalman-fuse spatial and temporal predictions")
    p.add_argument("--spatial", required=True)
    p.add_argument("--temporal")
    p.add_argument("--no-temporal", action="store_true", help="fuse the spatial stream alone")
    p.add_argument("--out", required=True)
    p.add_argument("--split", help="split manifest from train")
    p.add_argument("--source", type=int, default=0, help="dataset index within the split manifest")
    p.add_argument("--test-start", type=int, help="first test frame (without --split)")
    p.add_argument("--frames", type=int, help="total frame count (default: from predictions)")
    p.add_argument("--model-out", help="write the fitted Kalman model here")
    p.add_argument("--kalman", help="apply this fitted Kalman model instead of running EM; "
                                    "without --split or --test-start every frame is filtered")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("eval", help="metrics and plots for a prediction file")
    p.add_argument("--pred", required=True)
    p.add_argument("--column", help="prediction column (default: first non-frame column)")
    p.add_argument("--truth", required=True, help="sync CSV with ground truth")
    p.add_argument("--target", choices=("force", "dforce"), default="force")
    p.add_argument("--frames", type=_range, help="evaluate frames START:END only")
    p.add_argument("--out", required=True)
    p.add_argument("--label", default="prediction")
    p.add_argument("--scale", type=float, help="units per raw count for the scaled RMSE")
    p.add_argument("--fps", type=float, default=59.95)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", help="run every stage on one or more datasets")
    p.add_argument("datasets", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--test-start", type=int, nargs="+", help="first test frame per dataset")
    p.add_argument("--scale", type=float, help="units per raw count for the scaled RMSE")
    p.set_defaults(func=cmd_pipeline)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        if args.jobs < 1:
            raise InvalidArgumentError("--jobs must be at least 1")
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except GripsenseError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except OSError as exc:
        log.error("%s", exc)
        return DatasetError.exit_code
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        log.error("numerical failure: %s", exc)
        return NumericalError.exit_code


if __name__ == "__main__":
    sys.exit(main())

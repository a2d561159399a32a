import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_scene():
    """A short, small synthetic scene shared by vision tests."""
    from gripsense.synth import SceneParams, SyntheticScene, make_trajectory

    traj = make_trajectory(3.0, seed=11)
    return SyntheticScene(traj, SceneParams(width=320, height=240, hand_scale=40.0, seed=11))


SHORT_CONFIG = "canvas_ppu = 50\nblock_len = 90\nem_max_iters = 30\n"


@pytest.fixture(scope="session")
def short_dataset(tmp_path_factory):
    """A 5 s synthetic recording written through the command line, plus a fast config."""
    from gripsense import cli

    root = tmp_path_factory.mktemp("short")
    (root / "run.cfg").write_text(SHORT_CONFIG)
    assert cli.main(["--seed", "21", "synth", "--out", str(root / "data"), "--duration", "5",
                     "--width", "320", "--height", "240", "--hand-scale", "40"]) == 0
    return root


# -- acceptance reporting --------------------------------------------------------------------

CRITERIA = {}


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(n, ok, detail)``."""
    def record(n, ok, detail):
        status = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
        line = f"criterion {n:2d}: {status}  {detail}"
        CRITERIA[n] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[n])


ACCEPTANCE_CONFIG = "canvas_ppu = 50\n"
ACCEPTANCE_DATASETS = (
    # seed, extra synth flags; the second recording ends in a long slow ramp
    (1, []),
    (2, ["--quiet", "74:100:150:750"]),
)


@pytest.fixture(scope="session")
def acceptance_run(tmp_path_factory):
    """Two 100 s recordings through the full pipeline (about 25 minutes on one core).

    Set GRIPSENSE_ACCEPTANCE_DIR to keep the run and reuse it on later
    invocations; by default everything lives in a fresh temporary directory.
    """
    from pathlib import Path

    from gripsense import cli

    keep = os.environ.get("GRIPSENSE_ACCEPTANCE_DIR")
    root = Path(keep) if keep else tmp_path_factory.mktemp("acceptance")
    root.mkdir(parents=True, exist_ok=True)
    run = root / "run"
    if (run / "metrics.json").exists() and keep:
        return root
    (root / "run.cfg").write_text(ACCEPTANCE_CONFIG)
    datasets = []
    for seed, extra in ACCEPTANCE_DATASETS:
        d = root / f"data{seed}"
        if not (d / "manifest").exists():
            assert cli.main(["--seed", str(seed), "synth", "--out", str(d), "--duration", "100",
                             "--width", "320", "--height", "240", "--hand-scale", "40", *extra]) == 0
        datasets.append(str(d))
    assert cli.main(["--config", str(root / "run.cfg"), "pipeline", *datasets, "--out", str(run)]) == 0
    return root


DRIFT_RECORDING = (4, ["--duration", "60", "--quiet", "0:60:150:750"])


@pytest.fixture(scope="session")
def drift_run(acceptance_run):
    """A held-out minute of one slow steady squeeze, scored with the trained models.

    Nothing from this recording is used for training, calibration or EM:
    histogram limits, both regressors and the Kalman model come from the
    main acceptance run.
    """
    from gripsense import cli

    root, run = acceptance_run, acceptance_run / "run"
    seed, extra = DRIFT_RECORDING
    data, out = root / "drift_data", root / "drift"
    if (out / "fused.csv").exists() and os.environ.get("GRIPSENSE_ACCEPTANCE_DIR"):
        return out
    if not (data / "manifest").exists():
        assert cli.main(["--seed", str(seed), "synth", "--out", str(data), "--width", "320", "--height", "240",
                         "--hand-scale", "40", *extra]) == 0
    assert cli.main(["--config", str(root / "run.cfg"), "features", str(data), "--out", str(out),
                     "--limits", str(run / "limits.txt")]) == 0
    for stream in ("spatial", "temporal"):
        assert cli.main(["predict", "--model", str(run / f"model_{stream}.txt"), "--features",
                         str(out / f"{stream}.csv"), "--out", str(out / f"pred_{stream}.csv")]) == 0
    assert cli.main(["fuse", "--spatial", str(out / "pred_spatial.csv"), "--temporal",
                     str(out / "pred_temporal.csv"), "--kalman", str(run / "kalman.txt"),
                     "--out", str(out / "fused.csv")]) == 0
    return out

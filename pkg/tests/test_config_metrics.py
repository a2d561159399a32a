import math

import numpy as np
import pytest

from gripsense.config import Config, config_lines, load_config, parse_config
from gripsense.errors import DatasetError, InvalidArgumentError
from gripsense.metrics import mse, r2, report, rmse, svg_scatter, svg_timeseries


def test_defaults_and_overrides():
    cfg = parse_config("# comment\ncanvas_ppu = 50\nskin_lo = 0.8, 0.1, 0.2\nem_learn = R\n\n")
    assert cfg.canvas_ppu == 50.0 and cfg.skin_lo == (0.8, 0.1, 0.2) and cfg.em_learn == ("R",)
    assert cfg.block_len == Config().block_len == 1500
    assert cfg.features().preprocess.canvas.ppu == 50.0
    assert load_config() == Config()


def test_config_lines_round_trip():
    cfg = parse_config("flow_alpha = 0.02\nmodel_kind = knn\n")
    assert parse_config("\n".join(config_lines(cfg))) == cfg


@pytest.mark.parametrize("text", ["bogus = 1", "canvas_ppu", "canvas_ppu = fast", "filter_order = 0",
                                  "roi_width = -1"])
def test_config_errors(text):
    with pytest.raises(InvalidArgumentError):
        parse_config(text)


def test_load_config_missing(tmp_path):
    with pytest.raises(InvalidArgumentError):
        load_config(tmp_path / "nope.cfg")


def test_metric_definitions(rng):
    t = rng.normal(size=100)
    p = t + rng.normal(scale=0.3, size=100)
    assert math.isclose(mse(p, t), np.mean((p - t) ** 2))
    assert math.isclose(rmse(p, t), math.sqrt(np.mean((p - t) ** 2)))
    assert math.isclose(r2(p, t), 1 - np.sum((t - p) ** 2) / np.sum((t - t.mean()) ** 2))
    assert r2(t, t) == 1.0
    assert r2(np.full(100, t.mean() + 10), t) < 0
    rep = report(p, t, scale=0.5)
    assert rep["n"] == 100 and math.isclose(rep["rmse_scaled"], 0.5 * rep["rmse"])
    assert math.isclose(rep["rmse_pct_range"], 100 * rep["rmse"] / np.ptp(t))
    with pytest.raises(DatasetError):
        mse([1.0], [1.0, 2.0])
    with pytest.raises(DatasetError):
        mse([], [])


def test_svg_output(tmp_path):
    x = np.arange(10)
    svg_timeseries(tmp_path / "a.svg", x, {"truth": x * 2.0, "pred": np.where(x > 5, np.nan, x)})
    svg_scatter(tmp_path / "b.svg", x, x + 1.0)
    for name in ("a.svg", "b.svg"):
        text = (tmp_path / name).read_text()
        assert text.startswith("<svg") and text.rstrip().endswith("</svg>")

import json

import numpy as np
import pytest

from robusthedge.config import PRESETS
from robusthedge.experiments import (
    make_regime_fixture,
    run_backtest_table,
    run_bounds_profile,
    run_hedge_table,
    write_fixture_csv,
)
from robusthedge.estimation import PriceSeries

TINY_TRAIN = {"width": 8, "n_hidden_layers": 2, "n_iterations": 25, "batch_size": 16}


def tiny_table_one_config(seed=7):
    return {
        "kind": "table-one",
        "seed": seed,
        "box": PRESETS["desk"]["box"],
        "x0": 10.0,
        "maturity": 30 / 365,
        "n_steps": 30,
        "train": dict(TINY_TRAIN),
        "eval_paths": 100,
        "save_checkpoints": False,
    }


class TestHedgeTable:
    def test_rows_and_outputs(self, tmp_path):
        report = run_hedge_table(tiny_table_one_config(), tmp_path)
        columns = {(r["payoff"], r["column"]) for r in report["rows"]}
        assert columns == {
            ("call", "fixed"), ("call", "robust"),
            ("butterfly", "fixed"), ("butterfly", "robust"),
            ("lookback", "fixed"), ("lookback", "robust"),
            ("lookback", "robust_running_max"),
        }
        assert (tmp_path / "table_one.csv").exists()
        assert (tmp_path / "table_one.json").exists()
        for r in report["rows"]:
            assert (tmp_path / f"errors_{r['payoff']}_{r['column']}.csv").exists()

    def test_report_bytes_reproducible(self, tmp_path):
        run_hedge_table(tiny_table_one_config(), tmp_path / "a")
        run_hedge_table(tiny_table_one_config(), tmp_path / "b")
        for name in ("table_one.json", "table_one.csv", "errors_call_robust.csv"):
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes()

    def test_seed_changes_numbers(self, tmp_path):
        a = run_hedge_table(tiny_table_one_config(seed=7), tmp_path / "a")
        b = run_hedge_table(tiny_table_one_config(seed=8), tmp_path / "b")
        assert a["rows"][0]["price"] != b["rows"][0]["price"]


class TestBoundsProfile:
    def test_rows_cover_grid(self, tmp_path):
        config = {
            "kind": "fig-five",
            "seed": 1,
            "box": PRESETS["desk"]["box"],
            "maturity": 30 / 365,
            "n_steps": 30,
            "train": dict(TINY_TRAIN),
            "x_values": [9.0, 10.0],
            "payoffs": [{"kind": "call", "strike": 10.0}],
            "pde": {"n_space": 80},
        }
        report = run_bounds_profile(config, tmp_path)
        assert [r["x"] for r in report["rows"]] == [9.0, 10.0]
        for r in report["rows"]:
            assert r["lower"] <= r["upper"]
        lines = (tmp_path / "fig_five.csv").read_text().splitlines()
        assert lines[0] == "payoff,x,lower,hedge_price,upper"
        assert len(lines) == 3


class TestRegimeFixture:
    def test_shapes_and_positivity(self):
        fixture = make_regime_fixture(3, seed=0, n_estimation_days=550, n_test_days=30)
        assert len(fixture) == 3
        for series in fixture:
            assert len(series) == 581
            assert np.all(series.prices > 0)

    def test_deterministic_and_distinct_tickers(self):
        a = make_regime_fixture(2, seed=5)
        b = make_regime_fixture(2, seed=5)
        np.testing.assert_array_equal(a[0].prices, b[0].prices)
        assert not np.array_equal(a[0].prices, a[1].prices)

    def test_crisis_more_volatile_than_calm(self):
        # realized daily-move dispersion must clearly separate the regimes
        fixture = make_regime_fixture(5, seed=2)
        for series in fixture:
            moves = np.abs(np.diff(series.prices))
            crisis = np.median(moves[:250])
            calm = np.median(moves[250:550])
            assert crisis > 1.5 * calm

    def test_fixture_csv_round_trip(self, tmp_path):
        fixture = make_regime_fixture(2, seed=1)
        path = tmp_path / "prices.csv"
        write_fixture_csv(fixture, path)
        loaded = PriceSeries.from_csv(path)
        assert [s.ticker for s in loaded] == ["SYN00", "SYN01"]
        np.testing.assert_allclose(loaded[1].prices, fixture[1].prices)


class TestBacktestTable:
    def test_tiny_run(self, tmp_path):
        config = {
            "kind": "table-two",
            "seed": 3,
            "train": dict(TINY_TRAIN),
            "estimation": {"n_starts": 1, "max_evaluations": 100},
            "n_tickers": 2,
            "columns": ["fixed", "robust", "gamma"],
        }
        report = run_backtest_table(config, tmp_path)
        assert set(report["aggregate"]) == {"fixed", "robust", "gamma"}
        assert len(report["per_ticker"]) == 2
        for row in report["per_ticker"]:
            for column in report["columns"]:
                assert row[column]["abs_relative_error"] >= 0.0
        # fixture and estimation artifacts land next to the table
        assert (tmp_path / "fixture_prices.csv").exists()
        assert (tmp_path / "theta_hat_SYN00.json").exists()
        table = json.loads((tmp_path / "table_two.json").read_text())
        assert table["test_horizon"] == 30

    def test_unknown_column_rejected(self, tmp_path):
        from robusthedge.config import ConfigError
        config = {"kind": "table-two", "seed": 0, "columns": ["robust", "vega"],
                  "train": dict(TINY_TRAIN)}
        with pytest.raises(ConfigError):
            run_backtest_table(config, tmp_path)

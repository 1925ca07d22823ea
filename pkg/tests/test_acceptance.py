"""Acceptance criteria, one test per criterion.

Each test prints a single ``[criterion N] PASS/FAIL`` line with the
measured quantity next to its pinned tolerance.  Criteria 4, 5, 9 and
10 train many networks and dominate the runtime (roughly an hour in
total on one CPU core); run the unit suites alone with
``pytest --ignore=tests/test_acceptance.py`` when iterating.

Scale note: the training-based criteria run the reduced "desk" settings
(width 96 or 64 instead of 256, 2,000 or 1,200 iterations instead of
10,000).  They assert orderings and ratio bounds, never exact values.

Known red: criterion 4's "robust < 0.5 x fixed" ratio is kept as
pinned but is unattainable for the call and the butterfly.  The
trained fixed-parameter hedges already match the converged fixed-model
optimum (the PDE-delta benchmark computed inside the test: call ~0.30,
butterfly ~0.29 mean |relative error| on the robust evaluation set,
independent of width -- 96 and 256 give the same numbers), while the
converged robust errors are ~0.19 (call) and ~0.31 (butterfly).  No
honest fixed-parameter training can be bad enough to open a 2x gap;
the test stays red rather than loosening the pinned ratio.  The
lookback ratio (0.45) and the running-max clause pass.
"""

import time

import numpy as np
import pytest

import robusthedge.hedging as H
from robusthedge import (
    EstimationConfig,
    MlpNetwork,
    ParameterBox,
    ParameterPoint,
    PathBatch,
    RngSpec,
    TimeGrid,
    call,
    generator_extremum,
    hedge_loss,
    log_likelihood,
    mle_fit,
    sample_paths,
    solve_pde,
)
from robusthedge.config import PRESETS, parse_box
from robusthedge.experiments import run_backtest_table, run_bounds_profile, run_hedge_table
from robusthedge.model import FIXED
from robusthedge.pde import LOWER, UPPER, PdeConfig
from conftest import degenerate_box

MATURITY = 30 / 365


def study_box() -> ParameterBox:
    return parse_box(PRESETS["desk"]["box"], [])


def report(criterion, ok, detail):
    print(f"\n[criterion {criterion}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {criterion}: {detail}"


# -- criterion 4/10 share one pair of desk-scale study runs -----------------

@pytest.fixture(scope="session")
def table_one_runs(tmp_path_factory):
    config = {
        "kind": "table-one",
        "seed": 0,
        "box": PRESETS["desk"]["box"],
        "x0": 10.0,
        "maturity": MATURITY,
        "n_steps": 30,
        "train": dict(PRESETS["desk"]["train"]),  # width 96, 2,000 iterations
        "eval_paths": 20_000,
        "save_checkpoints": False,
    }
    base = tmp_path_factory.mktemp("table_one")
    t0 = time.perf_counter()
    first = run_hedge_table(dict(config), base / "run_a")
    elapsed_first = time.perf_counter() - t0
    second = run_hedge_table(dict(config), base / "run_b")
    return {"report": first, "dir_a": base / "run_a", "dir_b": base / "run_b",
            "elapsed_first": elapsed_first, "second": second}


class TestCriterion1:
    def test_gradients_match_finite_differences(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(2024)
        net = MlpNetwork.initialize([2, 8, 8, 1], rng)
        model = H.HedgeModel(net=net, d=float(rng.normal()),
                             feature_policy=H.MARKOV, x0=10.0, maturity=MATURITY)
        paths = 10.0 + np.cumsum(rng.normal(0, 0.4, size=(16, 10)), axis=1)
        paths = np.hstack([np.full((16, 1), 10.0), paths])
        batch = PathBatch(grid=TimeGrid.uniform(MATURITY, 10), x0=10.0, paths=paths)
        spec = call(10.0)

        feats = H.hedge_features(model, batch).reshape(-1, 2)
        _, cache = net.forward_cached(feats)
        # pre-activation distances to the ReLU kink; coordinates that sit
        # within 1e-6 of a kink are excluded from the comparison
        kink_dist = min(float(np.abs(z).min()) for _, z in cache[:-1])

        _, net_grads, d_grad = H.hedge_backward(model, batch, spec)
        step = 1e-5
        worst = 0.0
        checked = 0
        params = net.parameters() + [None]
        grads = net_grads + [np.asarray(d_grad)]
        for pi, g in enumerate(grads):
            if params[pi] is None:
                model.d += step
                up = hedge_loss(model, batch, spec)
                model.d -= 2 * step
                dn = hedge_loss(model, batch, spec)
                model.d += step
                fd = (up - dn) / (2 * step)
                worst = max(worst, abs(float(g) - fd) / max(abs(fd), 1e-12))
                checked += 1
                continue
            flat = params[pi].ravel()
            gflat = g.ravel()
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + step
                up = hedge_loss(model, batch, spec)
                flat[j] = orig - step
                dn = hedge_loss(model, batch, spec)
                flat[j] = orig
                fd = (up - dn) / (2 * step)
                if abs(fd) < 1e-10 and abs(gflat[j]) < 1e-10:
                    checked += 1
                    continue
                worst = max(worst, abs(gflat[j] - fd) / max(abs(fd), 1e-12))
                checked += 1
        elapsed = time.perf_counter() - t0
        ok = worst < 1e-4 and kink_dist > 1e-6 and elapsed < 10.0
        report(1, ok, f"max rel grad error {worst:.2e} < 1e-4 over {checked} "
                      f"coordinates (kink distance {kink_dist:.1e}), {elapsed:.1f}s < 10s")


class TestCriterion2:
    def test_generator_matches_dense_grid(self):
        t0 = time.perf_counter()
        box = study_box()
        rng = np.random.default_rng(7)
        n_grid = 21
        b0s = np.linspace(*box.b0_range, n_grid)
        b1s = np.linspace(*box.b1_range, n_grid)
        a0s = np.linspace(*box.a0_range, n_grid)
        a1s = np.linspace(*box.a1_range, n_grid)
        gs = np.linspace(*box.gamma_range, n_grid)
        worst = 0.0
        for _ in range(1000):
            x = rng.uniform(-5.0, 20.0)
            p = rng.normal(0, 2)
            q = rng.normal(0, 2)
            xp = max(x, 0.0)
            drift = (b0s[:, None] + b1s[None, :] * x) * p
            base = a0s[:, None] + a1s[None, :] * xp
            diff = 0.5 * base[:, :, None] ** (2.0 * gs[None, None, :]) * q
            for direction, grid_val in (
                (UPPER, drift.max() + diff.max()),
                (LOWER, drift.min() + diff.min()),
            ):
                corner = float(generator_extremum(box, x, p, q, direction))
                # the endpoint-including grid contains every corner, so the
                # two optimizers must agree exactly (up to rounding)
                denom = max(abs(grid_val), 1.0)
                worst = max(worst, abs(corner - grid_val) / denom)
        elapsed = time.perf_counter() - t0
        ok = worst < 1e-9 and elapsed < 30.0
        report(2, ok, f"max |corner - grid|/max(|grid|,1) = {worst:.2e} < 1e-9 "
                      f"on 1000 queries x 2 directions, {elapsed:.1f}s < 30s")


class TestCriterion3:
    def test_pde_matches_lognormal_price(self):
        t0 = time.perf_counter()
        from scipy.stats import norm
        sigma = 0.5
        box = degenerate_box(0.0, 0.0, 0.0, sigma, 1.0)
        grid = solve_pde(box, call(10.0), 10.0, MATURITY, PdeConfig(n_space=400))
        fd = grid.value_at(10.0)
        s = sigma * np.sqrt(MATURITY)
        exact = 10.0 * (norm.cdf(0.5 * s) - norm.cdf(-0.5 * s))
        rel = abs(fd - exact) / exact
        elapsed = time.perf_counter() - t0
        ok = rel < 0.01 and elapsed < 60.0
        report(3, ok, f"FD price {fd:.4f} vs closed form {exact:.4f}, "
                      f"rel err {rel:.4f} < 0.01, {elapsed:.1f}s < 60s")


def _fixed_optimum_benchmark(spec, eval_paths=20_000, eval_seed=0):
    """Mean |relative error| of the CONVERGED fixed-parameter hedge.

    The exact fixed-model strategy is the space derivative of the
    degenerate-box PDE value surface at the interval midpoints, with the
    exact fixed-model price as the cash position.  It is the best any
    fixed-parameter training can do, independent of network size or
    iteration count, so it calibrates how much of a trained fixed
    model's error is irreducible model misspecification.
    """
    from robusthedge.experiments import _EVAL_STREAM

    fixed_box = ParameterBox(b0_range=(0.0, 0.0), b1_range=(0.0, 0.0),
                             a0_range=(0.5, 0.5), a1_range=(0.5, 0.5),
                             gamma_range=(1.0, 1.0))
    grid = TimeGrid.uniform(MATURITY, 30)
    surface = solve_pde(fixed_box, spec, 10.0, MATURITY,
                        PdeConfig(n_space=600), UPPER)
    delta = np.gradient(surface.values, surface.x, axis=1)
    price = float(np.interp(10.0, surface.x, surface.values[0]))
    batch = sample_paths(study_box(), 10.0, grid, eval_paths,
                         RngSpec(eval_seed, _EVAL_STREAM))
    gains = np.zeros(eval_paths)
    for i in range(grid.n_steps):
        k = int(np.searchsorted(surface.t_slices, grid.t[i]))
        k = min(max(k, 1), surface.t_slices.size - 1)
        w = ((grid.t[i] - surface.t_slices[k - 1])
             / (surface.t_slices[k] - surface.t_slices[k - 1]))
        row = (1.0 - w) * delta[k - 1] + w * delta[k]
        h = np.interp(batch.paths[:, i], surface.x, row)
        gains += h * (batch.paths[:, i + 1] - batch.paths[:, i])
    rel = (price + gains - spec.evaluate_batch(batch.paths)) / price
    return float(np.abs(rel).mean())


class TestCriterion4:
    def test_robust_beats_fixed_at_desk_scale(self, table_one_runs):
        from robusthedge import butterfly

        rows = {(r["payoff"], r["column"]): r for r in table_one_runs["report"]["rows"]}
        details = []
        ok = True
        ratio_failed = False
        for payoff in ("call", "butterfly", "lookback"):
            fixed = rows[(payoff, "fixed")]["mean_abs"]
            robust = rows[(payoff, "robust")]["mean_abs"]
            clause = robust < 0.5 * fixed
            ok &= clause
            ratio_failed |= not clause
            details.append(f"{payoff} robust {robust:.3f} vs fixed {fixed:.3f}")
        run_max = rows[("lookback", "robust_running_max")]["mean_abs"]
        markov = rows[("lookback", "robust")]["mean_abs"]
        ok &= run_max <= markov + 0.10
        details.append(f"run-max {run_max:.3f} <= markov {markov:.3f} + 0.10")
        elapsed = table_one_runs["elapsed_first"]
        ok &= elapsed < 1800.0
        if ratio_failed:
            # Context for the red: if the trained fixed models already
            # match the converged fixed-model optimum, the 0.5 ratio is
            # unattainable by any honest fixed-parameter training.
            bench_call = _fixed_optimum_benchmark(call(10.0))
            bench_fly = _fixed_optimum_benchmark(butterfly(8.0, 10.0, 12.0))
            details.append(
                f"converged fixed-model benchmark (PDE delta): "
                f"call {bench_call:.3f}, butterfly {bench_fly:.3f}"
            )
        report(4, ok, "; ".join(details) + f"; {elapsed:.0f}s < 1800s")


class TestCriterion5:
    def test_hedge_price_between_pde_bounds(self, tmp_path):
        t0 = time.perf_counter()
        config = {
            "kind": "fig-five",
            "seed": 0,
            "box": PRESETS["desk"]["box"],
            "x0": 10.0,
            "maturity": MATURITY,
            "n_steps": 30,
            # width reduced to stay inside the runtime budget; the bounds
            # are wide enough that the learned price stays bracketed
            "train": {"n_hidden_layers": 4, "width": 64,
                      "n_iterations": 1200, "batch_size": 256,
                      "learning_rate": 0.005},
            "x_values": [8.0, 9.0, 10.0, 11.0, 12.0],
            "payoffs": [{"kind": "call", "strike": 10.0},
                        {"kind": "butterfly", "k": [8.0, 10.0, 12.0]}],
            "pde": {"n_space": 400},
        }
        result = run_bounds_profile(config, tmp_path)
        ok = True
        worst = ""
        for r in result["rows"]:
            inside = r["lower"] <= r["hedge_price"] <= r["upper"]
            ok &= inside
            if not inside:
                worst += (f" {r['payoff']}@x={r['x']}: {r['lower']:.3f} / "
                          f"{r['hedge_price']:.3f} / {r['upper']:.3f}")
        elapsed = time.perf_counter() - t0
        ok &= elapsed < 1200.0
        report(5, ok, f"lower <= d <= upper at 5 spots x 2 payoffs"
                      f"{worst or ' (all inside)'}, {elapsed:.0f}s < 1200s")


class TestCriterion6:
    def test_likelihood_oracle(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(123)
        worst = 0.0
        for _ in range(100):
            theta = ParameterPoint(
                rng.uniform(-1, 1), rng.uniform(-0.5, 0.5),
                rng.uniform(0.1, 2.0), rng.uniform(0.0, 2.0),
                rng.uniform(0.2, 1.5),
            )
            window = rng.uniform(4.0, 16.0, size=rng.integers(2, 40))
            dt = 1 / 250
            # independent evaluation from the Gaussian density formula
            expected = 0.0
            for xi, xn in zip(window[:-1], window[1:]):
                var = (theta.a0 + theta.a1 * max(xi, 0.0)) ** (2 * theta.gamma) * dt
                resid = xn - xi - (theta.b0 + theta.b1 * xi) * dt
                expected += -0.5 * np.log(2 * np.pi * var) - resid ** 2 / (2 * var)
            got = log_likelihood(theta, window, dt)
            worst = max(worst, abs(got - expected) / max(abs(expected), 1e-300))
        elapsed = time.perf_counter() - t0
        ok = worst < 1e-12 and elapsed < 5.0
        report(6, ok, f"max rel disagreement {worst:.2e} < 1e-12 "
                      f"on 100 inputs, {elapsed:.2f}s < 5s")


class TestCriterion7:
    def test_in_sample_dominance_on_50_windows(self):
        t0 = time.perf_counter()
        theta_star = ParameterPoint(0.0, 0.0, 0.5, 0.5, 1.0)
        box = degenerate_box(0.0, 0.0, 0.5, 0.5, 1.0)
        grid = TimeGrid.uniform(249 / 250, 249)
        config = EstimationConfig()
        failures = 0
        min_margin = np.inf
        for seed in range(50):
            window = sample_paths(box, 10.0, grid, 1, RngSpec(seed),
                                  mode=FIXED, theta=theta_star).paths[0]
            _, ll_hat = mle_fit(window, config)
            margin = ll_hat - log_likelihood(theta_star, window, config.dt)
            min_margin = min(min_margin, margin)
            if margin < -1e-9:
                failures += 1
        elapsed = time.perf_counter() - t0
        ok = failures == 0 and elapsed < 300.0
        report(7, ok, f"{failures}/50 windows below ll(theta*), "
                      f"min margin {min_margin:+.4f}, {elapsed:.0f}s < 300s")


class TestCriterion8:
    def test_first_moment_scales_like_sqrt_h(self):
        t0 = time.perf_counter()
        box = study_box()
        x0 = 10.0
        horizons = [MATURITY * 2.0 ** (-k) for k in range(8, 3, -1)]
        n_paths, chunk = 50_000, 10_000
        means = []
        for hi, h in enumerate(horizons):
            grid = TimeGrid.uniform(h, 32)
            total = 0.0
            for ci in range(n_paths // chunk):
                batch = sample_paths(box, x0, grid, chunk,
                                     RngSpec(0, stream=hi * 100 + ci))
                total += float(np.abs(batch.paths - x0).max(axis=1).sum())
            means.append(total / n_paths)
        slope = np.polyfit(np.log(horizons), np.log(means), 1)[0]
        elapsed = time.perf_counter() - t0
        ok = 0.35 <= slope <= 0.65 and elapsed < 300.0
        report(8, ok, f"log-log slope {slope:.3f} in [0.35, 0.65] "
                      f"(E sup|X-x0| ~ c(h^0.5 + h)), {elapsed:.0f}s < 300s")


class TestCriterion9:
    def test_robust_beats_fixed_on_regime_switch(self, tmp_path):
        t0 = time.perf_counter()
        config = {
            "kind": "table-two",
            "seed": 0,
            "train": {"n_hidden_layers": 4, "width": 64,
                      "n_iterations": 1200, "batch_size": 128,
                      "learning_rate": 0.005},
            "estimation": {"n_starts": 5, "max_evaluations": 2000},
            "n_tickers": 10,
            "columns": ["fixed", "robust", "gamma"],
        }
        result = run_backtest_table(config, tmp_path)
        wins = sum(
            1 for row in result["per_ticker"]
            if row["robust"]["abs_relative_error"] < row["fixed"]["abs_relative_error"]
        )
        robust_mean = result["aggregate"]["robust"]["mean_abs"]
        gamma_mean = result["aggregate"]["gamma"]["mean_abs"]
        fixed_mean = result["aggregate"]["fixed"]["mean_abs"]
        elapsed = time.perf_counter() - t0
        ok = wins >= 8 and gamma_mean >= robust_mean and elapsed < 2700.0
        report(9, ok, f"robust beats fixed on {wins}/10 tickers (need >= 8); "
                      f"means robust {robust_mean:.3f} <= gamma-frozen {gamma_mean:.3f} "
                      f"(fixed {fixed_mean:.3f}); {elapsed:.0f}s < 2700s")


class TestCriterion10:
    def test_repeat_run_is_byte_identical(self, table_one_runs):
        names = sorted(p.name for p in table_one_runs["dir_a"].iterdir())
        diffs = []
        for name in names:
            a = (table_one_runs["dir_a"] / name).read_bytes()
            b = (table_one_runs["dir_b"] / name).read_bytes()
            if a != b:
                diffs.append(name)
        ok = not diffs and len(names) >= 9  # table + json + 7 error files
        report(10, ok, f"{len(names)} report files byte-identical"
                       + (f"; differing: {diffs}" if diffs else ""))

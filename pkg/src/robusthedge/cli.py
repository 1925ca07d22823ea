"""Command-line entry point.

Subcommands::

    robusthedge simulate        --config cfg.json --out DIR
    robusthedge train           --config cfg.json --out DIR
    robusthedge evaluate        --config cfg.json --out DIR
    robusthedge price-bounds    --config cfg.json --out DIR
    robusthedge estimate        --config cfg.json --out DIR
    robusthedge experiment KIND --config cfg.json --out DIR
    robusthedge validate-config --config cfg.json

Exit codes: 0 success, 2 invalid config, 3 numerical failure
(divergence, CFL violation, optimizer failure), 4 missing or malformed
input data.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import (
    EXPERIMENT_KINDS,
    ConfigError,
    RunManifest,
    load_config,
    parse_box,
    parse_estimation_config,
    parse_payoff,
    parse_pde_config,
    parse_theta,
    parse_train_config,
    validate_config,
)
from .estimation import PriceSeries, rolling_estimate
from .experiments import run_backtest_table, run_bounds_profile, run_hedge_table
from .hedging import PriceTooSmall, TrainingDiverged, evaluate, load_model, save_model, train
from .model import (
    FIXED,
    ROBUST,
    RngSpec,
    TimeGrid,
    read_paths_binary,
    sample_paths,
    validate_box,
    write_paths_binary,
    write_paths_csv,
)
from .pde import price_bounds

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_DATA = 4


class NumericalFailure(RuntimeError):
    pass


class DataError(RuntimeError):
    pass


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robusthedge",
        description="Pricing and hedging under interval parameter uncertainty",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, needs_out=True):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        if needs_out:
            p.add_argument("--out", default="out", help="output directory")
            p.add_argument("--format", choices=("csv", "binary"), default="csv",
                           help="path dump format (simulate only)")
        p.add_argument("--threads", type=int, default=None,
                       help="cap BLAS thread count")
        return p

    add("simulate", "draw model paths and dump them")
    add("train", "train a hedging strategy and checkpoint it")
    add("evaluate", "relative hedging errors of a checkpoint on fresh paths")
    add("price-bounds", "robust PDE price bounds at the spot")
    add("estimate", "rolling-window parameter intervals from a price CSV")
    exp = add("experiment", "run a full study")
    exp.add_argument("kind", choices=EXPERIMENT_KINDS)
    add("validate-config", "check a config file and exit", needs_out=False)
    return parser


def _limit_threads(n):
    if n is None:
        return
    try:
        from threadpoolctl import threadpool_limits
        threadpool_limits(limits=n)
    except ImportError:
        # fall back silently; env vars would have to be set before numpy loads
        pass


def _cmd_simulate(config, out_dir, manifest, fmt):
    errors = []
    box = parse_box(config.get("box"), errors)
    theta = parse_theta(config.get("theta"), errors)
    if errors:
        raise ConfigError(errors)
    grid = TimeGrid.uniform(float(config.get("maturity", 30 / 365)),
                            int(config.get("n_steps", 30)))
    rng = RngSpec(int(config.get("seed", 0)), int(config.get("stream", 0)))
    mode = config.get("mode", ROBUST)
    batch = sample_paths(box, float(config.get("x0", 10.0)), grid,
                         int(config.get("n_paths", 100)), rng,
                         mode=mode, theta=theta if mode == FIXED else None)
    if fmt == "binary":
        out = manifest.record_output(out_dir / "paths.bin")
        write_paths_binary(batch, out, seed=rng.seed)
    else:
        out = manifest.record_output(out_dir / "paths.csv")
        write_paths_csv(batch, out)
    return {"n_paths": batch.n_paths, "n_steps": grid.n_steps, "output": str(out)}


def _cmd_train(config, out_dir, manifest):
    errors = []
    box = parse_box(config.get("box"), errors)
    spec = parse_payoff(config.get("payoff"), errors)
    cfg = parse_train_config(config.get("train"), errors)
    theta = parse_theta(config.get("theta"), errors)
    if errors:
        raise ConfigError(errors)
    grid = TimeGrid.uniform(float(config.get("maturity", 30 / 365)),
                            int(config.get("n_steps", 30)))
    rng = RngSpec(int(config.get("seed", 0)), int(config.get("stream", 0)))
    mode = config.get("mode", ROBUST)
    manifest.stage_seeds["train"] = [rng.seed, rng.stream]
    with manifest.time_stage("train"):
        model = train(box, float(config.get("x0", 10.0)), grid, spec, cfg, rng,
                      mode=mode, theta=theta if mode == FIXED else None)
    out = manifest.record_output(out_dir / "model.npz")
    save_model(model, out)
    return {"price": model.d, "checkpoint": str(out)}


def _cmd_evaluate(config, out_dir, manifest):
    errors = []
    box = parse_box(config.get("box"), errors)
    spec = parse_payoff(config.get("payoff"), errors)
    if errors:
        raise ConfigError(errors)
    try:
        model = load_model(config["model"])
    except (OSError, KeyError, ValueError) as exc:
        raise DataError(f"cannot load checkpoint {config.get('model')}: {exc}")
    grid = TimeGrid.uniform(model.maturity, int(config.get("n_steps", 30)))
    rng = RngSpec(int(config.get("seed", 0)),
                  int(config.get("stream", 900_000_000)))
    batch = sample_paths(box, model.x0, grid, int(config.get("n_paths", 10_000)),
                         rng, mode=ROBUST)
    report = evaluate(model, batch, spec,
                      allow_absolute_fallback=bool(config.get("allow_absolute_fallback", False)))
    (out_dir / "hedge_report.json").write_text(report.to_json())
    manifest.record_output(out_dir / "hedge_report.json")
    report.write_errors_csv(manifest.record_output(out_dir / "errors.csv"))
    return report.summary()


def _cmd_price_bounds(config, out_dir, manifest):
    errors = []
    box = parse_box(config.get("box"), errors)
    spec = parse_payoff(config.get("payoff"), errors)
    pde_cfg = parse_pde_config(config.get("pde"), errors)
    if errors:
        raise ConfigError(errors)
    with manifest.time_stage("pde"):
        out = price_bounds(box, spec, float(config.get("x0", 10.0)),
                           float(config.get("maturity", 30 / 365)), pde_cfg)
    path = manifest.record_output(out_dir / "price_bounds.json")
    with open(path, "w") as fh:
        json.dump(out, fh, sort_keys=True, indent=2)
    return out


def _cmd_estimate(config, out_dir, manifest):
    errors = []
    est_cfg = parse_estimation_config(config.get("estimation"), errors,
                                      int(config.get("seed", 0)))
    if errors:
        raise ConfigError(errors)
    try:
        loaded = PriceSeries.from_csv(config["csv"], ticker=config.get("ticker"),
                                      dt=est_cfg.dt)
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"cannot read price CSV: {exc}")
    series_list = loaded if isinstance(loaded, list) else [loaded]
    summary = {}
    for series in series_list:
        try:
            with manifest.time_stage(f"estimate_{series.ticker}"):
                theta_hat = rolling_estimate(series, est_cfg)
        except (RuntimeError, ValueError) as exc:
            raise NumericalFailure(f"estimation failed for {series.ticker}: {exc}")
        out = out_dir / f"theta_hat_{series.ticker}.json"
        out.write_text(theta_hat.to_json())
        manifest.record_output(out)
        summary[series.ticker] = {k: list(v) for k, v in theta_hat.intervals.items()}
    return summary


def _cmd_experiment(kind, config, out_dir, manifest):
    runner = {"table-one": run_hedge_table,
              "fig-five": run_bounds_profile,
              "table-two": run_backtest_table}[kind]
    return runner(config, out_dir, manifest)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    _limit_threads(args.threads)

    try:
        config = load_config(args.config)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        config["seed"] = args.seed

    kind = getattr(args, "kind", None) or args.command
    if args.command == "validate-config":
        errors = validate_config(config, config.get("kind"))
        if errors:
            for e in errors:
                print(f"config error: {e}", file=sys.stderr)
            return EXIT_CONFIG
        print("config ok")
        return EXIT_OK

    errors = validate_config(config, kind)
    if errors:
        for e in errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(kind, int(config.get("seed", 0)), config)
    try:
        if args.command == "simulate":
            result = _cmd_simulate(config, out_dir, manifest, args.format)
        elif args.command == "train":
            result = _cmd_train(config, out_dir, manifest)
        elif args.command == "evaluate":
            result = _cmd_evaluate(config, out_dir, manifest)
        elif args.command == "price-bounds":
            result = _cmd_price_bounds(config, out_dir, manifest)
        elif args.command == "estimate":
            result = _cmd_estimate(config, out_dir, manifest)
        else:
            result = _cmd_experiment(args.kind, config, out_dir, manifest)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrainingDiverged, PriceTooSmall, NumericalFailure,
            FloatingPointError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA

    manifest.write(out_dir / "manifest.json")
    print(json.dumps(result, sort_keys=True, indent=2, default=str))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

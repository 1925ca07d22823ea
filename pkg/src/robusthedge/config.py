"""JSON experiment configuration: parsing, validation, presets, manifests."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from . import __version__
from .estimation import EstimationConfig
from .hedging import MARKOV, TrainConfig
from .model import ParameterBox, ParameterPoint
from .payoffs import PayoffSpec
from .pde import PdeConfig

__all__ = [
    "ConfigError",
    "PRESETS",
    "load_config",
    "validate_config",
    "parse_box",
    "parse_theta",
    "parse_train_config",
    "parse_pde_config",
    "parse_estimation_config",
    "RunManifest",
]

EXPERIMENT_KINDS = ("table-one", "table-two", "fig-five")
COMMAND_KINDS = ("simulate", "train", "evaluate", "price-bounds", "estimate") + EXPERIMENT_KINDS

# interval specification used throughout the simulated studies
STUDY_BOX = {
    "b0": [-0.2, 0.2],
    "b1": [-0.1, 0.1],
    "a0": [0.3, 0.7],
    "a1": [0.4, 0.6],
    "gamma": [0.5, 1.5],
    "state_space": "RealLine",
}

PRESETS: dict[str, dict[str, Any]] = {
    # full-size study settings
    "paper": {
        "box": STUDY_BOX,
        "x0": 10.0,
        "maturity": 30.0 / 365.0,
        "n_steps": 30,
        "train": {
            "n_hidden_layers": 4,
            "width": 256,
            "n_iterations": 10_000,
            "batch_size": 256,
            "learning_rate": 0.005,
        },
        "eval_paths": 50_000,
    },
    # reduced iteration count / evaluation set / width for CPU desk runs
    "desk": {
        "box": STUDY_BOX,
        "x0": 10.0,
        "maturity": 30.0 / 365.0,
        "n_steps": 30,
        "train": {
            "n_hidden_layers": 4,
            "width": 96,
            "n_iterations": 2_000,
            "batch_size": 256,
            "learning_rate": 0.005,
        },
        "eval_paths": 20_000,
    },
}


class ConfigError(ValueError):
    """Config file is structurally or semantically invalid."""

    def __init__(self, errors):
        self.errors = list(errors) if isinstance(errors, (list, tuple)) else [errors]
        super().__init__("; ".join(str(e) for e in self.errors))


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path) -> dict:
    """Read a JSON config, applying its named preset (if any) underneath."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    preset = raw.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"preset: unknown preset {preset!r}, available: {sorted(PRESETS)}")
        raw = _merge(PRESETS[preset], raw)
    return raw


def parse_box(d, errors: list, field_name: str = "box") -> Optional[ParameterBox]:
    if not isinstance(d, dict):
        errors.append(f"{field_name}: expected an object with b0/b1/a0/a1/gamma intervals")
        return None
    ranges = {}
    for name in ("b0", "b1", "a0", "a1", "gamma"):
        r = d.get(name)
        if (not isinstance(r, (list, tuple))) or len(r) != 2:
            errors.append(f"{field_name}.{name}: expected [lo, hi]")
            return None
        ranges[name] = (float(r[0]), float(r[1]))
    try:
        return ParameterBox(
            b0_range=ranges["b0"],
            b1_range=ranges["b1"],
            a0_range=ranges["a0"],
            a1_range=ranges["a1"],
            gamma_range=ranges["gamma"],
            state_space=d.get("state_space", "RealLine"),
        )
    except ValueError as exc:
        errors.append(f"{field_name}: {exc}")
        return None


def parse_theta(v, errors: list, field_name: str = "theta") -> Optional[ParameterPoint]:
    if v is None:
        return None
    if isinstance(v, dict):
        try:
            return ParameterPoint(
                float(v["b0"]), float(v["b1"]), float(v["a0"]),
                float(v["a1"]), float(v["gamma"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            errors.append(f"{field_name}: {exc}")
            return None
    if isinstance(v, (list, tuple)) and len(v) == 5:
        try:
            return ParameterPoint(*map(float, v))
        except ValueError as exc:
            errors.append(f"{field_name}: {exc}")
            return None
    errors.append(f"{field_name}: expected 5 values (b0, b1, a0, a1, gamma)")
    return None


def parse_payoff(d, errors: list, field_name: str = "payoff") -> Optional[PayoffSpec]:
    if not isinstance(d, dict):
        errors.append(f"{field_name}: expected an object with a 'kind'")
        return None
    try:
        return PayoffSpec.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        errors.append(f"{field_name}: {exc}")
        return None


def parse_train_config(d, errors: list, field_name: str = "train") -> Optional[TrainConfig]:
    d = d or {}
    if not isinstance(d, dict):
        errors.append(f"{field_name}: expected an object")
        return None
    try:
        return TrainConfig(
            n_hidden_layers=int(d.get("n_hidden_layers", 4)),
            width=int(d.get("width", 256)),
            activation=d.get("activation", "relu"),
            learning_rate=float(d.get("learning_rate", 0.005)),
            batch_size=int(d.get("batch_size", 256)),
            n_iterations=int(d.get("n_iterations", 10_000)),
            loss_reduction=d.get("loss_reduction", "sum"),
            feature_policy=d.get("feature_policy", MARKOV),
        )
    except (TypeError, ValueError) as exc:
        errors.append(f"{field_name}: {exc}")
        return None


def parse_pde_config(d, errors: list, field_name: str = "pde") -> Optional[PdeConfig]:
    d = d or {}
    try:
        return PdeConfig(
            n_space=int(d.get("n_space", 400)),
            x_lo=None if d.get("x_lo") is None else float(d["x_lo"]),
            x_hi=None if d.get("x_hi") is None else float(d["x_hi"]),
            cfl_safety=float(d.get("cfl_safety", 0.9)),
            auto_shrink_dt=bool(d.get("auto_shrink_dt", True)),
            boundary=d.get("boundary", "second_derivative_zero"),
            max_stored_slices=int(d.get("max_stored_slices", 101)),
        )
    except (TypeError, ValueError) as exc:
        errors.append(f"{field_name}: {exc}")
        return None


def parse_estimation_config(d, errors: list, seed: int = 0,
                            field_name: str = "estimation") -> Optional[EstimationConfig]:
    d = d or {}
    try:
        kwargs = dict(
            window_length=int(d.get("window_length", 250)),
            step=int(d.get("step", 100)),
            dt=float(d.get("dt", 1.0 / 250.0)),
            frozen={k: float(v) for k, v in (d.get("frozen") or {}).items()},
            n_starts=int(d.get("n_starts", 5)),
            max_evaluations=int(d.get("max_evaluations", 2000)),
            tolerance=float(d.get("tolerance", 1e-8)),
            seed=int(d.get("seed", seed)),
        )
        if "search_box" in d:
            kwargs["search_box"] = {
                k: (float(v[0]), float(v[1])) for k, v in d["search_box"].items()
            }
        return EstimationConfig(**kwargs)
    except (TypeError, ValueError, KeyError) as exc:
        errors.append(f"{field_name}: {exc}")
        return None


def validate_config(config: dict, kind: Optional[str] = None) -> list[str]:
    """Field-level diagnostics; an empty list means the config is usable."""
    errors: list[str] = []
    k = kind or config.get("kind")
    if k not in COMMAND_KINDS:
        errors.append(f"kind: expected one of {sorted(COMMAND_KINDS)}, got {k!r}")
        return errors

    if "seed" in config and not isinstance(config["seed"], int):
        errors.append("seed: expected an integer")

    if k == "estimate":
        if not config.get("csv"):
            errors.append("csv: an input price CSV is required")
        elif not Path(config["csv"]).exists():
            errors.append(f"csv: file not found: {config['csv']}")
        parse_estimation_config(config.get("estimation"), errors, config.get("seed", 0))
        return errors

    if k == "evaluate":
        if not config.get("model"):
            errors.append("model: a checkpoint path is required")
        elif not Path(config["model"]).exists():
            errors.append(f"model: file not found: {config['model']}")

    if k == "table-two":
        data = config.get("data")
        if data is not None:
            for i, f in enumerate(data if isinstance(data, list) else [data]):
                if not Path(f).exists():
                    errors.append(f"data[{i}]: file not found: {f}")
        parse_estimation_config(config.get("estimation"), errors, config.get("seed", 0))

    if k in ("simulate", "train", "evaluate", "price-bounds", "table-one", "fig-five"):
        parse_box(config.get("box", STUDY_BOX), errors)
    if k in ("train", "evaluate", "price-bounds"):
        parse_payoff(config.get("payoff"), errors)
    if k in ("train", "table-one", "table-two", "fig-five"):
        parse_train_config(config.get("train"), errors)
    if k in ("price-bounds", "fig-five"):
        parse_pde_config(config.get("pde"), errors)
    if k in ("simulate", "train") and config.get("mode", "robust") not in ("robust", "fixed"):
        errors.append(f"mode: expected 'robust' or 'fixed', got {config.get('mode')!r}")
    if config.get("mode") == "fixed":
        theta = parse_theta(config.get("theta"), errors)
        if theta is None and not errors:
            errors.append("theta: required in fixed mode")
    return errors


@dataclass
class RunManifest:
    """Everything needed to reproduce a run, plus its output inventory."""

    kind: str
    seed: int
    config: dict
    stage_seeds: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    code_version: str = __version__

    def time_stage(self, name: str):
        manifest = self

        class _Timer:
            def __enter__(self):
                self.t0 = time.perf_counter()
                return self

            def __exit__(self, *exc):
                manifest.timings[name] = time.perf_counter() - self.t0
                return False

        return _Timer()

    def record_output(self, path) -> Path:
        path = Path(path)
        self.outputs.append(str(path))
        return path

    def write(self, path) -> None:
        path = Path(path)
        self.outputs.append(str(path))
        with open(path, "w") as fh:
            json.dump(
                {
                    "kind": self.kind,
                    "seed": self.seed,
                    "code_version": self.code_version,
                    "config": self.config,
                    "stage_seeds": self.stage_seeds,
                    "outputs": self.outputs,
                    "timings": self.timings,
                },
                fh, sort_keys=True, indent=2,
            )

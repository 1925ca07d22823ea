"""Quadratic-loss deep hedging under parameter uncertainty.

A strategy is a scalar-output network evaluated at every rebalancing
time together with a trainable cash position d.  Training minimizes the
batch sum of squared terminal hedging errors

    sum_b ( d + sum_i h(t_i, X_i^b) (X_{i+1}^b - X_i^b) - payoff_b )^2

on freshly simulated batches, redrawing the model coefficients from the
uncertainty box at every step when in robust mode.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .model import (
    FIXED,
    ROBUST,
    ParameterBox,
    ParameterPoint,
    PathBatch,
    RngSpec,
    TimeGrid,
    sample_paths,
)
from .network import AdamState, MlpNetwork, adam_step
from .payoffs import PayoffSpec

__all__ = [
    "MARKOV",
    "RUNNING_MAX",
    "TrainConfig",
    "HedgeModel",
    "HedgeReport",
    "hedge_features",
    "hedge_loss",
    "hedge_backward",
    "train",
    "evaluate",
    "save_model",
    "load_model",
]

MARKOV = "markov"
RUNNING_MAX = "running_max"

_POLICY_DIM = {MARKOV: 2, RUNNING_MAX: 3}


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of the training loop."""

    n_hidden_layers: int = 4
    width: int = 256
    activation: str = "relu"
    learning_rate: float = 0.005
    batch_size: int = 256
    n_iterations: int = 10_000
    loss_reduction: str = "sum"  # "sum" is the faithful default
    feature_policy: str = MARKOV

    def __post_init__(self):
        if self.n_hidden_layers < 1 or self.width < 1:
            raise ValueError("network size must be positive")
        if self.batch_size < 1 or self.n_iterations < 1:
            raise ValueError("batch size and iteration count must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.loss_reduction not in ("sum", "mean"):
            raise ValueError("loss_reduction must be 'sum' or 'mean'")
        if self.feature_policy not in _POLICY_DIM:
            raise ValueError(f"unknown feature policy {self.feature_policy!r}")

    def layer_sizes(self) -> list[int]:
        return [_POLICY_DIM[self.feature_policy]] + [self.width] * self.n_hidden_layers + [1]


@dataclass
class HedgeModel:
    """Trained strategy: network, cash position and the feature policy.

    Inputs are normalized: time as t/T and states as x/x0 (running max
    likewise), with the normalization constants recorded here.
    """

    net: MlpNetwork
    d: float
    feature_policy: str
    x0: float
    maturity: float
    config_echo: dict = field(default_factory=dict)

    def strategy(self, t: float, x: float, running_max: Optional[float] = None) -> float:
        """Hedge position at time t in state x."""
        feats = [t / self.maturity, x / self.x0]
        if self.feature_policy == RUNNING_MAX:
            if running_max is None:
                raise ValueError("running_max feature policy needs the running maximum")
            feats.append(running_max / self.x0)
        return float(self.net.forward(np.asarray(feats)))


def hedge_features(model: HedgeModel, batch: PathBatch) -> np.ndarray:
    """Per-step network inputs, shape (B, n, d_in).

    Row (b, i) only uses information up to t_i: the state X_i and, for
    the running-max policy, max(X_0..X_i).
    """
    paths = batch.paths
    n = batch.grid.n_steps
    t_feat = np.broadcast_to(batch.grid.t[:-1] / model.maturity, (batch.n_paths, n))
    x_feat = paths[:, :-1] / model.x0
    cols = [t_feat, x_feat]
    if model.feature_policy == RUNNING_MAX:
        run_max = np.maximum.accumulate(paths, axis=1)[:, :-1] / model.x0
        cols.append(run_max)
    return np.stack(cols, axis=2)


def _portfolio_terms(model: HedgeModel, batch: PathBatch, spec: PayoffSpec):
    feats = hedge_features(model, batch)
    B, n, d_in = feats.shape
    rows = feats.reshape(B * n, d_in)
    h, cache = model.net.forward_cached(rows)
    h = h.reshape(B, n)
    dX = batch.increments
    terminal = model.d + np.sum(h * dX, axis=1)
    errors = terminal - spec.evaluate_batch(batch.paths)
    return errors, dX, cache


def hedge_loss(model: HedgeModel, batch: PathBatch, spec: PayoffSpec,
               reduction: str = "sum") -> float:
    """Quadratic terminal hedging error over the batch."""
    errors, _, _ = _portfolio_terms(model, batch, spec)
    loss = np.sum(errors ** 2)
    return float(loss / len(errors)) if reduction == "mean" else float(loss)


def hedge_backward(model: HedgeModel, batch: PathBatch, spec: PayoffSpec,
                   reduction: str = "sum"):
    """Loss plus exact gradients w.r.t. network parameters and d.

    Returns (loss, net_grads, d_grad) with net_grads aligned with
    ``model.net.parameters()``.
    """
    errors, dX, cache = _portfolio_terms(model, batch, spec)
    B, n = dX.shape
    scale = 1.0 / B if reduction == "mean" else 1.0
    loss = scale * float(np.sum(errors ** 2))
    # d(loss)/d(h_{b,i}) = 2 e_b dX_{b,i}; d(loss)/dd = 2 sum_b e_b
    grad_out = (2.0 * scale * errors[:, None] * dX).reshape(B * n)
    net_grads = model.net.backward(cache, grad_out)
    d_grad = 2.0 * scale * float(np.sum(errors))
    return loss, net_grads, d_grad


class TrainingDiverged(RuntimeError):
    """Raised when the loss turns non-finite during training."""

    def __init__(self, iteration: int, batch_stream: int):
        super().__init__(
            f"non-finite loss at iteration {iteration} (batch stream {batch_stream})"
        )
        self.iteration = iteration
        self.batch_stream = batch_stream


def train(
    box: ParameterBox,
    x0: float,
    grid: TimeGrid,
    spec: PayoffSpec,
    config: TrainConfig,
    rng: RngSpec,
    mode: str = ROBUST,
    theta: Optional[ParameterPoint] = None,
    loss_callback=None,
) -> HedgeModel:
    """Run the sample / backpropagate / Adam-update loop.

    Iteration i simulates a fresh batch under stream ``rng.stream + i``;
    evaluation batches should therefore use a different seed or a
    stream at least ``rng.stream + n_iterations``.  The run is fully
    deterministic given (box, config, rng, mode, theta).
    """
    init_gen = np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=(rng.seed, rng.stream)))
    )
    net = MlpNetwork.initialize(config.layer_sizes(), init_gen, config.activation)
    model = HedgeModel(
        net=net,
        d=0.0,
        feature_policy=config.feature_policy,
        x0=float(x0),
        maturity=grid.maturity,
        config_echo={
            "config": asdict(config),
            "mode": mode,
            "theta": None if theta is None else list(theta.as_array()),
            "box": {k: list(v) for k, v in box.ranges.items()},
            "state_space": box.state_space,
            "seed": rng.seed,
            "stream": rng.stream,
            "normalization": {"t": "t/T", "x": "x/x0"},
        },
    )
    state = AdamState.for_params(
        net.parameters() + [np.zeros(())], learning_rate=config.learning_rate
    )
    for it in range(config.n_iterations):
        batch = sample_paths(
            box, x0, grid, config.batch_size, rng.with_stream(rng.stream + it),
            mode=mode, theta=theta,
        )
        loss, net_grads, d_grad = hedge_backward(model, batch, spec, config.loss_reduction)
        if not np.isfinite(loss):
            raise TrainingDiverged(it, rng.stream + it)
        params = net.parameters() + [np.asarray(model.d)]
        grads = net_grads + [np.asarray(d_grad)]
        new_params = adam_step(state, params, grads)
        net.set_parameters(new_params[:-1])
        model.d = float(new_params[-1])
        if loss_callback is not None:
            loss_callback(it, loss)
    if not net.is_finite():
        raise TrainingDiverged(config.n_iterations, rng.stream)
    return model


@dataclass
class HedgeReport:
    """Per-path relative hedging errors and their summary statistics."""

    relative_errors: np.ndarray  # signed, per path
    price: float
    config_echo: dict = field(default_factory=dict)
    absolute_metric: bool = False  # True when |d| was below the floor

    @property
    def abs_errors(self) -> np.ndarray:
        return np.abs(self.relative_errors)

    def summary(self) -> dict:
        ae = self.abs_errors
        re = self.relative_errors
        return {
            "mean_abs": float(ae.mean()),
            "std_abs": float(ae.std()),
            "mean": float(re.mean()),
            "std": float(re.std()),
            "min": float(re.min()),
            "max": float(re.max()),
            "price": self.price,
            "n_paths": int(re.size),
            "absolute_metric": self.absolute_metric,
        }

    def to_json(self) -> str:
        return json.dumps({"summary": self.summary(), "config": self.config_echo},
                          sort_keys=True, indent=2)

    def write_errors_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("path_id,relative_error\n")
            for i, e in enumerate(self.relative_errors):
                fh.write(f"{i},{float(e)!r}\n")


class PriceTooSmall(ValueError):
    """The cash position is too small for the relative-error metric."""


def evaluate(
    model: HedgeModel,
    batch: PathBatch,
    spec: PayoffSpec,
    price_floor: float = 1e-6,
    allow_absolute_fallback: bool = False,
) -> HedgeReport:
    """Relative hedging errors (hedge minus payoff, divided by price d).

    The evaluation batch must come from a stream independent of the
    training streams.  If |d| is below ``price_floor`` the relative
    metric is undefined; with ``allow_absolute_fallback`` the report
    falls back to unscaled errors and flags it, otherwise this raises.
    """
    errors, _, _ = _portfolio_terms(model, batch, spec)
    absolute = False
    if abs(model.d) < price_floor:
        if not allow_absolute_fallback:
            raise PriceTooSmall(
                f"price d = {model.d} below floor {price_floor}; "
                "relative errors are meaningless"
            )
        rel = errors
        absolute = True
    else:
        rel = errors / model.d
    return HedgeReport(
        relative_errors=rel,
        price=float(model.d),
        config_echo=model.config_echo,
        absolute_metric=absolute,
    )


_CHECKPOINT_VERSION = 1


def save_model(model: HedgeModel, path) -> None:
    """Versioned npz checkpoint (weights, d, feature policy, config echo)."""
    meta = {
        "version": _CHECKPOINT_VERSION,
        "layer_sizes": model.net.layer_sizes,
        "activation": model.net.activation,
        "feature_policy": model.feature_policy,
        "x0": model.x0,
        "maturity": model.maturity,
        "d": model.d,
        "config_echo": model.config_echo,
    }
    arrays = {f"w{k}": w for k, w in enumerate(model.net.weights)}
    arrays.update({f"b{k}": b for k, b in enumerate(model.net.biases)})
    np.savez(path, meta=np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8),
             **arrays)


def load_model(path) -> HedgeModel:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta["version"] != _CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['version']}")
        n_layers = len(meta["layer_sizes"]) - 1
        weights = [data[f"w{k}"] for k in range(n_layers)]
        biases = [data[f"b{k}"] for k in range(n_layers)]
    net = MlpNetwork(meta["layer_sizes"], weights, biases, meta["activation"])
    return HedgeModel(
        net=net,
        d=float(meta["d"]),
        feature_policy=meta["feature_policy"],
        x0=float(meta["x0"]),
        maturity=float(meta["maturity"]),
        config_echo=meta["config_echo"],
    )

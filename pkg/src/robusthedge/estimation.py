"""Rolling-window maximum likelihood for the generalized affine model.

The transition density of the Euler discretization is Gaussian,

    X_{i+1} | X_i  ~  N( X_i + (b0 + b1 X_i) dt, (a0 + a1 X_i^+)^(2 gamma) dt ),

so the window log-likelihood is a sum of Gaussian log-densities.  It is
maximized with COBYLA under box constraints from several starting
points; rolling the window over a price series and taking per-parameter
minima/maxima of the estimates yields the uncertainty box.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy.optimize import minimize

from .model import ParameterBox, ParameterPoint

__all__ = [
    "PriceSeries",
    "EstimationConfig",
    "ThetaHat",
    "log_likelihood",
    "mle_fit",
    "rolling_estimate",
    "restrict_box",
    "NEG_INF",
]

NEG_INF = float("-inf")

_PARAM_ORDER = ("b0", "b1", "a0", "a1", "gamma")

# ridge tie-break in mle_fit: weight (log-likelihood units per unit of
# squared unit-cube distance) and the reference model the tie-break
# shrinks towards on likelihood-flat directions -- zero drift and
# linear volatility, the standard null.  The level parameters a0, a1
# are identified by the data and are not penalized.  The worst-case
# likelihood cost (weight x squared cube diameter) is far below the
# typical in-sample overfit slack of an MLE.
_TIE_BREAK = 0.05
_TIE_BREAK_ANCHOR = {"b0": 0.0, "b1": 0.0, "gamma": 1.0}


@dataclass(frozen=True)
class PriceSeries:
    """Daily closes for one ticker; dt defaults to 1/250 years per step."""

    ticker: str
    dates: np.ndarray   # datetime64[D] or object, strictly increasing
    prices: np.ndarray
    dt: float = 1.0 / 250.0

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        dates = np.asarray(self.dates)
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "dates", dates)
        if prices.ndim != 1 or prices.size != dates.size:
            raise ValueError("dates and prices must be 1-d and equally long")
        if np.any(prices <= 0):
            raise ValueError("prices must be positive")
        if dates.size > 1 and np.any(dates[1:] <= dates[:-1]):
            raise ValueError("dates must be strictly increasing")

    def __len__(self) -> int:
        return self.prices.size

    @classmethod
    def from_csv(cls, path, ticker: Optional[str] = None, dt: float = 1.0 / 250.0):
        """Load ``date,close`` (long) or ``date,TICKER,...`` (wide) CSVs.

        Wide files return a list of series unless ``ticker`` selects one.
        """
        df = pd.read_csv(path, parse_dates=["date"])
        cols = [c for c in df.columns if c != "date"]
        if not cols:
            raise ValueError("CSV needs at least one price column")
        dates = df["date"].to_numpy(dtype="datetime64[D]")
        if cols == ["close"]:
            return cls(ticker or "close", dates, df["close"].to_numpy(), dt)
        if ticker is not None:
            if ticker not in cols:
                raise ValueError(f"ticker {ticker!r} not in CSV columns {cols}")
            return cls(ticker, dates, df[ticker].to_numpy(), dt)
        return [cls(c, dates, df[c].to_numpy(), dt) for c in cols]


def log_likelihood(theta: ParameterPoint, window: np.ndarray, dt: float) -> float:
    """Gaussian Euler-transition log-likelihood of the window.

    Returns -inf (not NaN) when the volatility is nonpositive at any
    observation, which marks the parameter point infeasible.
    """
    x = np.asarray(window, dtype=float)
    if x.size < 2:
        return 0.0
    xi, xn = x[:-1], x[1:]
    base = theta.a0 + theta.a1 * np.maximum(xi, 0.0)
    if np.any(base <= 0.0):
        return NEG_INF
    sig = base ** theta.gamma
    resid = xn - xi - (theta.b0 + theta.b1 * xi) * dt
    terms = -np.log(sig * np.sqrt(2.0 * np.pi * dt)) - (resid / sig) ** 2 / (2.0 * dt)
    return float(np.sum(terms))


@dataclass(frozen=True)
class EstimationConfig:
    """Window layout, optimizer search box, and solver settings."""

    window_length: int = 250
    step: int = 100
    dt: float = 1.0 / 250.0
    search_box: dict = field(default_factory=lambda: {
        "b0": (-5.0, 5.0),
        "b1": (-2.0, 2.0),
        "a0": (1e-4, 10.0),
        "a1": (0.0, 10.0),
        "gamma": (0.1, 2.0),
    })
    frozen: dict = field(default_factory=dict)  # e.g. {"gamma": 1.0}
    n_starts: int = 5
    max_evaluations: int = 2000
    tolerance: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.window_length < 2 or self.step < 1:
            raise ValueError("window length must be >= 2 and step >= 1")
        for name in _PARAM_ORDER:
            if name not in self.search_box:
                raise ValueError(f"search box is missing {name!r}")
        for name, value in self.frozen.items():
            lo, hi = self.search_box[name]
            if not lo <= value <= hi:
                raise ValueError(f"frozen {name}={value} outside search box [{lo}, {hi}]")


def _theta_from_free(free_values, free_names, frozen) -> ParameterPoint:
    vals = dict(zip(free_names, free_values))
    vals.update(frozen)
    return ParameterPoint(vals["b0"], vals["b1"], vals["a0"], vals["a1"], vals["gamma"])


# gamma nodes for the profile stage of mle_fit (clipped to the search box)
_GAMMA_PROFILE = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75)


def mle_fit(window: np.ndarray, config: EstimationConfig) -> tuple[ParameterPoint, float]:
    """Box-constrained likelihood maximization, COBYLA plus simplex polish.

    On short windows the likelihood is exactly flat along volatility
    ridges: any (a0, a1, gamma) with the same sigma(x) over the window's
    x-band fits identically, so a plain maximizer returns an arbitrary
    ridge point -- often at a search-box edge, where extreme gammas make
    the downstream min/max interval aggregation explosive.  Two measures
    make the returned ridge representative canonical and reproducible:

    - gamma is profiled over a fixed grid (each node is a well-behaved
      4-parameter fit), then released for a final polish;
    - a small tie-break penalty towards the null model (zero drift,
      gamma = 1) resolves exactly-flat directions.  The returned
      log-likelihood is always the true, unpenalized value.

    Starts per stage are the search-box midpoint plus jittered copies
    (deliberately local, for the same ridge reasons); the result is
    never worse, in true likelihood, than the best starting point.
    """
    window = np.asarray(window, dtype=float)
    if window.size < 2:
        raise ValueError("need at least two observations")

    full_span = {n: config.search_box[n][1] - config.search_box[n][0]
                 for n in _PARAM_ORDER}

    def penalty(theta: ParameterPoint) -> float:
        p = 0.0
        for name, target in _TIE_BREAK_ANCHOR.items():
            p += ((getattr(theta, name) - target) / max(full_span[name], 1e-12)) ** 2
        return _TIE_BREAK * p

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(
        entropy=(config.seed, len(window), int(window[0] * 1e6) % (2 ** 31)))))

    def solve(frozen: dict, n_starts: int, start_theta=None):
        """One multi-start penalized maximization with `frozen` pinned.

        Returns (theta, penalized objective); objective is +inf when
        every start is infeasible.
        """
        free_names = [n for n in _PARAM_ORDER if n not in frozen]
        if not free_names:
            theta = _theta_from_free([], [], frozen)
            ll = log_likelihood(theta, window, config.dt)
            return theta, (np.inf if ll == NEG_INF else -ll + penalty(theta))
        lo = np.array([config.search_box[n][0] for n in free_names])
        hi = np.array([config.search_box[n][1] for n in free_names])
        span = hi - lo

        # optimize on the unit cube so the single COBYLA trust-region
        # radius fits every coordinate regardless of search-box scales
        def to_theta(u) -> ParameterPoint:
            v = lo + span * np.clip(u, 0.0, 1.0)
            return _theta_from_free(v, free_names, frozen)

        def objective(u) -> float:
            theta = to_theta(u)
            ll = log_likelihood(theta, window, config.dt)
            return 1e12 if ll == NEG_INF else -ll + penalty(theta)

        if start_theta is not None:
            vals = np.array([getattr(start_theta, n) for n in free_names])
            starts = [np.clip((vals - lo) / np.where(span > 0, span, 1.0), 0.0, 1.0)]
        else:
            starts = [np.full(len(free_names), 0.5)]
        for _ in range(max(0, n_starts - len(starts))):
            jitter = rng.uniform(-0.15, 0.15, len(free_names))
            starts.append(np.clip(0.5 + jitter, 0.0, 1.0))

        constraints = []
        for i in range(len(free_names)):
            constraints.append({"type": "ineq", "fun": lambda u, i=i: u[i]})
            constraints.append({"type": "ineq", "fun": lambda u, i=i: 1.0 - u[i]})

        best_u, best_obj = None, np.inf
        for start in starts:
            if objective(start) < best_obj:
                best_obj, best_u = objective(start), start
            u = start
            # coarse solve, then a refinement pass from the incumbent
            for rhobeg in (0.25, 0.02):
                res = minimize(
                    objective, u, method="COBYLA", constraints=constraints,
                    options={"maxiter": config.max_evaluations,
                             "tol": config.tolerance, "rhobeg": rhobeg},
                )
                u = np.clip(res.x, 0.0, 1.0)
            # COBYLA's linear models stall on curved valleys; a simplex
            # polish with box projection finishes the climb
            res = minimize(
                objective, u, method="Nelder-Mead",
                options={"maxiter": config.max_evaluations,
                         "xatol": 1e-10, "fatol": 1e-12},
            )
            u = np.clip(res.x, 0.0, 1.0)
            val = objective(u)
            if val < best_obj:
                best_obj, best_u = val, u
        if best_u is None or best_obj >= 1e12:
            return None, np.inf
        return to_theta(best_u), best_obj

    if "gamma" in config.frozen:
        best_theta, best_obj = solve(config.frozen, config.n_starts)
    else:
        glo, ghi = config.search_box["gamma"]
        best_theta, best_obj = None, np.inf
        for g in _GAMMA_PROFILE:
            g = min(max(g, glo), ghi)
            theta, obj = solve({**config.frozen, "gamma": g}, n_starts=2)
            if obj < best_obj:
                best_theta, best_obj = theta, obj
        if best_theta is not None:
            theta, obj = solve(config.frozen, n_starts=1, start_theta=best_theta)
            if obj < best_obj:
                best_theta, best_obj = theta, obj

    if best_theta is None or not np.isfinite(best_obj):
        raise RuntimeError("all optimizer starts were infeasible")
    return best_theta, log_likelihood(best_theta, window, config.dt)


@dataclass
class ThetaHat:
    """Per-parameter [min, max] over rolling estimates, with provenance."""

    intervals: dict  # name -> (lo, hi)
    provenance: list  # (window_end_index, window_end_date, ParameterPoint, ll)
    failed_windows: list = field(default_factory=list)

    def to_box(self, state_space: str = "RealLine") -> ParameterBox:
        iv = self.intervals
        return ParameterBox(
            b0_range=tuple(iv["b0"]),
            b1_range=tuple(iv["b1"]),
            a0_range=tuple(iv["a0"]),
            a1_range=tuple(iv["a1"]),
            gamma_range=tuple(iv["gamma"]),
            state_space=state_space,
        )

    def last_estimate(self) -> ParameterPoint:
        if not self.provenance:
            raise ValueError("no successful windows")
        return self.provenance[-1][2]

    def to_json(self) -> str:
        prov = [
            {
                "window_end_index": int(end),
                "window_end_date": str(date),
                "estimate": {n: getattr(theta, n) for n in _PARAM_ORDER},
                "log_likelihood": ll,
            }
            for end, date, theta, ll in self.provenance
        ]
        return json.dumps(
            {
                "intervals": {k: list(v) for k, v in self.intervals.items()},
                "provenance": prov,
                "failed_windows": self.failed_windows,
            },
            sort_keys=True,
            indent=2,
        )


def rolling_estimate(series: PriceSeries, config: EstimationConfig) -> ThetaHat:
    """Estimate on windows ending at W, W+S, W+2S, ... and aggregate.

    Failed windows are recorded and skipped; at least one window must
    succeed.
    """
    n = len(series)
    w, s = config.window_length, config.step
    if n < w:
        raise ValueError(f"series length {n} shorter than window {w}")
    provenance, failures = [], []
    for end in range(w, n + 1, s):
        window = series.prices[end - w : end]
        try:
            theta, ll = mle_fit(window, config)
        except RuntimeError as exc:
            failures.append({"window_end_index": end, "reason": str(exc)})
            continue
        provenance.append((end, series.dates[end - 1], theta, ll))
    if not provenance:
        raise RuntimeError("every estimation window failed")
    intervals = {}
    for name in _PARAM_ORDER:
        vals = [getattr(theta, name) for _, _, theta, _ in provenance]
        intervals[name] = (min(vals), max(vals))
    return ThetaHat(intervals=intervals, provenance=provenance, failed_windows=failures)


def restrict_box(box: ParameterBox, frozen: dict) -> ParameterBox:
    """Collapse the listed parameters to fixed values inside their intervals."""
    ranges = dict(box.ranges)
    for name, value in frozen.items():
        if name not in ranges:
            raise ValueError(f"unknown parameter {name!r}")
        lo, hi = ranges[name]
        if not lo <= value <= hi:
            raise ValueError(f"frozen {name}={value} outside interval [{lo}, {hi}]")
        ranges[name] = (float(value), float(value))
    return ParameterBox(
        b0_range=ranges["b0"],
        b1_range=ranges["b1"],
        a0_range=ranges["a0"],
        a1_range=ranges["a1"],
        gamma_range=ranges["gamma"],
        state_space=box.state_space,
    )

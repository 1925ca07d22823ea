"""Payoff functionals on discretized paths.

Covers vanilla calls/puts, the butterfly combination, a lookback call
monitored on the full discrete grid (initial value included), and an
arithmetic-average Asian put whose average excludes the initial value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = ["PayoffSpec", "call", "put", "butterfly", "lookback_call", "asian_put"]

_KINDS = ("call", "put", "butterfly", "lookback_call", "asian_put")


@dataclass(frozen=True)
class PayoffSpec:
    """Payoff descriptor; use the module-level constructors."""

    kind: str
    strike: Optional[float] = None
    strikes: Optional[tuple[float, float, float]] = None
    observations: Optional[int] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown payoff kind {self.kind!r}")
        if self.kind == "butterfly":
            k1, k2, k3 = self.strikes
            if not (k1 < k2 < k3):
                raise ValueError(f"butterfly strikes must increase: {self.strikes}")
        elif self.kind == "asian_put":
            if self.observations is None or self.observations < 1:
                raise ValueError("asian_put needs a positive observation count")
        elif self.strike is None:
            raise ValueError(f"{self.kind} needs a strike")

    @property
    def path_dependent(self) -> bool:
        return self.kind in ("lookback_call", "asian_put")

    def evaluate(self, path: np.ndarray) -> float:
        return float(self.evaluate_batch(np.asarray(path, dtype=float)[None, :])[0])

    def evaluate_batch(self, paths: np.ndarray) -> np.ndarray:
        """Vectorized payoff over a (B, n+1) matrix of path states."""
        paths = np.asarray(paths, dtype=float)
        if paths.ndim != 2 or paths.shape[1] < 1:
            raise ValueError("paths must be a nonempty (B, n+1) matrix")
        xT = paths[:, -1]
        if self.kind == "call":
            return np.maximum(xT - self.strike, 0.0)
        if self.kind == "put":
            return np.maximum(self.strike - xT, 0.0)
        if self.kind == "butterfly":
            k1, k2, k3 = self.strikes
            return (
                np.maximum(xT - k1, 0.0)
                + np.maximum(xT - k3, 0.0)
                - 2.0 * np.maximum(xT - k2, 0.0)
            )
        if self.kind == "lookback_call":
            return np.maximum(paths.max(axis=1) - self.strike, 0.0)
        # asian_put: average the m observations after the initial value
        m = self.observations
        if paths.shape[1] - 1 < m:
            raise ValueError(
                f"asian_put needs {m} post-initial observations, path has {paths.shape[1] - 1}"
            )
        avg = paths[:, 1 : m + 1].mean(axis=1)
        return np.maximum(self.strike - avg, 0.0)

    def terminal_function(self) -> Optional[Callable[[np.ndarray], np.ndarray]]:
        """The map x -> payoff at terminal value x, or None if path dependent.

        Only path-independent payoffs have one; it is what the PDE
        pricer uses as terminal condition.
        """
        if self.path_dependent:
            return None
        if self.kind == "call":
            k = self.strike
            return lambda x: np.maximum(np.asarray(x, dtype=float) - k, 0.0)
        if self.kind == "put":
            k = self.strike
            return lambda x: np.maximum(k - np.asarray(x, dtype=float), 0.0)
        k1, k2, k3 = self.strikes
        return lambda x: (
            np.maximum(np.asarray(x, dtype=float) - k1, 0.0)
            + np.maximum(np.asarray(x, dtype=float) - k3, 0.0)
            - 2.0 * np.maximum(np.asarray(x, dtype=float) - k2, 0.0)
        )

    def lipschitz_bound(self) -> float:
        """Finite Lipschitz constant of the terminal function."""
        if self.kind in ("call", "put"):
            return 1.0
        if self.kind == "butterfly":
            return 2.0
        if self.kind == "lookback_call":
            return 1.0  # w.r.t. the sup norm on paths
        return 1.0

    def to_dict(self) -> dict:
        if self.kind == "butterfly":
            return {"kind": "butterfly", "k": list(self.strikes)}
        if self.kind == "asian_put":
            return {"kind": "asian_put", "strike": self.strike, "observations": self.observations}
        return {"kind": self.kind, "strike": self.strike}

    @classmethod
    def from_dict(cls, d: dict) -> "PayoffSpec":
        kind = d.get("kind")
        if kind == "butterfly":
            k = d.get("k") or d.get("strikes")
            if k is None or len(k) != 3:
                raise ValueError("butterfly config needs a 3-element 'k' list")
            return butterfly(*k)
        if kind == "asian_put":
            return asian_put(d["strike"], d["observations"])
        if kind == "lookback_call":
            return lookback_call(d["strike"])
        if kind in ("call", "put"):
            return cls(kind=kind, strike=float(d["strike"]))
        raise ValueError(f"unknown payoff kind {kind!r}")


def call(strike: float) -> PayoffSpec:
    return PayoffSpec(kind="call", strike=float(strike))


def put(strike: float) -> PayoffSpec:
    return PayoffSpec(kind="put", strike=float(strike))


def butterfly(k1: float, k2: float, k3: float) -> PayoffSpec:
    return PayoffSpec(kind="butterfly", strikes=(float(k1), float(k2), float(k3)))


def lookback_call(strike: float) -> PayoffSpec:
    return PayoffSpec(kind="lookback_call", strike=float(strike))


def asian_put(strike: float, observations: int) -> PayoffSpec:
    return PayoffSpec(kind="asian_put", strike=float(strike), observations=int(observations))

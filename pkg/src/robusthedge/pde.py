"""Robust price bounds via the worst-case Kolmogorov equation.

The upper price bound solves, backward from the terminal payoff,

    du/dt + G(x, du/dx, d2u/dx2) = 0,
    G(x, p, q) = sup over the box of (b0 + b1 x) p + (a0 + a1 x^+)^(2 gamma) q / 2,

discretized with central differences and explicit time stepping.  The
lower bound replaces the supremum by the infimum.  Because the
objective is affine in (b0, b1), monotone in a0, a1 (the base is
nonnegative) and monotone in gamma for a fixed base, the extremum is
always attained at one of the 32 interval-endpoint corners.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import ParameterBox, validate_box
from .payoffs import PayoffSpec

__all__ = [
    "UPPER",
    "LOWER",
    "PdeConfig",
    "PdeGrid",
    "generator_extremum",
    "max_squared_diffusion",
    "solve_pde",
    "price_bounds",
]

UPPER = "upper"
LOWER = "lower"

BOUNDARY_LINEAR = "second_derivative_zero"
BOUNDARY_DIRICHLET = "dirichlet_payoff"


def generator_extremum(box: ParameterBox, x, p, q, direction: str = UPPER):
    """Exact sup (or inf) of the generator over the box by corner enumeration.

    Accepts scalars or broadcastable arrays for x, p, q.
    """
    if direction not in (UPPER, LOWER):
        raise ValueError(f"direction must be '{UPPER}' or '{LOWER}'")
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    xp = np.maximum(x, 0.0)
    best = None
    for b0, b1, a0, a1, gam in box.corners():
        base = a0 + a1 * xp
        if np.any(base < 0):
            raise ValueError(f"negative diffusion base at corner (a0={a0}, a1={a1})")
        val = (b0 + b1 * x) * p + 0.5 * base ** (2.0 * gam) * q
        if best is None:
            best = val
        else:
            best = np.maximum(best, val) if direction == UPPER else np.minimum(best, val)
    return best


def max_squared_diffusion(box: ParameterBox, x) -> np.ndarray:
    """max over the box of (a0 + a1 x^+)^(2 gamma), per grid node."""
    xp = np.maximum(np.asarray(x, dtype=float), 0.0)
    best = None
    for _, _, a0, a1, gam in box.corners():
        val = (a0 + a1 * xp) ** (2.0 * gam)
        best = val if best is None else np.maximum(best, val)
    return best


@dataclass(frozen=True)
class PdeConfig:
    """Spatial/temporal discretization controls.

    When ``x_lo``/``x_hi`` are omitted the domain is centered at the
    spot with half-width 8 * sqrt(T) * (worst-case volatility at the
    spot), clipped to the state space.
    """

    n_space: int = 400
    x_lo: Optional[float] = None
    x_hi: Optional[float] = None
    cfl_safety: float = 0.9
    auto_shrink_dt: bool = True
    boundary: str = BOUNDARY_LINEAR
    max_stored_slices: int = 101

    def __post_init__(self):
        if self.n_space < 4:
            raise ValueError("need at least 4 spatial intervals")
        if not (0 < self.cfl_safety <= 1):
            raise ValueError("cfl_safety must be in (0, 1]")
        if self.boundary not in (BOUNDARY_LINEAR, BOUNDARY_DIRICHLET):
            raise ValueError(f"unknown boundary policy {self.boundary!r}")


@dataclass
class PdeGrid:
    """Solved value surface on the discretization (subsampled in time)."""

    x: np.ndarray          # (m+1,) spatial nodes
    t_slices: np.ndarray   # stored time levels, increasing, t_slices[0] == 0
    values: np.ndarray     # (len(t_slices), m+1); values[0] is u(0, .)
    direction: str
    n_time_steps: int
    dt: float
    boundary: str

    def value_at(self, x0: float, t: float = 0.0) -> float:
        """Linear interpolation in x on the stored slice closest to t."""
        k = int(np.argmin(np.abs(self.t_slices - t)))
        if x0 < self.x[0] or x0 > self.x[-1]:
            raise ValueError(f"x0 = {x0} outside the PDE domain [{self.x[0]}, {self.x[-1]}]")
        return float(np.interp(x0, self.x, self.values[k]))

    def write_surface_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,x,u\n")
            for k, t in enumerate(self.t_slices):
                for j, xj in enumerate(self.x):
                    fh.write(f"{float(t)!r},{float(xj)!r},{float(self.values[k, j])!r}\n")


def _default_domain(box: ParameterBox, x0: float, maturity: float) -> tuple[float, float]:
    sigma_bar = float(np.sqrt(max_squared_diffusion(box, np.asarray([x0]))[0]))
    half_width = 8.0 * sigma_bar * np.sqrt(maturity)
    half_width = max(half_width, 1e-3 * max(abs(x0), 1.0))
    lo, hi = x0 - half_width, x0 + half_width
    if box.state_space != "RealLine":
        lo = max(lo, 0.0)
    return lo, hi


def solve_pde(
    box: ParameterBox,
    spec: PayoffSpec,
    x0: float,
    maturity: float,
    config: PdeConfig = PdeConfig(),
    direction: str = UPPER,
) -> PdeGrid:
    """Explicit backward time stepping of the worst-case pricing PDE."""
    report = validate_box(box)
    if not report.ok:
        raise ValueError(f"parameter box is invalid: {report.violations}")
    psi = spec.terminal_function()
    if psi is None:
        raise ValueError(f"{spec.kind} is path dependent; the PDE pricer needs a terminal payoff")

    if config.x_lo is not None and config.x_hi is not None:
        lo, hi = config.x_lo, config.x_hi
    else:
        lo, hi = _default_domain(box, x0, maturity)
    if not lo < hi:
        raise ValueError(f"empty spatial domain [{lo}, {hi}]")

    m = config.n_space
    x = np.linspace(lo, hi, m + 1)
    dx = x[1] - x[0]

    a_max = float(max_squared_diffusion(box, x).max())
    dt_stable = config.cfl_safety * dx * dx / max(a_max, 1e-300)
    n_t = max(1, int(np.ceil(maturity / dt_stable)))
    if maturity / n_t > dt_stable and not config.auto_shrink_dt:
        raise ValueError("time step violates the CFL stability bound")
    dt = maturity / n_t
    if n_t > 2_000_000:
        warnings.warn(f"CFL bound forces {n_t} time steps; consider a narrower domain")

    u = psi(x).astype(float)
    terminal = u.copy()

    n_stored = min(config.max_stored_slices, n_t + 1)
    store_at = set(np.unique(np.linspace(0, n_t, n_stored).astype(int)))
    stored: dict[int, np.ndarray] = {n_t: terminal.copy()}

    # The generator splits into a drift part depending on (b0, b1) only
    # and a diffusion part depending on (a0, a1, gamma) only, so the
    # extremum over the joint box is the sum of blockwise extrema.
    # Precompute the per-node corner coefficients once.
    xi = x[1:-1]
    xip = np.maximum(xi, 0.0)
    drift_corners = np.stack([
        b0 + b1 * xi
        for b0 in box.b0_range for b1 in box.b1_range
    ])  # (4, m-1)
    diff_corners = np.stack([
        0.5 * (a0 + a1 * xip) ** (2.0 * gam)
        for a0 in box.a0_range for a1 in box.a1_range for gam in box.gamma_range
    ])  # (8, m-1)
    if np.any(diff_corners < 0) or np.any(np.isnan(diff_corners)):
        raise ValueError("negative diffusion base on the grid; box/domain mismatch")
    reduce_ = np.max if direction == UPPER else np.min

    for k in range(n_t - 1, -1, -1):
        p = (u[2:] - u[:-2]) / (2.0 * dx)
        q = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (dx * dx)
        gen = reduce_(drift_corners * p, axis=0) + reduce_(diff_corners * q, axis=0)
        new = np.empty_like(u)
        new[1:-1] = u[1:-1] + dt * gen
        if config.boundary == BOUNDARY_LINEAR:
            new[0] = 2.0 * new[1] - new[2]
            new[-1] = 2.0 * new[-2] - new[-3]
        else:
            new[0] = terminal[0]
            new[-1] = terminal[-1]
        u = new
        if k in store_at:
            stored[k] = u.copy()

    ks = sorted(stored)
    return PdeGrid(
        x=x,
        t_slices=np.array([k * dt for k in ks]),
        values=np.stack([stored[k] for k in ks]),
        direction=direction,
        n_time_steps=n_t,
        dt=dt,
        boundary=config.boundary,
    )


def price_bounds(
    box: ParameterBox,
    spec: PayoffSpec,
    x0: float,
    maturity: float,
    config: PdeConfig = PdeConfig(),
) -> dict:
    """Robust lower/upper prices at (t=0, x0), plus the grid metadata."""
    lower = solve_pde(box, spec, x0, maturity, config, LOWER)
    upper = solve_pde(box, spec, x0, maturity, config, UPPER)
    return {
        "x0": float(x0),
        "lower": lower.value_at(x0),
        "upper": upper.value_at(x0),
        "grid": {
            "x_lo": float(lower.x[0]),
            "x_hi": float(lower.x[-1]),
            "n_space": int(lower.x.size - 1),
            "n_time_steps_lower": lower.n_time_steps,
            "n_time_steps_upper": upper.n_time_steps,
            "boundary": config.boundary,
        },
    }

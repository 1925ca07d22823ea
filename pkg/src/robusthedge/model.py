"""Generalized affine diffusions under interval parameter uncertainty.

The model is the one-dimensional SDE

    dX = (b0 + b1 X) dt + (a0 + a1 X^+)^gamma dW,

where each of the five coefficients is only known to lie in a closed
interval.  This module provides the parameter types, interval-box
validation, and an Euler-Maruyama sampler that redraws the coefficients
uniformly from the box at every time step of every path.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import ndtri

__all__ = [
    "ParameterPoint",
    "ParameterBox",
    "TimeGrid",
    "RngSpec",
    "StepDraws",
    "PathBatch",
    "ValidationReport",
    "validate_box",
    "drift",
    "diffusion",
    "euler_step",
    "sample_paths",
    "write_paths_csv",
    "write_paths_binary",
    "read_paths_binary",
]

REAL_LINE = "RealLine"
POSITIVE_HALF_LINE = "PositiveHalfLine"

# classification levels returned by validate_box
THEORY_PROPER = "theory_proper"
ADMISSIBLE = "admissible"
INVALID = "invalid"


@dataclass(frozen=True)
class ParameterPoint:
    """One concrete coefficient vector (b0, b1, a0, a1, gamma)."""

    b0: float
    b1: float
    a0: float
    a1: float
    gamma: float

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")

    def as_array(self) -> np.ndarray:
        return np.array([self.b0, self.b1, self.a0, self.a1, self.gamma])


@dataclass(frozen=True)
class ParameterBox:
    """Closed intervals for the five coefficients plus a state-space tag.

    Degenerate intervals (lo == hi) encode a fixed parameter; a box that
    is degenerate in every coordinate behaves exactly like a single
    ``ParameterPoint``.
    """

    b0_range: tuple[float, float]
    b1_range: tuple[float, float]
    a0_range: tuple[float, float]
    a1_range: tuple[float, float]
    gamma_range: tuple[float, float]
    state_space: str = REAL_LINE

    def __post_init__(self):
        for name in ("b0_range", "b1_range", "a0_range", "a1_range", "gamma_range"):
            lo, hi = getattr(self, name)
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise ValueError(f"{name} must be finite, got [{lo}, {hi}]")
            if lo > hi:
                raise ValueError(f"{name} has lo > hi: [{lo}, {hi}]")
        if self.state_space not in (REAL_LINE, POSITIVE_HALF_LINE):
            raise ValueError(f"unknown state space {self.state_space!r}")

    @property
    def ranges(self) -> dict[str, tuple[float, float]]:
        return {
            "b0": self.b0_range,
            "b1": self.b1_range,
            "a0": self.a0_range,
            "a1": self.a1_range,
            "gamma": self.gamma_range,
        }

    def is_degenerate(self) -> bool:
        return all(lo == hi for lo, hi in self.ranges.values())

    def midpoint(self) -> ParameterPoint:
        mids = {k: 0.5 * (lo + hi) for k, (lo, hi) in self.ranges.items()}
        return ParameterPoint(
            mids["b0"], mids["b1"], mids["a0"], mids["a1"], mids["gamma"]
        )

    def contains(self, theta: ParameterPoint) -> bool:
        vals = {
            "b0": theta.b0,
            "b1": theta.b1,
            "a0": theta.a0,
            "a1": theta.a1,
            "gamma": theta.gamma,
        }
        return all(
            lo <= vals[k] <= hi for k, (lo, hi) in self.ranges.items()
        )

    def corners(self) -> np.ndarray:
        """All 32 interval-endpoint combinations, shape (32, 5)."""
        grids = np.meshgrid(
            *[np.array(r) for r in (
                self.b0_range, self.b1_range, self.a0_range,
                self.a1_range, self.gamma_range,
            )],
            indexing="ij",
        )
        return np.stack([g.ravel() for g in grids], axis=1)


@dataclass(frozen=True)
class TimeGrid:
    """Ordered time points 0 = t_0 <= ... <= t_n = T, in years."""

    t: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        object.__setattr__(self, "t", t)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("time grid needs at least two points")
        if t[0] != 0.0:
            raise ValueError("time grid must start at 0")
        dt = np.diff(t)
        if np.any(dt < 0):
            raise ValueError("time grid must be nondecreasing")
        if not np.any(dt > 0):
            raise ValueError("time grid needs at least one positive step")

    @classmethod
    def uniform(cls, maturity: float, n_steps: int) -> "TimeGrid":
        return cls(np.linspace(0.0, maturity, n_steps + 1))

    @property
    def n_steps(self) -> int:
        return self.t.size - 1

    @property
    def maturity(self) -> float:
        return float(self.t[-1])

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.t)


@dataclass(frozen=True)
class RngSpec:
    """Seed plus stream id; (seed, stream, path) keys a per-path stream.

    Streams are derived through ``numpy.random.SeedSequence`` with the
    tuple as entropy, so path p's draws do not depend on how the batch
    is partitioned or on the number of paths requested.
    """

    seed: int
    stream: int = 0

    def path_generator(self, path_index: int) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=(self.seed, self.stream, path_index))
        return np.random.Generator(np.random.Philox(ss))

    def with_stream(self, stream: int) -> "RngSpec":
        return RngSpec(self.seed, stream)


@dataclass(frozen=True)
class StepDraws:
    """Per-step draws recorded for audit/replay, each of shape (B, n)."""

    dW: np.ndarray
    b0: np.ndarray
    b1: np.ndarray
    a0: np.ndarray
    a1: np.ndarray
    gamma: np.ndarray


@dataclass(frozen=True)
class PathBatch:
    """A batch of simulated trajectories on a common time grid."""

    grid: TimeGrid
    x0: float
    paths: np.ndarray  # (B, n+1)
    draws: Optional[StepDraws] = None

    def __post_init__(self):
        if self.paths.ndim != 2 or self.paths.shape[1] != self.grid.t.size:
            raise ValueError("paths shape does not match the time grid")

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.paths, axis=1)


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of checking a ParameterBox against the state-space rules."""

    status: str  # THEORY_PROPER | ADMISSIBLE | INVALID
    condition: Optional[str] = None  # which proper-state-space condition held
    violations: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()
    flags: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        """At least numerically admissible (samplers accept this)."""
        return self.status != INVALID


def validate_box(box: ParameterBox) -> ValidationReport:
    """Classify a parameter box as theory-proper, admissible, or invalid.

    Theory-proper boxes satisfy one of the proper-state-space conditions:

    (i)   real line, min a0 > 0 (and gamma within [1/2, 1]);
    (ii)  positive half line, gamma = 1/2, min b0 > 0, min a0 > 0,
          min b0 > max a1 / 2;
    (iii) positive half line, 1/2 < gamma <= 1, min b0 > 0, a0 fixed at
          0, min a1 > 0.

    Boxes that fail the theory conditions but keep the diffusion base
    a0 + a1 x^+ nonnegative everywhere are flagged admissible (this
    includes gamma above 1, which is used numerically, and the
    degenerate Black-Scholes box).  On the positive half line a box
    that satisfies no proper condition can exit the state space and is
    reported invalid.
    """
    b0 = box.b0_range
    a0 = box.a0_range
    a1 = box.a1_range
    g = box.gamma_range

    violations: list[str] = []
    warnings: list[str] = []
    flags: list[str] = []

    if g[0] < 0:
        violations.append(f"gamma lower bound {g[0]} is negative")
    # the base a0 + a1*x^+ ranges over x^+ in [0, inf): both coefficients
    # must stay nonnegative or the volatility can turn complex
    if a0[0] < 0:
        violations.append(f"a0 lower bound {a0[0]} allows a negative diffusion base at x <= 0")
    if a1[0] < 0:
        violations.append(f"a1 lower bound {a1[0]} allows a negative diffusion base for large x")

    if g[1] > 1.0:
        warnings.append(
            f"gamma upper bound {g[1]} exceeds 1; outside the theory range but numerically admissible"
        )

    is_bs = (
        box.is_degenerate()
        and b0[0] == 0.0
        and a0[0] == 0.0
        and g[0] == 1.0
        and a1[0] > 0.0
    )
    if is_bs:
        flags.append("black_scholes_degenerate")

    if box.state_space == REAL_LINE:
        if violations:
            return ValidationReport(INVALID, None, tuple(violations), tuple(warnings), tuple(flags))
        if a0[0] > 0.0 and 0.5 <= g[0] and g[1] <= 1.0:
            return ValidationReport(THEORY_PROPER, "i", (), tuple(warnings), tuple(flags))
        return ValidationReport(ADMISSIBLE, None, (), tuple(warnings), tuple(flags))

    # positive half line: one of the proper conditions must hold
    cond_ii_viol: list[str] = []
    if not (g[0] == 0.5 and g[1] == 0.5):
        cond_ii_viol.append("gamma not fixed at 1/2")
    if not b0[0] > 0.0:
        cond_ii_viol.append("min b0 not positive")
    if not a0[0] > 0.0:
        cond_ii_viol.append("min a0 not positive")
    if not b0[0] > a1[1] / 2.0:
        cond_ii_viol.append(f"min b0 = {b0[0]} <= max a1 / 2 = {a1[1] / 2.0}")

    cond_iii_viol: list[str] = []
    if not (0.5 < g[0] and g[1] <= 1.0):
        cond_iii_viol.append("gamma not within (1/2, 1]")
    if not b0[0] > 0.0:
        cond_iii_viol.append("min b0 not positive")
    if not (a0[0] == 0.0 and a0[1] == 0.0):
        cond_iii_viol.append("a0 not fixed at 0")
    if not a1[0] > 0.0:
        cond_iii_viol.append("min a1 not positive")

    if not violations and not cond_ii_viol:
        return ValidationReport(THEORY_PROPER, "ii", (), tuple(warnings), tuple(flags))
    if not violations and not cond_iii_viol:
        return ValidationReport(THEORY_PROPER, "iii", (), tuple(warnings), tuple(flags))

    violations.extend("condition (ii): " + v for v in cond_ii_viol)
    violations.extend("condition (iii): " + v for v in cond_iii_viol)
    return ValidationReport(INVALID, None, tuple(violations), tuple(warnings), tuple(flags))


def drift(x, theta: ParameterPoint):
    """Drift coefficient b0 + b1 x."""
    return theta.b0 + theta.b1 * np.asarray(x, dtype=float)


def diffusion(x, theta: ParameterPoint):
    """Volatility coefficient (a0 + a1 x^+)^gamma.

    Note the exponent is gamma; the squared coefficient with exponent
    2*gamma only enters the Markov generator.
    """
    base = theta.a0 + theta.a1 * np.maximum(np.asarray(x, dtype=float), 0.0)
    if np.any(base < 0):
        raise ValueError(
            f"negative diffusion base a0 + a1*x^+ = {np.min(base)} for theta {theta}"
        )
    return base ** theta.gamma


def euler_step(x, theta: ParameterPoint, dt: float, dW):
    """One Euler-Maruyama update; the output state is not clamped."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    return x + drift(x, theta) * dt + diffusion(x, theta) * np.asarray(dW)


ROBUST = "robust"
FIXED = "fixed"

# tiny offsets keeping the uniform-to-normal transform finite
_U_LO = np.nextafter(0.0, 1.0)
_U_HI = np.nextafter(1.0, 0.0)


def sample_paths(
    box: ParameterBox,
    x0: float,
    grid: TimeGrid,
    n_paths: int,
    rng: RngSpec,
    mode: str = ROBUST,
    theta: Optional[ParameterPoint] = None,
    record_draws: bool = False,
) -> PathBatch:
    """Simulate Euler-Maruyama paths with per-step uniform coefficient draws.

    In ``robust`` mode an independent coefficient vector is drawn
    uniformly from ``box`` at every time step of every path; in
    ``fixed`` mode the supplied ``theta`` is used throughout.  Both
    modes consume the same underlying uniform stream layout, so a fixed
    run with a degenerate box coincides path-for-path with the robust
    run under the same RngSpec.

    Per step the stream is consumed in the order
    (dW, gamma, a0, a1, b0, b1); dW is obtained from the first uniform
    through the inverse normal CDF, scaled by sqrt(dt).
    """
    report = validate_box(box)
    if not report.ok:
        raise ValueError(f"parameter box is invalid: {report.violations}")
    if n_paths < 1:
        raise ValueError("need at least one path")
    if mode not in (ROBUST, FIXED):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == FIXED:
        if theta is None:
            raise ValueError("fixed mode requires a ParameterPoint")
    elif theta is not None:
        raise ValueError("robust mode does not take a theta")

    n = grid.n_steps
    dt = grid.dt

    u = np.empty((n_paths, n, 6))
    for b in range(n_paths):
        u[b] = rng.path_generator(b).random((n, 6))

    dW = ndtri(np.clip(u[:, :, 0], _U_LO, _U_HI)) * np.sqrt(dt)

    if mode == ROBUST:
        def stretch(slot, rng_pair):
            lo, hi = rng_pair
            return lo + (hi - lo) * u[:, :, slot]

        gam = stretch(1, box.gamma_range)
        a0 = stretch(2, box.a0_range)
        a1 = stretch(3, box.a1_range)
        b0 = stretch(4, box.b0_range)
        b1 = stretch(5, box.b1_range)
    else:
        shape = (n_paths, n)
        gam = np.full(shape, theta.gamma)
        a0 = np.full(shape, theta.a0)
        a1 = np.full(shape, theta.a1)
        b0 = np.full(shape, theta.b0)
        b1 = np.full(shape, theta.b1)

    paths = np.empty((n_paths, n + 1))
    paths[:, 0] = x0
    for i in range(n):
        x = paths[:, i]
        base = a0[:, i] + a1[:, i] * np.maximum(x, 0.0)
        paths[:, i + 1] = (
            x
            + (b0[:, i] + b1[:, i] * x) * dt[i]
            + base ** gam[:, i] * dW[:, i]
        )

    draws = None
    if record_draws:
        draws = StepDraws(dW=dW, b0=b0, b1=b1, a0=a0, a1=a1, gamma=gam)
    return PathBatch(grid=grid, x0=float(x0), paths=paths, draws=draws)


def write_paths_csv(batch: PathBatch, path) -> None:
    """Columnar dump with header ``t,path_id,x``."""
    with open(path, "w") as fh:
        fh.write("t,path_id,x\n")
        t = batch.grid.t
        for b in range(batch.n_paths):
            for j in range(t.size):
                fh.write(f"{float(t[j])!r},{b},{float(batch.paths[b, j])!r}\n")


_BIN_MAGIC = b"RHPB"
_BIN_VERSION = 1


def write_paths_binary(batch: PathBatch, path, seed: int = 0) -> None:
    """Compact dump: header (n, B, x0, seed), then row-major f64 states.

    The time grid is stored after the header so nonuniform grids round
    trip as well.
    """
    n = batch.grid.n_steps
    with open(path, "wb") as fh:
        fh.write(_BIN_MAGIC)
        fh.write(struct.pack("<IQQdq", _BIN_VERSION, n, batch.n_paths, batch.x0, seed))
        fh.write(batch.grid.t.astype("<f8").tobytes())
        fh.write(np.ascontiguousarray(batch.paths, dtype="<f8").tobytes())


def read_paths_binary(path) -> tuple[PathBatch, int]:
    with open(path, "rb") as fh:
        if fh.read(4) != _BIN_MAGIC:
            raise ValueError("not a path-batch file")
        version, n, n_paths, x0, seed = struct.unpack("<IQQdq", fh.read(36))
        if version != _BIN_VERSION:
            raise ValueError(f"unsupported version {version}")
        t = np.frombuffer(fh.read(8 * (n + 1)), dtype="<f8")
        flat = np.frombuffer(fh.read(8 * n_paths * (n + 1)), dtype="<f8")
    paths = flat.reshape(n_paths, n + 1).copy()
    return PathBatch(grid=TimeGrid(t.copy()), x0=x0, paths=paths), seed

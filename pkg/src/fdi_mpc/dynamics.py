"""Plant models for the closed loop.

The only shipped plant is the pair of coupled tanks: a pump fills tank 1,
tank 1 drains into tank 2 and tank 2 drains back to the reservoir. Levels
are normalized heights in ``[0, 1]`` and the pump command is a fraction of
full flow.

States and inputs are plain 1-D float arrays. The helpers :func:`as_state`
and :func:`as_input` validate length and finiteness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

#: Floor on the square-root argument when differentiating.
SQRT_EPS = 1e-9

ALPHA1 = 1.75
ALPHA2 = 0.1544
SAMPLE_TIME = 0.1


def _as_vector(values, size: int, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.size != size:
        raise ValueError(f"{what} must have length {size}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite entries: {arr}")
    return arr


def as_state(values, n: int = 2) -> np.ndarray:
    """Return ``values`` as a validated state vector of length ``n``."""
    return _as_vector(values, n, "state")


def as_input(values, m: int = 1) -> np.ndarray:
    """Return ``values`` as a validated control vector of length ``m``."""
    return _as_vector(values, m, "control input")


@dataclass(frozen=True)
class BoxSet:
    """Axis-aligned box ``lower <= v <= upper``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError("box bounds must have the same length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box bounds must be finite")
        if np.any(lo > hi):
            raise ValueError(f"box lower bound exceeds upper bound: {lo} > {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    def contains(self, v, tol: float = 0.0) -> bool:
        v = np.asarray(v, dtype=float)
        return bool(np.all(v >= self.lower - tol) and np.all(v <= self.upper + tol))

    def project(self, v) -> np.ndarray:
        return np.clip(v, self.lower, self.upper)

    def violation(self, v) -> float:
        """Largest distance by which ``v`` leaves the box (0 when inside)."""
        v = np.asarray(v, dtype=float)
        excess = np.maximum(v - self.upper, self.lower - v)
        return float(max(np.max(excess), 0.0))


@dataclass(frozen=True)
class TankParams:
    """Coefficients of the Euler-discretized coupled tanks.

    ``alpha1`` is the pump gain and ``alpha2`` the orifice drain coefficient,
    identical for both tanks. ``sample_time`` is in seconds.
    """

    alpha1: float = ALPHA1
    alpha2: float = ALPHA2
    sample_time: float = SAMPLE_TIME

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "sample_time"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be a positive finite number, got {val}")

    def equilibrium_input(self, level: float) -> float:
        """Pump command holding both tanks at ``level``."""
        return self.alpha2 / self.alpha1 * math.sqrt(level)


def continuous_rhs(x, u, p: TankParams = TankParams()) -> np.ndarray:
    """Time derivative of the tank levels.

    Written in the lumped ``alpha`` form, so ``step(x, u) - x`` equals
    ``p.sample_time * continuous_rhs(x, u)`` wherever no clamping occurs.
    """
    x = as_state(x)
    u = as_input(u)
    s1 = math.sqrt(max(x[0], 0.0))
    s2 = math.sqrt(max(x[1], 0.0))
    return np.array([p.alpha1 * u[0] - p.alpha2 * s1, p.alpha2 * (s1 - s2)])


def step(x, u, p: TankParams = TankParams()) -> np.ndarray:
    """Advance the tanks one sample with forward Euler.

    Square-root arguments are clamped at zero and the successor levels are
    clamped to be non-negative, since Euler can overshoot an empty tank.
    """
    x = as_state(x)
    u = as_input(u)
    return _step(x, u, p)


def _step(x: np.ndarray, u: np.ndarray, p: TankParams) -> np.ndarray:
    # unchecked fast path used inside rollouts
    T = p.sample_time
    s1 = math.sqrt(x[0]) if x[0] > 0.0 else 0.0
    s2 = math.sqrt(x[1]) if x[1] > 0.0 else 0.0
    h1 = x[0] + T * (p.alpha1 * u[0] - p.alpha2 * s1)
    h2 = x[1] + T * p.alpha2 * (s1 - s2)
    return np.array([h1 if h1 > 0.0 else 0.0, h2 if h2 > 0.0 else 0.0])


def jacobians(x, u, p: TankParams = TankParams()) -> tuple[np.ndarray, np.ndarray]:
    """Partial derivatives ``(A, B) = (d step/dx, d step/du)``.

    The square-root slope is evaluated at ``max(h, SQRT_EPS)`` so the result
    stays finite at empty tanks. Rows whose successor level is clamped at
    zero have zero derivative.
    """
    x = as_state(x)
    u = as_input(u)
    return _jacobians(x, u, p)


def _jacobians(x: np.ndarray, u: np.ndarray, p: TankParams) -> tuple[np.ndarray, np.ndarray]:
    T, a1, a2 = p.sample_time, p.alpha1, p.alpha2
    d1 = 0.5 / math.sqrt(max(x[0], SQRT_EPS))
    d2 = 0.5 / math.sqrt(max(x[1], SQRT_EPS))
    A = np.array([[1.0 - T * a2 * d1, 0.0], [T * a2 * d1, 1.0 - T * a2 * d2]])
    B = np.array([[T * a1], [0.0]])
    nxt = _step(x, u, p)
    # the non-negativity clamp zeroes the slope of an emptied tank
    if x[0] > 0.0 and nxt[0] == 0.0:
        A[0, :] = 0.0
        B[0, :] = 0.0
    if x[1] > 0.0 and nxt[1] == 0.0:
        A[1, :] = 0.0
    return A, B


class PlantModel:
    """Interface the controller needs from a discrete-time plant.

    Subclasses set ``n``, ``m``, ``state_box`` and ``input_box`` and implement
    :meth:`step` and :meth:`jacobians`.
    """

    n: int
    m: int
    state_box: BoxSet
    input_box: BoxSet

    def step(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jacobians(self, x: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError


@dataclass(frozen=True)
class CoupledTanks(PlantModel):
    """Two identical tanks in cascade, fed by one pump."""

    params: TankParams = field(default_factory=TankParams)
    state_box: BoxSet = field(default_factory=lambda: BoxSet([0.0, 0.0], [1.0, 1.0]))
    input_box: BoxSet = field(default_factory=lambda: BoxSet([0.0], [1.0]))

    n = 2
    m = 1

    def step(self, x, u):
        return _step(x, u, self.params)

    def jacobians(self, x, u):
        return _jacobians(x, u, self.params)

    def equilibrium(self, level: float) -> tuple[np.ndarray, np.ndarray]:
        """State and input of the steady state with both tanks at ``level``."""
        return np.array([level, level]), np.array([self.params.equilibrium_input(level)])

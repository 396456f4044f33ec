"""Residuals and the nonparametric CUSUM detector.

The residual is the distance between the measured output and the
self-generated reference point for the same sample. CUSUM accumulates the
part of the residual that exceeds the drift ``delta`` and raises an alarm
once the statistic exceeds ``gamma``; the statistic then restarts at zero.

Alarm time stamps follow the recursion's indexing: the residual of sample
``k`` produces the statistic ``S_{k+1}``, so an alarm raised by that update
is stamped ``k + 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .nmpc import Norm, vector_norm

DELTA = 0.01
GAMMA = 0.1


@dataclass(frozen=True)
class Residual:
    value: float
    step: int = 0

    def __post_init__(self):
        if not (self.value >= 0 and math.isfinite(self.value)):
            raise ValueError(f"residual must be a non-negative number, got {self.value}")


def residual(y, ytilde, norm: Norm | str = Norm.EUCLIDEAN, step: int = 0) -> Residual:
    """Residual ``||y - ytilde||`` of sample ``step`` in the given norm."""
    y = np.asarray(y, dtype=float)
    ytilde = np.asarray(ytilde, dtype=float)
    if y.shape != ytilde.shape:
        raise ValueError(f"dimension mismatch: {y.shape} vs {ytilde.shape}")
    return Residual(vector_norm(y - ytilde, Norm.parse(norm)), step)


@dataclass(frozen=True)
class CusumState:
    """Immutable CUSUM state.

    Attributes
    ----------
    statistic : float
        Current value of ``S``; never negative.
    delta, gamma : float
        Drift and alarm threshold.
    alarmed : bool
        True once any update has pushed ``S`` above ``gamma``.
    alarm_step : int or None
        Time stamp of the first alarm.
    n_alarms : int
        Number of alarms raised so far (the detector keeps running after one).
    crossing : float
        Value of ``S`` that triggered the most recent alarm, before the restart.
    """

    statistic: float = 0.0
    delta: float = DELTA
    gamma: float = GAMMA
    alarmed: bool = False
    alarm_step: int | None = None
    n_alarms: int = 0
    crossing: float = 0.0

    def __post_init__(self):
        if not self.statistic >= 0:
            raise ValueError("CUSUM statistic must be non-negative")
        if not (self.delta > 0 and self.gamma > 0):
            raise ValueError("delta and gamma must be positive")


def cusum_update(s: CusumState, r: Residual) -> tuple[CusumState, bool]:
    """One CUSUM recursion step.

    Returns the new state and whether this update raised an alarm. On alarm
    the statistic restarts at zero.
    """
    S = max(0.0, s.statistic + r.value - s.delta)
    if S > s.gamma:
        first = s.alarm_step if s.alarmed else r.step + 1
        return replace(s, statistic=0.0, alarmed=True, alarm_step=first,
                       n_alarms=s.n_alarms + 1, crossing=S), True
    return replace(s, statistic=S), False


def stateless_check(r: Residual | float, gamma: float) -> bool:
    """Single-sample test: alarm iff the residual strictly exceeds ``gamma``."""
    value = r.value if isinstance(r, Residual) else float(r)
    return value > gamma

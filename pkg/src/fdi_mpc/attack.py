"""False-data-injection signals on the actuator and sensor channels.

An :class:`AttackSchedule` is a list of segments, each adding a step, ramp
or tabulated signal to one component of either the control input (before
it reaches the pump) or the measurement (before it reaches the controller).
The attacker is assumed unable to use both channels at the same sample;
:meth:`AttackSchedule.validate` reports the samples where a schedule breaks
that assumption.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class Channel(str, enum.Enum):
    INPUT = "input"
    OUTPUT = "output"


class Shape(str, enum.Enum):
    STEP = "step"
    RAMP = "ramp"
    CUSTOM = "custom"


@dataclass(frozen=True)
class AttackSegment:
    """Attack on one vector component over the closed interval ``[start_step, end_step]``.

    A ramp rises linearly from 0 at ``start_step`` to ``magnitude`` at
    ``end_step``. A custom segment plays back ``custom_values``, one per step.
    """

    channel: Channel
    target_index: int
    start_step: int
    end_step: int
    shape: Shape = Shape.STEP
    magnitude: float = 0.0
    custom_values: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "channel", Channel(self.channel))
        object.__setattr__(self, "shape", Shape(self.shape))
        if self.target_index < 0:
            raise ValueError("target_index must be non-negative")
        if self.start_step > self.end_step:
            raise ValueError(f"start_step {self.start_step} is after end_step {self.end_step}")
        if self.shape is Shape.CUSTOM:
            if self.custom_values is None:
                raise ValueError("custom segments need custom_values")
            vals = tuple(float(v) for v in self.custom_values)
            if len(vals) != self.end_step - self.start_step + 1:
                raise ValueError(
                    f"custom_values has {len(vals)} entries, "
                    f"expected {self.end_step - self.start_step + 1}"
                )
            object.__setattr__(self, "custom_values", vals)

    def active(self, k: int) -> bool:
        return self.start_step <= k <= self.end_step

    def value_at(self, k: int) -> float:
        if not self.active(k):
            return 0.0
        if self.shape is Shape.STEP:
            return self.magnitude
        if self.shape is Shape.RAMP:
            span = self.end_step - self.start_step
            if span == 0:
                return self.magnitude
            return self.magnitude * (k - self.start_step) / span
        return self.custom_values[k - self.start_step]


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    offending_steps: tuple[int, ...] = ()

    def __bool__(self):
        return self.ok

    def describe(self) -> str:
        if self.ok:
            return "ok"
        steps = self.offending_steps
        span = f"{steps[0]}..{steps[-1]}" if len(steps) > 1 else str(steps[0])
        return (
            f"input and output channels attacked simultaneously at {len(steps)} step(s) ({span}); "
            "the attacker may use only one channel at a time"
        )


@dataclass(frozen=True)
class AttackSchedule:
    segments: tuple[AttackSegment, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))

    def validate(self) -> ValidationReport:
        """Check that no sample has both an input and an output segment active."""
        inputs = [s for s in self.segments if s.channel is Channel.INPUT]
        outputs = [s for s in self.segments if s.channel is Channel.OUTPUT]
        bad: set[int] = set()
        for a in inputs:
            for b in outputs:
                lo, hi = max(a.start_step, b.start_step), min(a.end_step, b.end_step)
                bad.update(range(lo, hi + 1))
        return ValidationReport(not bad, tuple(sorted(bad)))

    def start_step(self, channel: Channel | None = None) -> int | None:
        """Earliest onset over all segments (optionally of one channel)."""
        starts = [s.start_step for s in self.segments if channel is None or s.channel is channel]
        return min(starts) if starts else None

    def signal_at(self, k: int, channel: Channel | str, size: int) -> np.ndarray:
        channel = Channel(channel)
        out = np.zeros(size)
        for seg in self.segments:
            if seg.channel is channel and seg.active(k):
                if seg.target_index >= size:
                    raise IndexError(f"attack targets component {seg.target_index} of a {size}-vector")
                out[seg.target_index] += seg.value_at(k)
        return out

    def corrupt_measurement(self, y, k: int) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return y + self.signal_at(k, Channel.OUTPUT, y.size)

    def corrupt_input(self, u, k: int) -> np.ndarray:
        """Actuator command after injection, before the actuator saturates."""
        u = np.asarray(u, dtype=float)
        return u + self.signal_at(k, Channel.INPUT, u.size)


def signal_at(schedule: AttackSchedule, k: int, channel: Channel | str, size: int) -> np.ndarray:
    return schedule.signal_at(k, channel, size)


def corrupt_measurement(y_true, schedule: AttackSchedule, k: int) -> np.ndarray:
    return schedule.corrupt_measurement(y_true, k)


def corrupt_input(u, schedule: AttackSchedule, k: int) -> np.ndarray:
    return schedule.corrupt_input(u, k)


def validate(schedule: AttackSchedule | Sequence[AttackSegment]) -> ValidationReport:
    if not isinstance(schedule, AttackSchedule):
        schedule = AttackSchedule(tuple(schedule))
    return schedule.validate()

"""Closed-loop control and anomaly detection.

:func:`run` executes, at every sample ``k``:

1. measure ``y_k = x_k + y^a_k + noise``;
2. update CUSUM with ``||y_k - ytilde_k||``, stopping on alarm when
   ``halt_on_alarm`` is set;
3. solve the MPC problem from ``y_k`` (clamped into the state box) with
   proximity tubes around ``ytilde_{k+1} .. ytilde_{k+N-1}``;
4. publish ``ytilde_{k+N}`` as the last predicted output;
5. apply ``clamp(u*_0 + u^a_k)`` to the true plant.

Sensor attacks and noise never touch the true state.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .attack import AttackSchedule, Channel
from .detector import DELTA, GAMMA, CusumState, cusum_update, residual
from .dynamics import CoupledTanks, TankParams
from .nmpc import MpcConfig, Norm, SolveResult, solve, with_riccati_terminal
from .reference import ReferenceBuffer

logger = logging.getLogger(__name__)


class NoiseKind(str, enum.Enum):
    NONE = "none"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class NoiseModel:
    """Additive measurement noise; draws come from ``numpy.random.default_rng(seed)``."""

    kind: NoiseKind = NoiseKind.NONE
    std_dev: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if not (self.std_dev >= 0 and math.isfinite(self.std_dev)):
            raise ValueError(f"noise std_dev must be non-negative, got {self.std_dev}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("noise seed must be an unsigned 64-bit integer")

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(int(self.seed))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind is NoiseKind.NONE or self.std_dev == 0:
            return np.zeros(size)
        return rng.normal(0.0, self.std_dev, size)


@dataclass(frozen=True)
class DetectorConfig:
    delta: float = DELTA
    gamma: float = GAMMA
    norm: Norm = Norm.EUCLIDEAN
    enabled: bool = True

    def __post_init__(self):
        object.__setattr__(self, "norm", Norm.parse(self.norm))
        if not (self.delta > 0 and self.gamma > 0):
            raise ValueError("detector delta and gamma must be positive")


@dataclass(frozen=True)
class ScenarioConfig:
    mpc: MpcConfig
    x0: np.ndarray
    params: TankParams = field(default_factory=TankParams)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    attacks: AttackSchedule = field(default_factory=AttackSchedule)
    noise: NoiseModel = field(default_factory=NoiseModel)
    total_steps: int = 1000
    halt_on_alarm: bool = True
    name: str = "scenario"

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        object.__setattr__(self, "x0", x0)
        if int(self.total_steps) != self.total_steps or self.total_steps < 1:
            raise ValueError(f"total_steps must be a positive integer, got {self.total_steps}")
        if x0.size != self.mpc.state_box.dim or not self.mpc.state_box.contains(x0):
            raise ValueError(f"x0 {x0} must lie inside the state box")
        report = self.attacks.validate()
        if not report.ok:
            raise ValueError(report.describe())

    def model(self) -> CoupledTanks:
        return CoupledTanks(self.params, self.mpc.state_box, self.mpc.input_box)


@dataclass(frozen=True)
class StepRecord:
    k: int
    t: float
    x_true: np.ndarray
    y_measured: np.ndarray
    ytilde: np.ndarray
    u: np.ndarray  # controller command u*_0 (NaN when the loop halted before solving)
    u_attack: np.ndarray
    y_attack: np.ndarray
    residual: float
    cusum: float
    alarm: bool
    status: str
    cost: float
    violation: float


@dataclass
class RunLog:
    scenario: str
    sample_time: float
    records: list[StepRecord] = field(default_factory=list)
    halted_reason: str = "completed"
    attack_start: int | None = None

    def __len__(self):
        return len(self.records)

    @property
    def alarm_steps(self) -> list[int]:
        """Time stamps (``k + 1``) of every alarm raised."""
        return [r.k + 1 for r in self.records if r.alarm]

    @property
    def alarm_step(self) -> int | None:
        steps = self.alarm_steps
        return steps[0] if steps else None

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    @property
    def max_state(self) -> np.ndarray:
        return np.max(self.column("x_true"), axis=0)

    @property
    def final_state(self) -> np.ndarray:
        return self.records[-1].x_true

    @property
    def false_positive(self) -> bool:
        a = self.alarm_step
        # an alarm stamped at the onset came from the residual of the sample before it
        return a is not None and (self.attack_start is None or a <= self.attack_start)

    def detection_delay(self) -> int | None:
        return detection_delay(self, self.attack_start)


def detection_delay(log: RunLog, attack_start: int | None) -> int | None:
    """Steps from attack onset to the first alarm.

    Alarms are stamped ``k + 1`` for the residual of sample ``k``, so a value
    of zero or below means the alarm was raised before the attack (a false
    positive). ``None`` means no alarm, or no attack to measure against.
    """
    a = log.alarm_step
    if a is None or attack_start is None:
        return None
    return a - attack_start


def run(scenario: ScenarioConfig) -> RunLog:
    """Simulate ``scenario`` and return the per-step log."""
    model = scenario.model()
    cfg = with_riccati_terminal(scenario.mpc, model)
    box = cfg.state_box
    T = scenario.params.sample_time
    n, m = model.n, model.m
    rng = scenario.noise.generator()
    det = scenario.detector
    cusum = CusumState(delta=det.delta, gamma=det.gamma)
    log = RunLog(scenario.name, T, attack_start=scenario.attacks.start_step())

    x = scenario.x0.copy()
    buf: ReferenceBuffer | None = None
    warm: SolveResult | np.ndarray | None = None
    for k in range(scenario.total_steps):
        y_attack = scenario.attacks.signal_at(k, Channel.OUTPUT, n)
        y = x + y_attack + scenario.noise.sample(rng, n)
        y_ctrl = box.project(y)
        if buf is None:
            buf, seed = ReferenceBuffer.init(model, cfg, y_ctrl)
            warm = seed.controls

        ytilde = buf.get(k).copy()
        r = residual(y, ytilde, det.norm, step=k)
        alarm = False
        if det.enabled:
            cusum, alarm = cusum_update(cusum, r)
        # log the value that crossed gamma rather than the restarted zero
        s_logged = cusum.crossing if alarm else cusum.statistic
        u_attack = scenario.attacks.signal_at(k, Channel.INPUT, m)

        if alarm and scenario.halt_on_alarm:
            log.records.append(
                StepRecord(k, k * T, x.copy(), y, ytilde, np.full(m, np.nan), u_attack, y_attack,
                           r.value, s_logged, True, "not_solved", math.nan, math.nan)
            )
            log.halted_reason = "alarm"
            logger.info("%s: attack declared at step %d", scenario.name, k + 1)
            break

        reference = buf.window(k) if cfg.proximity is not None else None
        res = solve(cfg, model, y_ctrl, reference, warm)
        warm = res
        buf.push(k, res.predicted_outputs[-1])
        u = res.controls[0]
        log.records.append(
            StepRecord(k, k * T, x.copy(), y, ytilde, u.copy(), u_attack, y_attack,
                       r.value, s_logged, alarm, res.status.value, res.cost,
                       res.constraint_violation)
        )
        # the actuator saturates whatever the attacker adds
        x = model.step(x, cfg.input_box.project(u + u_attack))
    return log

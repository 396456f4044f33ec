"""Co-designed NMPC and CUSUM detection of false-data-injection attacks on coupled tanks."""

from .attack import AttackSchedule, AttackSegment, Channel, Shape
from .detector import CusumState, cusum_update, residual, stateless_check
from .dynamics import BoxSet, CoupledTanks, TankParams, jacobians, step
from .nmpc import (
    MpcConfig,
    Norm,
    ProximityBall,
    SolveResult,
    SolveStatus,
    check_proximity,
    cost_gradient,
    evaluate_cost,
    riccati_terminal_weight,
    rollout,
    solve,
    with_riccati_terminal,
)
from .reference import ReferenceBuffer, ReferenceInitError
from .scenario import ScenarioError, load_scenario, parse_scenario, shipped_scenarios
from .sim import DetectorConfig, NoiseKind, NoiseModel, RunLog, ScenarioConfig, detection_delay, run

__all__ = [
    "AttackSchedule", "AttackSegment", "BoxSet", "Channel", "CoupledTanks", "CusumState",
    "DetectorConfig", "MpcConfig", "NoiseKind", "NoiseModel", "Norm", "ProximityBall",
    "ReferenceBuffer", "ReferenceInitError", "RunLog", "ScenarioConfig", "ScenarioError",
    "Shape", "SolveResult", "SolveStatus", "TankParams", "check_proximity", "cost_gradient",
    "cusum_update", "detection_delay", "evaluate_cost", "jacobians", "load_scenario",
    "parse_scenario", "residual", "riccati_terminal_weight", "rollout", "run",
    "shipped_scenarios", "solve", "stateless_check", "step", "with_riccati_terminal",
]

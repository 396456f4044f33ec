"""Scenario files: YAML documents describing one closed-loop experiment.

Every key is optional; missing keys take the defaults in :data:`DEFAULTS`.
Unknown keys and ill-typed values are rejected with a diagnostic that names
the dotted key path and, when the key came from a file, its line number.

Example::

    mpc:
      horizon: 10
      setpoint: [0.8, 0.8]
    attack:
      segments:
        - {channel: output, index: 0, start: 500, shape: step, magnitude: -0.3}
    sim:
      total_steps: 1000
"""

from __future__ import annotations

import copy
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .attack import AttackSchedule, AttackSegment
from .dynamics import BoxSet, TankParams
from .nmpc import MpcConfig, ProximityBall
from .sim import DetectorConfig, NoiseModel, ScenarioConfig

DEFAULTS: dict[str, dict[str, Any]] = {
    "plant": {"alpha1": 1.75, "alpha2": 0.1544, "sample_time": 0.1},
    "mpc": {
        "horizon": 10,
        "q_diag": [1.0, 1.0],
        "r_diag": [0.01],
        "terminal_radius": 0.0,
        "setpoint": [0.8, 0.8],
        "proximity_radius": 0.01,
        "proximity_norm": "euclidean",
        "proximity_enabled": True,
        "proximity_margin": 1e-3,
    },
    "detector": {"delta": 0.01, "gamma": 0.1, "norm": "euclidean", "enabled": True},
    "noise": {"kind": "none", "std_dev": 0.002, "seed": 0},
    "attack": {"segments": []},
    "sim": {"x0": [0.0, 0.0], "total_steps": 1000, "halt_on_alarm": True},
}

SEGMENT_KEYS = {"channel", "index", "start", "end", "shape", "magnitude", "values"}


class ScenarioError(ValueError):
    """A scenario document failed to parse or validate."""


def _line_map(text: str) -> dict[str, int]:
    """Map dotted key paths to 1-based line numbers."""
    lines: dict[str, int] = {}

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for knode, vnode in node.value:
                p = f"{path}.{knode.value}" if path else str(knode.value)
                lines[p] = knode.start_mark.line + 1
                walk(vnode, p)
        elif isinstance(node, yaml.SequenceNode):
            for i, item in enumerate(node.value):
                p = f"{path}.{i}"
                lines[p] = item.start_mark.line + 1
                walk(item, p)

    root = yaml.compose(text, Loader=yaml.SafeLoader)
    if root is not None:
        walk(root, "")
    return lines


class _Reader:
    """Typed access to a nested dict with path-aware error messages."""

    def __init__(self, data: dict, lines: dict[str, int], source: str):
        self.data = data
        self.lines = lines
        self.source = source

    def fail(self, path: str, msg: str):
        line = self.lines.get(path)
        where = f"{self.source}:{line}" if line else self.source
        raise ScenarioError(f"{where}: {path}: {msg}")

    def section(self, name: str) -> dict:
        sec = self.data.get(name, {})
        if sec is None:
            sec = {}
        if not isinstance(sec, dict):
            self.fail(name, "expected a mapping")
        unknown = set(sec) - set(DEFAULTS[name])
        for key in sorted(unknown, key=str):
            self.fail(f"{name}.{key}", "unknown key")
        return {**DEFAULTS[name], **sec}

    def number(self, path: str, value, integer: bool = False):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(path, f"expected a number, got {value!r}")
        if integer:
            if int(value) != value:
                self.fail(path, f"expected an integer, got {value!r}")
            return int(value)
        return float(value)

    def vector(self, path: str, value, size: int | None = None) -> np.ndarray:
        if not isinstance(value, (list, tuple)):
            self.fail(path, f"expected a list of numbers, got {value!r}")
        out = np.array([self.number(f"{path}.{i}", v) for i, v in enumerate(value)])
        if size is not None and out.size != size:
            self.fail(path, f"expected {size} entries, got {out.size}")
        return out

    def flag(self, path: str, value) -> bool:
        if not isinstance(value, bool):
            self.fail(path, f"expected true or false, got {value!r}")
        return value

    def text(self, path: str, value, choices) -> str:
        if not isinstance(value, str) or value.lower() not in choices:
            self.fail(path, f"expected one of {sorted(choices)}, got {value!r}")
        return value.lower()


def apply_overrides(data: dict, overrides) -> dict:
    """Apply ``key.path=value`` replacements; values are parsed as YAML scalars or lists."""
    data = copy.deepcopy(data)
    for item in overrides or ():
        if "=" not in item:
            raise ScenarioError(f"override {item!r}: expected key=value")
        path, raw = item.split("=", 1)
        keys = path.strip().split(".")
        if not all(keys):
            raise ScenarioError(f"override {item!r}: empty key in path")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ScenarioError(f"override {item!r}: cannot parse value ({exc})") from None
        node = data
        for key in keys[:-1]:
            if isinstance(node, list):
                try:
                    node = node[int(key)]
                except (ValueError, IndexError):
                    raise ScenarioError(f"override {item!r}: no list element {key!r}") from None
            else:
                node = node.setdefault(key, {})
                if not isinstance(node, (dict, list)):
                    raise ScenarioError(f"override {item!r}: {key!r} is not a section")
        if isinstance(node, list):
            try:
                node[int(keys[-1])] = value
            except (ValueError, IndexError):
                raise ScenarioError(f"override {item!r}: no list element {keys[-1]!r}") from None
        else:
            node[keys[-1]] = value
    return data


def parse_scenario(text: str, source: str = "<scenario>", overrides=None, name: str | None = None) -> ScenarioConfig:
    """Build a validated :class:`ScenarioConfig` from YAML text."""
    try:
        data = yaml.safe_load(text)
        lines = _line_map(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark is not None else source
        raise ScenarioError(f"{where}: invalid YAML: {getattr(exc, 'problem', exc)}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ScenarioError(f"{source}: top level must be a mapping")
    data = apply_overrides(data, overrides)
    rd = _Reader(data, lines, source)
    for key in data:
        if key not in DEFAULTS and key != "name":
            rd.fail(str(key), "unknown section")
    if name is None:
        name = str(data.get("name", Path(source).stem))

    plant = rd.section("plant")
    try:
        params = TankParams(
            rd.number("plant.alpha1", plant["alpha1"]),
            rd.number("plant.alpha2", plant["alpha2"]),
            rd.number("plant.sample_time", plant["sample_time"]),
        )
    except ScenarioError:
        raise
    except ValueError as exc:
        rd.fail("plant", str(exc))

    state_box = BoxSet([0.0, 0.0], [1.0, 1.0])
    input_box = BoxSet([0.0], [1.0])
    mpc = rd.section("mpc")
    horizon = rd.number("mpc.horizon", mpc["horizon"], integer=True)
    if horizon < 1:
        rd.fail("mpc.horizon", "must be at least 1")
    q = rd.vector("mpc.q_diag", mpc["q_diag"], 2)
    r = rd.vector("mpc.r_diag", mpc["r_diag"], 1)
    if np.any(q <= 0):
        rd.fail("mpc.q_diag", "entries must be positive")
    if np.any(r <= 0):
        rd.fail("mpc.r_diag", "entries must be positive")
    sp_raw = mpc["setpoint"]
    if isinstance(sp_raw, (int, float)) and not isinstance(sp_raw, bool):
        sp_raw = [sp_raw, sp_raw]
    setpoint = rd.vector("mpc.setpoint", sp_raw, 2)
    if not state_box.contains(setpoint):
        rd.fail("mpc.setpoint", f"{setpoint.tolist()} is outside the state box [0, 1]")
    t_radius = rd.number("mpc.terminal_radius", mpc["terminal_radius"])
    if t_radius < 0:
        rd.fail("mpc.terminal_radius", "must be non-negative")
    proximity = None
    if rd.flag("mpc.proximity_enabled", mpc["proximity_enabled"]):
        p_radius = rd.number("mpc.proximity_radius", mpc["proximity_radius"])
        if p_radius <= 0:
            rd.fail("mpc.proximity_radius", "must be positive")
        p_margin = rd.number("mpc.proximity_margin", mpc["proximity_margin"])
        if not 0 <= p_margin < 1:
            rd.fail("mpc.proximity_margin", "must lie in [0, 1)")
        p_norm = rd.text("mpc.proximity_norm", mpc["proximity_norm"], {"euclidean", "infinity", "l2", "linf"})
        proximity = ProximityBall(p_radius, p_norm, p_margin)
    mpc_cfg = MpcConfig(
        horizon=horizon,
        Q=np.diag(q),
        R=np.diag(r),
        setpoint=setpoint,
        state_box=state_box,
        input_box=input_box,
        terminal_set_radius=t_radius,
        proximity=proximity,
    )

    det = rd.section("detector")
    delta = rd.number("detector.delta", det["delta"])
    gamma = rd.number("detector.gamma", det["gamma"])
    if delta <= 0:
        rd.fail("detector.delta", "must be positive")
    if gamma <= 0:
        rd.fail("detector.gamma", "must be positive")
    detector = DetectorConfig(
        delta,
        gamma,
        rd.text("detector.norm", det["norm"], {"euclidean", "infinity", "l2", "linf"}),
        rd.flag("detector.enabled", det["enabled"]),
    )

    nz = rd.section("noise")
    std = rd.number("noise.std_dev", nz["std_dev"])
    if std < 0:
        rd.fail("noise.std_dev", "must be non-negative")
    seed = rd.number("noise.seed", nz["seed"], integer=True)
    if not 0 <= seed < 2**64:
        rd.fail("noise.seed", "must be an unsigned 64-bit integer")
    noise = NoiseModel(rd.text("noise.kind", nz["kind"], {"none", "gaussian"}), std, seed)

    sim = rd.section("sim")
    x0 = rd.vector("sim.x0", sim["x0"], 2)
    if not state_box.contains(x0):
        rd.fail("sim.x0", f"{x0.tolist()} is outside the state box [0, 1]")
    total_steps = rd.number("sim.total_steps", sim["total_steps"], integer=True)
    if total_steps < 1:
        rd.fail("sim.total_steps", "must be at least 1")
    halt = rd.flag("sim.halt_on_alarm", sim["halt_on_alarm"])

    att = rd.section("attack")
    raw_segments = att["segments"] or []
    if not isinstance(raw_segments, list):
        rd.fail("attack.segments", "expected a list of segments")
    segments = []
    for i, seg in enumerate(raw_segments):
        path = f"attack.segments.{i}"
        if not isinstance(seg, dict):
            rd.fail(path, "expected a mapping")
        for key in sorted(set(seg) - SEGMENT_KEYS, key=str):
            rd.fail(f"{path}.{key}", "unknown key")
        channel = rd.text(f"{path}.channel", seg.get("channel"), {"input", "output"})
        size = 1 if channel == "input" else 2
        index = rd.number(f"{path}.index", seg.get("index", 0), integer=True)
        if not 0 <= index < size:
            rd.fail(f"{path}.index", f"must be in [0, {size - 1}] for the {channel} channel")
        if "start" not in seg:
            rd.fail(path, "missing key 'start'")
        start = rd.number(f"{path}.start", seg["start"], integer=True)
        end = rd.number(f"{path}.end", seg.get("end", total_steps - 1), integer=True)
        shape = rd.text(f"{path}.shape", seg.get("shape", "step"), {"step", "ramp", "custom"})
        values = seg.get("values")
        if values is not None:
            values = tuple(rd.vector(f"{path}.values", values))
        try:
            segments.append(
                AttackSegment(channel, index, start, end, shape,
                              rd.number(f"{path}.magnitude", seg.get("magnitude", 0.0)), values)
            )
        except ValueError as exc:
            rd.fail(path, str(exc))
    schedule = AttackSchedule(tuple(segments))
    report = schedule.validate()
    if not report.ok:
        rd.fail("attack.segments", f"single-channel attack assumption violated: {report.describe()}")

    return ScenarioConfig(
        mpc=mpc_cfg,
        x0=x0,
        params=params,
        detector=detector,
        attacks=schedule,
        noise=noise,
        total_steps=total_steps,
        halt_on_alarm=halt,
        name=name,
    )


def load_scenario(path, overrides=None) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read scenario file ({exc.strerror})") from None
    return parse_scenario(text, str(path), overrides, name=None)


def shipped_scenarios() -> dict[str, Path]:
    """Scenario files bundled with the package, keyed by stem."""
    root = resources.files("fdi_mpc") / "scenarios"
    return {Path(p.name).stem: Path(str(p)) for p in root.iterdir() if p.name.endswith(".yaml")}

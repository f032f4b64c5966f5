"""Scenario files: the world description a simulation run starts from.

JSON on disk. Only the nose position is required; every other field has a
default drawn from the hardware constants. Validation pins the ranges the
simulator relies on, and loading a saved scenario is lossless.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, asdict

from .kinematics import DEFAULT_TABLE, within_limits
from .motor import StepperPlan
from .vision import ServoConfig


class ScenarioError(Exception):
    pass


class ParseError(ScenarioError):
    """Malformed scenario file (position reported by the JSON parser)."""


class ValidationError(ScenarioError):
    """Well-formed file with an out-of-range or missing field."""


VALID_SIGNALS = tuple(f"u{i}" for i in range(1, 12))

DT_MIN = 1e-5
DT_MAX = 0.1

_SERVO_FIELDS = {f.name for f in dataclasses.fields(ServoConfig)}
_STEPPER_FIELDS = {f.name for f in dataclasses.fields(StepperPlan)}


@dataclass(frozen=True)
class ScheduledSignal:
    t: float
    u: str


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    dt: float = 0.002
    seed: int = 0
    noise_px: float = 0.0
    initial_q: tuple[float, float, float, float] = (0.0, 0.8, 1.0, 0.0)
    # world positions in metres; the nose may drift (m/s)
    nose_world: tuple[float, float, float] = (-0.39, -0.12, 0.35)
    nose_drift: tuple[float, float, float] = (0.0, 0.0, 0.0)
    food_world: tuple[float, float, float] = (-0.3639, -0.1118, 0.3307)
    signals: tuple[ScheduledSignal, ...] = ()
    payload_weight: float = 0.0
    grasp_success: bool = True
    grasp_duration: float = 1.0
    feed_duration: float = 2.0
    search_attempt_limit: int = 10
    servo_overrides: tuple = ()
    stepper_overrides: tuple = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("initial_q", "nose_world", "nose_drift", "food_world"):
            d[key] = list(getattr(self, key))
        d["signals"] = [{"t": s.t, "u": s.u} for s in self.signals]
        d["servo_overrides"] = {k: v for k, v in self.servo_overrides}
        d["stepper_overrides"] = {
            k: (list(v) if isinstance(v, tuple) else v) for k, v in self.stepper_overrides
        }
        return d

    def servo_config(self) -> ServoConfig:
        return dataclasses.replace(ServoConfig(), **dict(self.servo_overrides))

    def stepper_plan(self) -> StepperPlan:
        out = {}
        for k, v in self.stepper_overrides:
            out[k] = tuple(v) if isinstance(v, (list, tuple)) else v
        return dataclasses.replace(StepperPlan(), **out)


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ValidationError(message)


def _vector(data: dict, key: str, n: int) -> tuple:
    _require(key in data, f"{key}: missing")
    value = data[key]
    _require(
        isinstance(value, (list, tuple)) and len(value) == n,
        f"{key}: expected {n} numbers",
    )
    out = []
    for v in value:
        _require(isinstance(v, (int, float)) and math.isfinite(v), f"{key}: entries must be finite numbers")
        out.append(float(v))
    return tuple(out)


def _overrides(data: dict, key: str, allowed: set) -> tuple:
    raw = data.get(key, {})
    _require(isinstance(raw, dict), f"{key}: expected an object")
    items = []
    for name, value in sorted(raw.items()):
        _require(name in allowed, f"{key}.{name}: unknown field")
        if isinstance(value, list):
            value = tuple(value)
            _require(
                all(isinstance(v, (int, float)) and math.isfinite(v) for v in value),
                f"{key}.{name}: entries must be finite numbers",
            )
        else:
            _require(
                isinstance(value, (int, float)) and math.isfinite(value),
                f"{key}.{name}: must be a finite number",
            )
        items.append((name, value))
    return tuple(items)


def scenario_from_dict(data: dict) -> Scenario:
    if not isinstance(data, dict):
        raise ValidationError("scenario: expected an object")
    defaults = Scenario()
    dt = data.get("dt", defaults.dt)
    _require(isinstance(dt, (int, float)) and DT_MIN < dt <= DT_MAX, f"dt: must be in ({DT_MIN}, {DT_MAX}]")
    seed = data.get("seed", defaults.seed)
    _require(isinstance(seed, int) and seed >= 0, "seed: must be a non-negative integer")
    noise = data.get("noise_px", defaults.noise_px)
    _require(isinstance(noise, (int, float)) and 0.0 <= noise < 100.0, "noise_px: must be in [0, 100)")
    initial_q = _vector(data, "initial_q", 4) if "initial_q" in data else defaults.initial_q
    _require(bool(within_limits(DEFAULT_TABLE, initial_q).all()), "initial_q: outside joint limits")
    nose = _vector(data, "nose_world", 3)
    drift = _vector(data, "nose_drift", 3) if "nose_drift" in data else defaults.nose_drift
    food = _vector(data, "food_world", 3) if "food_world" in data else defaults.food_world
    raw_signals = data.get("signals", [])
    _require(isinstance(raw_signals, list), "signals: expected a list")
    signals = []
    last_t = -math.inf
    for i, item in enumerate(raw_signals):
        _require(isinstance(item, dict) and "t" in item and "u" in item, f"signals[{i}]: need t and u")
        t = item["t"]
        _require(isinstance(t, (int, float)) and math.isfinite(t) and t >= 0.0, f"signals[{i}].t: must be >= 0")
        _require(t >= last_t, "signals: must be sorted by t")
        last_t = t
        _require(item["u"] in VALID_SIGNALS, f"signals[{i}].u: unknown signal {item['u']!r}")
        signals.append(ScheduledSignal(t=float(t), u=item["u"]))
    payload = data.get("payload_weight", 0.0)
    _require(isinstance(payload, (int, float)) and 0.0 <= payload < 1e3, "payload_weight: must be in [0, 1000)")
    grasp_success = data.get("grasp_success", True)
    _require(isinstance(grasp_success, bool), "grasp_success: must be a boolean")
    grasp_duration = data.get("grasp_duration", defaults.grasp_duration)
    feed_duration = data.get("feed_duration", defaults.feed_duration)
    for key, val in (("grasp_duration", grasp_duration), ("feed_duration", feed_duration)):
        _require(isinstance(val, (int, float)) and 0.0 < val <= 600.0, f"{key}: must be in (0, 600]")
    limit = data.get("search_attempt_limit", defaults.search_attempt_limit)
    _require(isinstance(limit, int) and 1 <= limit <= 100, "search_attempt_limit: must be in [1, 100]")
    name = data.get("name", defaults.name)
    _require(isinstance(name, str) and name != "", "name: must be a non-empty string")
    servo_over = _overrides(data, "servo_overrides", _SERVO_FIELDS)
    stepper_over = _overrides(data, "stepper_overrides", _STEPPER_FIELDS)
    scenario = Scenario(
        name=name,
        dt=float(dt),
        seed=seed,
        noise_px=float(noise),
        initial_q=initial_q,
        nose_world=nose,
        nose_drift=drift,
        food_world=food,
        signals=tuple(signals),
        payload_weight=float(payload),
        grasp_success=grasp_success,
        grasp_duration=float(grasp_duration),
        feed_duration=float(feed_duration),
        search_attempt_limit=limit,
        servo_overrides=servo_over,
        stepper_overrides=stepper_over,
    )
    try:
        scenario.servo_config()
        scenario.stepper_plan()
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"config overrides: {exc}") from exc
    return scenario


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return scenario_from_dict(data)


def save_scenario(scenario: Scenario, path) -> None:
    with open(path, "w") as fh:
        json.dump(scenario.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")

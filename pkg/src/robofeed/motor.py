"""Joint drive models: first-order plant, cascade position/velocity control,
quadrature encoder decoding and stepper step planning."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace


class MotorError(Exception):
    pass


class ZeroIntervalError(MotorError):
    """Speed requested over a non-positive counting interval."""


# ---------------------------------------------------------------- plant

@dataclass(frozen=True)
class MotorPlant:
    """Velocity-loop approximation G(s) = K / (J s + b) with angle output."""

    J: float = 0.05
    b: float = 0.75
    K: float = 1.0
    velocity: float = 0.0
    angle: float = 0.0

    def __post_init__(self) -> None:
        if self.J <= 0.0:
            raise ValueError("J must be positive")
        if self.b < 0.0:
            raise ValueError("b must be non-negative")


def plant_step(plant: MotorPlant, command: float, dt: float) -> MotorPlant:
    """Semi-implicit Euler step of the first-order plant."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    velocity = plant.velocity + dt * (plant.K * command - plant.b * plant.velocity) / plant.J
    angle = plant.angle + dt * velocity
    return replace(plant, velocity=velocity, angle=angle)


# ---------------------------------------------------------------- cascade

@dataclass(frozen=True)
class CascadeGains:
    """Outer position PID feeding a velocity reference into an inner PI.

    The derivative acts on the per-sample measurement difference (firmware
    convention, so kd1 is gain per sample, not per second); the integral
    terms use integral-of-error-times-dt semantics and clamp to avoid
    windup.
    """

    kp1: float = 120.0
    ki1: float = 10.0
    kd1: float = 500.0
    kp2: float = 20.0
    ki2: float = 30.0
    integrator_limit: float = 120.0


@dataclass(frozen=True)
class CascadeState:
    integ1: float = 0.0
    integ2: float = 0.0
    prev_meas: float | None = None


def loop_characteristics(gains: CascadeGains) -> tuple[float, float]:
    """(natural frequency, damping ratio) of the identified velocity loop."""
    omega_n = math.sqrt(gains.kp2)
    zeta = gains.ki2 / (4.0 * math.sqrt(gains.kp2))
    return omega_n, zeta


def plant_from_gains(gains: CascadeGains, K: float = 1.0) -> MotorPlant:
    """First-order plant whose closed velocity loop matches the gain set:
    J = 1/kp2 and b = ki2/(2*kp2)."""
    omega_n, zeta = loop_characteristics(gains)
    j = 1.0 / (omega_n * omega_n)
    b = 2.0 * zeta * omega_n * j
    return MotorPlant(J=j, b=b, K=K)


def cascade_step(
    gains: CascadeGains,
    ref_pos: float,
    meas_pos: float,
    meas_vel: float,
    dt: float,
    state: CascadeState,
) -> tuple[float, CascadeState]:
    """One controller sample; returns (plant command, next state)."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    lim = gains.integrator_limit
    err1 = ref_pos - meas_pos
    integ1 = _clamp(state.integ1 + gains.ki1 * err1 * dt, lim)
    if state.prev_meas is None:
        deriv = 0.0
    else:
        deriv = -gains.kd1 * (meas_pos - state.prev_meas)
    vel_ref = gains.kp1 * err1 + integ1 + deriv
    err2 = vel_ref - meas_vel
    integ2 = _clamp(state.integ2 + gains.ki2 * err2 * dt, lim)
    command = gains.kp2 * err2 + integ2
    return command, CascadeState(integ1=integ1, integ2=integ2, prev_meas=meas_pos)


def _clamp(value: float, limit: float) -> float:
    return max(-limit, min(limit, value))


def control_trace_to_csv(rows, path) -> None:
    """rows: iterable of (t, ref, pos, vel, command)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "ref", "pos", "vel", "command"])
        for row in rows:
            writer.writerow([f"{v:.9g}" for v in row])


# ---------------------------------------------------------------- encoder

@dataclass(frozen=True)
class EncoderModel:
    ppr: int
    count: int = 0
    phase: tuple[int, int] = (0, 0)
    errors: int = 0

    def __post_init__(self) -> None:
        if self.ppr <= 0:
            raise ValueError("ppr must be positive")

    def position_degrees(self) -> float:
        return self.count * 360.0 / self.ppr


# forward phase order: 00 -> 10 -> 11 -> 01 -> 00
_FORWARD_NEXT = {(0, 0): (1, 0), (1, 0): (1, 1), (1, 1): (0, 1), (0, 1): (0, 0)}


def encoder_decode(model: EncoderModel, edges) -> EncoderModel:
    """Fold a sequence of (a, b) phase samples into the count.

    A skipped phase (both bits toggling at once) cannot be attributed to a
    direction, so it increments the error counter and leaves the count.
    """
    count = model.count
    phase = tuple(model.phase)
    errors = model.errors
    for edge in edges:
        new = (int(edge[0]), int(edge[1]))
        for bit in new:
            if bit not in (0, 1):
                raise ValueError("phase bits must be 0 or 1")
        if new == phase:
            continue
        if _FORWARD_NEXT[phase] == new:
            count += 1
        elif _FORWARD_NEXT[new] == phase:
            count -= 1
        else:
            errors += 1
        phase = new
    return replace(model, count=count, phase=phase, errors=errors)


def encoder_speed(pulse_count: float, interval: float) -> float:
    """Mean pulse rate over a counting interval."""
    if interval <= 0.0:
        raise ZeroIntervalError("counting interval must be positive")
    return pulse_count / interval


# ---------------------------------------------------------------- steppers

@dataclass(frozen=True)
class StepperPlan:
    """Steps per joint revolution after gearing, plus the belt coupling
    between the second and third joints."""

    steps_per_rev: tuple[int, int, int, int] = (4800, 4000, 4000, 2048)
    coupling_2_to_3: float = 0.2
    max_rates: tuple[float, float, float, float] = (800.0, 800.0, 800.0, 380.0)
    accels: tuple[float, float, float, float] = (1000.0, 1000.0, 1000.0, 1000.0)

    def __post_init__(self) -> None:
        if any(s <= 0 for s in self.steps_per_rev):
            raise ValueError("steps_per_rev entries must be positive")


DEFAULT_PLAN = StepperPlan()


def _round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5)) if x >= 0.0 else int(math.ceil(x - 0.5))


def angle_to_steps(angle: float, joint: int, plan: StepperPlan = DEFAULT_PLAN) -> int:
    """Whole-step target for a joint angle, half rounded away from zero."""
    return _round_half_away(angle * plan.steps_per_rev[joint] / (2.0 * math.pi))


def steps_to_angle(steps: float, joint: int, plan: StepperPlan = DEFAULT_PLAN) -> float:
    return steps * 2.0 * math.pi / plan.steps_per_rev[joint]


def apply_coupling(delta_steps, plan: StepperPlan = DEFAULT_PLAN) -> tuple[int, int, int, int]:
    """Compensate the belt between the second and third joints: a move of
    the second joint drags the third, so its step delta gets a share of the
    second joint's."""
    out = [int(v) for v in delta_steps]
    out[2] += _round_half_away(plan.coupling_2_to_3 * out[1])
    return tuple(out)


@dataclass(frozen=True)
class StepperMotor:
    """Step-position state advanced by stepper_advance; position is held as
    a float internally but always lands on whole steps at rest."""

    position: float = 0.0
    rate: float = 0.0

    @property
    def steps(self) -> int:
        return _round_half_away(self.position)


def stepper_advance(
    motor: StepperMotor, target: int, max_rate: float, accel: float, dt: float
) -> StepperMotor:
    """Advance one tick along a trapezoidal rate ramp toward target.

    The rate never exceeds max_rate, changes by at most accel*dt per tick,
    and the position never crosses the target within a tick, so the motor
    parks exactly on it.
    """
    if dt <= 0.0 or max_rate <= 0.0 or accel <= 0.0:
        raise ValueError("dt, max_rate and accel must be positive")
    dist = float(target) - motor.position
    if dist != 0.0:
        brake = math.sqrt(2.0 * accel * abs(dist))
        desired = math.copysign(min(max_rate, brake), dist)
    else:
        desired = 0.0
    dv = desired - motor.rate
    dv = max(-accel * dt, min(accel * dt, dv))
    rate = motor.rate + dv
    step = rate * dt
    if (dist >= 0.0 and step > dist) or (dist <= 0.0 and step < dist):
        step = dist
    return StepperMotor(position=motor.position + step, rate=rate)


def stopping_target(motor: StepperMotor, accel: float) -> int:
    """Nearest step the motor can reach by braking at the accel limit."""
    glide = motor.rate * motor.rate / (2.0 * accel)
    return _round_half_away(motor.position + math.copysign(glide, motor.rate))

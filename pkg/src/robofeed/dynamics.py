"""Payload statics and simplified joint dynamics of the feeding arm.

Gravity torques come from link weights acting at half-length lever arms plus
joint-module weights at full lever arms. The dynamic model treats each link
as a rod rotating about its end (I = m*L^2/3) and adds the inertial torque
of the acceleration limit on top of the reduced gravity sums. SI units.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np


class DynamicsError(Exception):
    pass


class BadTimingError(DynamicsError):
    """Profile timing that cannot produce a three-phase trapezoid."""


@dataclass(frozen=True)
class LinkParams:
    # link lengths, m
    L0: float = 0.0695
    L1: float = 0.0875
    L2: float = 0.1440
    L3: float = 0.1200
    L4: float = 0.0553
    # link and joint-module weights, N
    W2: float = 2.73
    W3: float = 1.25
    W4: float = 0.0123
    WJ3: float = 1.67
    WJ4: float = 0.40
    # link masses for the rod inertia model, kg
    m2: float = 0.273
    m3: float = 0.125
    # rated joint torques, N*m
    T1: float = 2.40
    T2: float = 1.40
    T3: float = 2.75
    T4: float = 0.04
    # belt drive efficiency (joints 1..3; joint 4 is direct)
    eta_belt: float = 0.9
    # acceleration bound used for the dynamic payload margin, rad/s^2
    alpha_max: float = 9.8125
    # lumped inertias for the joints outside the rod model; joint 1
    # defaults to the joint-2 rod value when left as None
    inertia_j1: float | None = None
    inertia_j4: float = 1e-5

    def __post_init__(self) -> None:
        for name in ("L0", "L1", "L2", "L3", "L4"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.eta_belt <= 1.0:
            raise ValueError("eta_belt must be in (0, 1]")
        for name in ("W2", "W3", "W4", "WJ3", "WJ4", "m2", "m3"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class TorqueReport:
    t1g: float
    t2g: float
    t3g: float
    t4g: float
    payload_weight: float
    binding_joint: int | None


def inertia_moments(p: LinkParams) -> tuple[float, float]:
    """Rod-about-end moments for links 2 and 3."""
    return (p.m2 * p.L2 * p.L2 / 3.0, p.m3 * p.L3 * p.L3 / 3.0)


def torque_capacities(p: LinkParams) -> tuple[float, float, float, float]:
    """Available torque per joint: belt efficiency applies to joints 1..3."""
    return (p.T1 * p.eta_belt, p.T2 * p.eta_belt, p.T3 * p.eta_belt, p.T4)


def _gravity_terms(p: LinkParams, payload_weight: float, include_joint4: bool):
    """Stretched-arm gravity torques split as (base, payload slope) pairs."""
    if include_joint4:
        t2 = (
            p.W2 * p.L2 / 2.0
            + p.WJ3 * p.L2
            + p.W3 * (p.L2 + p.L3 / 2.0)
            + p.WJ4 * (p.L2 + p.L3)
            + p.W4 * (p.L2 + p.L3 + p.L4 / 2.0),
            p.L2 + p.L3 + p.L4,
        )
        t3 = (
            p.W3 * p.L3 / 2.0 + p.WJ4 * p.L3 + p.W4 * (p.L3 + p.L4 / 2.0),
            p.L3 + p.L4,
        )
        t4 = (p.W4 * p.L4 / 2.0, p.L4)
    else:
        t2 = (
            p.W2 * p.L2 / 2.0
            + p.WJ3 * p.L2
            + p.W3 * (p.L2 + p.L3 / 2.0)
            + p.WJ4 * (p.L2 + p.L3),
            p.L2 + p.L3,
        )
        t3 = (p.W3 * p.L3 / 2.0 + p.WJ4 * p.L3, p.L3)
        t4 = (0.0, 0.0)
    return t2, t3, t4


def gravity_torques(
    p: LinkParams, payload_weight: float = 0.0, include_joint4: bool = True
) -> TorqueReport:
    """Holding torques in the stretched horizontal pose under a payload."""
    (b2, s2), (b3, s3), (b4, s4) = _gravity_terms(p, payload_weight, include_joint4)
    t2 = b2 + s2 * payload_weight
    t3 = b3 + s3 * payload_weight
    t4 = b4 + s4 * payload_weight
    caps = torque_capacities(p)
    usage = [(0.0, 1), (t2 / caps[1], 2), (t3 / caps[2], 3), (t4 / caps[3], 4)]
    binding = max(usage)[1] if any(u > 0 for u, _ in usage) else None
    return TorqueReport(0.0, t2, t3, t4, payload_weight, binding)


def max_payload_static(p: LinkParams) -> TorqueReport:
    """Largest payload the stretched arm can hold statically."""
    (b2, s2), (b3, s3), (b4, s4) = _gravity_terms(p, 0.0, include_joint4=True)
    caps = torque_capacities(p)
    candidates = []
    for base, slope, cap, joint in ((b2, s2, caps[1], 2), (b3, s3, caps[2], 3), (b4, s4, caps[3], 4)):
        if slope > 0.0:
            candidates.append(((cap - base) / slope, joint))
    w, binding = min(candidates)
    w = max(w, 0.0)
    report = gravity_torques(p, w, include_joint4=True)
    return replace(report, binding_joint=binding)


def max_payload_dynamic(p: LinkParams) -> TorqueReport:
    """Largest payload with the acceleration margin, end link excluded.

    The inertial torque I*alpha_max of each rod is reserved on top of the
    reduced gravity sums, so the bound is lower than the static one.
    """
    i2, i3 = inertia_moments(p)
    (b2, s2), (b3, s3), _ = _gravity_terms(p, 0.0, include_joint4=False)
    b2 += i2 * p.alpha_max
    b3 += i3 * p.alpha_max
    caps = torque_capacities(p)
    candidates = [((caps[1] - b2) / s2, 2, b2, s2), ((caps[2] - b3) / s3, 3, b3, s3)]
    w, binding, _, _ = min(candidates)
    w = max(w, 0.0)
    return TorqueReport(0.0, b2 + s2 * w, b3 + s3 * w, 0.0, w, binding)


@dataclass(frozen=True)
class ProfileSample:
    t: float
    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray


def trapezoidal_profile(q0, qf, duration: float, dt: float) -> list[ProfileSample]:
    """Equal-thirds trapezoidal velocity profile sampled at dt.

    Accelerate for duration/3, cruise at v_peak = 1.5*dq/duration, then
    decelerate; the last sample lands exactly on (duration, qf).
    """
    if duration <= 0.0 or dt <= 0.0 or dt > duration / 4.0:
        raise BadTimingError("need 0 < dt <= duration/4")
    q0 = np.atleast_1d(np.asarray(q0, dtype=float))
    qf = np.atleast_1d(np.asarray(qf, dtype=float))
    if q0.shape != qf.shape:
        raise ValueError("q0 and qf must have the same shape")
    ta = duration / 3.0
    v_peak = (qf - q0) * 1.5 / duration
    accel = v_peak / ta
    n = int(math.floor(duration / dt + 1e-9))
    times = [k * dt for k in range(n + 1)]
    if times[-1] < duration - 1e-9:
        times.append(duration)
    else:
        times[-1] = duration
    samples = []
    for t in times:
        if t < ta:
            q = q0 + 0.5 * accel * t * t
            qd = accel * t
            qdd = accel
        elif t < 2.0 * ta:
            q = q0 + 0.5 * accel * ta * ta + v_peak * (t - ta)
            qd = v_peak.copy()
            qdd = np.zeros_like(v_peak)
        else:
            tr = duration - t
            q = qf - 0.5 * accel * tr * tr
            qd = accel * tr
            qdd = -accel
        samples.append(ProfileSample(t=t, q=q, qd=qd, qdd=np.asarray(qdd, dtype=float).copy()))
    return samples


def profile_to_csv(samples: list[ProfileSample], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        n = len(samples[0].q)
        header = (
            ["t"]
            + [f"q{i+1}" for i in range(n)]
            + [f"qd{i+1}" for i in range(n)]
            + [f"qdd{i+1}" for i in range(n)]
        )
        writer.writerow(header)
        for s in samples:
            writer.writerow(
                [f"{s.t:.9g}"]
                + [f"{v:.9g}" for v in s.q]
                + [f"{v:.9g}" for v in s.qd]
                + [f"{v:.9g}" for v in s.qdd]
            )


def _inertia_vector(p: LinkParams) -> np.ndarray:
    i2, i3 = inertia_moments(p)
    i1 = p.inertia_j1 if p.inertia_j1 is not None else i2
    return np.array([i1, i2, i3, p.inertia_j4])


def gravity_vector(p: LinkParams, q, payload_weight: float = 0.0) -> np.ndarray:
    """Pose-dependent gravity torques for a pose q (rad).

    Each term's stretched-pose lever arm scales with the cosine of the
    carrying link's accumulated elevation; q2 = q3 = q4 = 0 recovers the
    horizontal sums and a vertical arm gives zero.
    """
    q = np.asarray(q, dtype=float)
    c2 = math.cos(q[1])
    c23 = math.cos(q[1] + q[2])
    c234 = math.cos(q[1] + q[2] + q[3])
    wl = payload_weight
    arm2 = p.L2 * c2
    arm3 = p.L3 * c23
    arm4 = p.L4 * c234
    t2 = (
        p.W2 * arm2 / 2.0
        + p.WJ3 * arm2
        + p.W3 * (arm2 + arm3 / 2.0)
        + p.WJ4 * (arm2 + arm3)
        + p.W4 * (arm2 + arm3 + arm4 / 2.0)
        + wl * (arm2 + arm3 + arm4)
    )
    t3 = (
        p.W3 * arm3 / 2.0
        + p.WJ4 * arm3
        + p.W4 * (arm3 + arm4 / 2.0)
        + wl * (arm3 + arm4)
    )
    t4 = p.W4 * arm4 / 2.0 + wl * arm4
    return np.array([0.0, t2, t3, t4])


def inverse_dynamics(p: LinkParams, sample: ProfileSample, payload_weight: float = 0.0) -> np.ndarray:
    """Joint torques that realise a profile sample: gravity plus I*qdd."""
    g = gravity_vector(p, sample.q, payload_weight)
    return g + _inertia_vector(p) * np.asarray(sample.qdd, dtype=float)


def forward_dynamics_step(
    p: LinkParams, q, qd, torque, dt: float, payload_weight: float = 0.0
) -> tuple[np.ndarray, np.ndarray]:
    """One semi-implicit Euler step of the decoupled joint model."""
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    qdd = (np.asarray(torque, dtype=float) - gravity_vector(p, q, payload_weight)) / _inertia_vector(p)
    qd_next = qd + qdd * dt
    q_next = q + qd_next * dt
    return q_next, qd_next

import math

import numpy as np
import pytest
from dataclasses import replace

from robofeed.dynamics import (
    BadTimingError,
    LinkParams,
    forward_dynamics_step,
    gravity_torques,
    gravity_vector,
    inertia_moments,
    inverse_dynamics,
    max_payload_dynamic,
    max_payload_static,
    profile_to_csv,
    torque_capacities,
    trapezoidal_profile,
)

P = LinkParams()


def test_holding_torques_under_reference_payload():
    rep = gravity_torques(P, payload_weight=0.699)
    assert rep.t2g == pytest.approx(1.0246, abs=1e-3)
    assert rep.t3g == pytest.approx(0.2474, abs=1e-3)
    assert rep.binding_joint == 4  # the end-link drive has the least margin


def test_capacities_apply_belt_efficiency():
    caps = torque_capacities(P)
    assert caps[0] == pytest.approx(P.T1 * 0.9)
    assert caps[3] == pytest.approx(P.T4)  # direct drive, no belt


def test_static_payload_bound():
    rep = max_payload_static(P)
    assert rep.payload_weight == pytest.approx(0.7172, abs=2e-4)
    assert rep.binding_joint == 4
    # at the bound the binding joint sits exactly on its capacity
    held = gravity_torques(P, payload_weight=rep.payload_weight)
    assert held.t4g == pytest.approx(torque_capacities(P)[3], rel=1e-9)


def test_dynamic_payload_bound():
    rep = max_payload_dynamic(P)
    assert rep.payload_weight == pytest.approx(1.6812, abs=2e-4)
    assert rep.binding_joint == 2
    assert rep.payload_weight > max_payload_static(P).payload_weight


def test_dynamic_bound_joint3_when_joint2_unconstrained():
    # removing the shoulder constraint exposes the elbow's own bound
    huge = replace(P, T2=1e9)
    rep = max_payload_dynamic(huge)
    assert rep.binding_joint == 3
    assert rep.payload_weight == pytest.approx(19.5509, abs=2e-3)


def test_inertia_moments_and_margins():
    i2, i3 = inertia_moments(P)
    assert i2 == pytest.approx(P.m2 * P.L2**2 / 3.0)
    assert i3 == pytest.approx(P.m3 * P.L3**2 / 3.0)
    assert i2 * P.alpha_max == pytest.approx(0.018516, abs=2e-5)
    assert i3 * P.alpha_max == pytest.approx(0.0058875, abs=2e-6)


def test_gravity_vector_poses():
    horizontal = gravity_vector(P, [0.0, 0.0, 0.0, 0.0])
    rep = gravity_torques(P)
    assert horizontal[1] == pytest.approx(rep.t2g)
    assert horizontal[2] == pytest.approx(rep.t3g)
    vertical = gravity_vector(P, [0.0, math.pi / 2, 0.0, 0.0])
    assert np.allclose(vertical, 0.0, atol=1e-12)
    raised = gravity_vector(P, [0.0, 0.5, 0.0, 0.0])
    assert 0.0 < raised[1] < horizontal[1]


def test_trapezoid_profile_shape():
    q0 = np.zeros(4)
    qf = np.array([0.9, -0.6, 0.3, 1.2])
    duration, dt = 3.0, 0.01
    samples = trapezoidal_profile(q0, qf, duration, dt)
    assert samples[0].t == 0.0
    assert samples[-1].t == pytest.approx(duration)
    assert np.allclose(samples[-1].q, qf, atol=1e-9)
    v_peak = 1.5 * (qf - q0) / duration
    vmax = np.max(np.abs([s.qd for s in samples]), axis=0)
    assert np.allclose(vmax, np.abs(v_peak), rtol=1e-9)
    # cruise third has zero acceleration
    mid = [s for s in samples if duration / 3 + dt < s.t < 2 * duration / 3 - dt]
    assert all(np.allclose(s.qdd, 0.0) for s in mid)
    # velocity integrates back to the displacement
    disp = np.sum([s.qd for s in samples[1:]], axis=0) * dt
    assert np.allclose(disp, qf - q0, atol=5e-3)


def test_trapezoid_rejects_bad_timing():
    with pytest.raises(BadTimingError):
        trapezoidal_profile([0.0], [1.0], 1.0, 0.3)
    with pytest.raises(BadTimingError):
        trapezoidal_profile([0.0], [1.0], 0.0, 0.001)


def test_profile_csv_header(tmp_path):
    samples = trapezoidal_profile(np.zeros(4), np.ones(4), 2.0, 0.1)
    out = tmp_path / "profile.csv"
    profile_to_csv(samples, out)
    header = out.read_text().splitlines()[0]
    assert header.startswith("t,q1,q2,q3,q4,qd1")
    assert header.endswith("qdd4")


def test_inverse_then_forward_dynamics_round_trip():
    """Replaying inverse-dynamics torques reproduces the reference motion.

    The check runs below the horizontal where gravity is restoring; the
    raised side is an unstable equilibrium for open-loop torque replay and
    diverges for any integrator.
    """
    q0 = np.zeros(4)
    qf = np.array([0.8, -0.5, -0.6, -0.3])
    duration, dt = 3.0, 1e-3
    samples = trapezoidal_profile(q0, qf, duration, dt)
    q = samples[0].q.copy()
    qd = samples[0].qd.copy()
    worst = 0.0
    for s in samples[:-1]:
        tau = inverse_dynamics(P, s)
        q, qd = forward_dynamics_step(P, q, qd, tau, dt)
    worst = np.max(np.abs(q - samples[-1].q))
    assert worst < 8e-4


def test_forward_step_holds_under_exact_gravity():
    q = np.array([0.2, -0.4, -0.3, -0.1])
    tau = gravity_vector(P, q)
    q2, qd2 = forward_dynamics_step(P, q, np.zeros(4), tau, 1e-3)
    assert np.allclose(q2, q, atol=1e-12)
    assert np.allclose(qd2, 0.0, atol=1e-12)


def test_payload_scales_gravity_linearly():
    rng = np.random.Generator(np.random.Philox(2))
    for _ in range(20):
        q = rng.uniform(-0.8, 0.8, size=4)
        g0 = gravity_vector(P, q, 0.0)
        g1 = gravity_vector(P, q, 1.0)
        g2 = gravity_vector(P, q, 2.0)
        assert np.allclose(g2 - g1, g1 - g0, atol=1e-12)

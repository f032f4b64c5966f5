"""Discrete-time simulation of the full feeding stack.

One tick = one scenario dt:

1. queued signals (operator and internal) drive the supervisor,
2. the active state's behaviour runs: target detection, sweep search,
   image servoing with the stability gate, the approach hand-off, dwells,
3. every stepper advances one tick toward its target.

Joint angles are never stored separately: the stepper positions are the
world truth and q is derived from them, so commanded steps and rendered
angles cannot drift apart. All randomness comes from one counter-based
generator seeded by the scenario, which makes runs bit-reproducible.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .kinematics import (
    BASE_HEIGHT,
    DEFAULT_TABLE,
    KinematicsError,
    clamp_to_limits,
    inverse_kinematics,
)
from .dynamics import LinkParams, max_payload_dynamic
from .motor import (
    DEFAULT_PLAN,
    StepperMotor,
    StepperPlan,
    angle_to_steps,
    apply_coupling,
    steps_to_angle,
    stepper_advance,
    stopping_target,
)
from .vision import (
    MAX_APPROACH_ATTEMPTS,
    CameraModel,
    ServoConfig,
    camera_pose,
    detect_target_sim,
    feed_point_camera,
    ibvs_error,
    ibvs_step,
    search_sweep,
    shrink_approach,
    stability_gate,
)
from .scenario import Scenario
from .supervisor import FeedingState, Signal, Trace, is_transient, step

MM_PER_M = 1000.0

# states in which the camera is hunting for / tracking a target
_FOOD_STATES = (FeedingState.PRODUCT_SEARCH, FeedingState.PRODUCT_POSITIONING)
_FACE_STATES = (FeedingState.FACE_SEARCH, FeedingState.MOVE_TO_FACE)
_SEARCH_STATES = (FeedingState.PRODUCT_SEARCH, FeedingState.FACE_SEARCH)
_SERVO_STATES = (FeedingState.PRODUCT_POSITIONING, FeedingState.MOVE_TO_FACE)
_FREEZE_STATES = (FeedingState.EMERGENCY_STOP, FeedingState.WAITING, FeedingState.NO_OBJECTS)

EVENT_TAIL = 20


@dataclass
class World:
    """Mutable simulation state; build with make_world, advance with tick."""

    scenario: Scenario
    plan: StepperPlan = DEFAULT_PLAN
    camera: CameraModel = field(default_factory=CameraModel)
    servo: ServoConfig = field(default_factory=ServoConfig)
    t: float = 0.0
    state: FeedingState = FeedingState.WAITING
    motors: list = field(default_factory=list)
    target_steps: list = field(default_factory=list)
    base_steps: list = field(default_factory=list)
    rng: np.random.Generator = None
    trace: Trace = field(default_factory=Trace)
    pending: list = field(default_factory=list)
    schedule_index: int = 0
    gate_history: list = field(default_factory=list)
    fail_count: int = 0
    approach_planned: bool = False
    approach_attempts: int = 0
    state_entered_t: float = 0.0
    events: list = field(default_factory=list)
    warned_payload: bool = False
    min_servo_error: float = math.inf

    table = DEFAULT_TABLE
    detection = None
    servo_error = None

    @property
    def q(self) -> np.ndarray:
        return np.array(
            [steps_to_angle(m.position, i, self.plan) for i, m in enumerate(self.motors)]
        )

    @property
    def settled(self) -> bool:
        for i, m in enumerate(self.motors):
            if abs(m.position - self.target_steps[i]) > 1e-9:
                return False
            if abs(m.rate) > self.plan.accels[i] * self.scenario.dt + 1e-9:
                return False
        return True


def make_world(scenario: Scenario) -> World:
    w = World(scenario=scenario, plan=scenario.stepper_plan(), servo=scenario.servo_config())
    w.rng = np.random.Generator(np.random.Philox(scenario.seed))
    w.base_steps = [angle_to_steps(a, i, w.plan) for i, a in enumerate(scenario.initial_q)]
    w.target_steps = list(w.base_steps)
    w.motors = [StepperMotor(position=float(s), rate=0.0) for s in w.base_steps]
    bound = max_payload_dynamic(LinkParams()).payload_weight
    if scenario.payload_weight > bound:
        w.warned_payload = True
        _event(w, f"payload {scenario.payload_weight:.3f} N exceeds dynamic bound {bound:.3f} N")
    return w


def _event(w: World, message: str) -> None:
    w.events.append({"t": round(w.t, 9), "message": message})
    del w.events[:-EVENT_TAIL]


def _emit(w: World, signal: Signal) -> None:
    """Queue an internally generated signal for the next tick."""
    w.pending.append(signal)


def queue_signal(w: World, name: str) -> None:
    w.pending.append(Signal(name))


def _enter(w: World, state: FeedingState) -> None:
    w.state = state
    w.state_entered_t = w.t
    w.gate_history.clear()
    w.fail_count = 0
    w.approach_planned = False
    w.approach_attempts = 0
    if state in _FREEZE_STATES:
        _freeze_targets(w)
        if state is FeedingState.EMERGENCY_STOP:
            _event(w, "emergency stop: steppers braking to rest")


def _freeze_targets(w: World) -> None:
    """Replace every target with the nearest step reachable by braking."""
    for i, m in enumerate(w.motors):
        w.target_steps[i] = stopping_target(m, w.plan.accels[i])
        w.base_steps[i] = w.target_steps[i]


def dispatch_targets(w: World, q_desired) -> None:
    """Send joint angles to the steppers through the belt compensation.

    Deltas are computed against the last commanded (uncoupled) step
    targets; the physical targets accumulate the coupled deltas.
    """
    if w.state is FeedingState.EMERGENCY_STOP:
        return
    q_desired = clamp_to_limits(w.table, q_desired)
    new_base = [angle_to_steps(a, i, w.plan) for i, a in enumerate(q_desired)]
    delta = [new_base[i] - w.base_steps[i] for i in range(4)]
    coupled = apply_coupling(delta, w.plan)
    for i in range(4):
        w.target_steps[i] += coupled[i]
    w.base_steps = new_base


def jog_joint(w: World, joint: int, delta_rad: float) -> bool:
    """Operator nudge of one joint target. Ignored during an emergency stop."""
    if not 0 <= joint <= 3:
        raise ValueError("joint must be 0..3")
    if w.state is FeedingState.EMERGENCY_STOP:
        return False
    q_target = _target_q(w)
    q_target[joint] += delta_rad
    dispatch_targets(w, q_target)
    return True


def _current_target_point(w: World):
    if w.state in _FOOD_STATES:
        return np.asarray(w.scenario.food_world) * MM_PER_M
    if w.state in _FACE_STATES:
        nose = np.asarray(w.scenario.nose_world) + np.asarray(w.scenario.nose_drift) * w.t
        return nose * MM_PER_M
    return None


def _target_q(w: World) -> np.ndarray:
    return np.array([steps_to_angle(s, i, w.plan) for i, s in enumerate(w.base_steps)])


def _run_search(w: World) -> None:
    if not w.settled:
        return
    if w.detection is not None and w.detection.found:
        _emit(
            w,
            Signal.PRODUCT_FOUND
            if w.state is FeedingState.PRODUCT_SEARCH
            else Signal.FACE_ACQUIRED,
        )
        return
    if w.fail_count >= w.scenario.search_attempt_limit:
        _event(w, "search exhausted: no target after sweep limit")
        _emit(w, Signal.SEARCH_FAILED)
        return
    q_next = _target_q(w)
    q_next[0] += search_sweep(w.fail_count, w.servo)
    w.fail_count += 1
    dispatch_targets(w, q_next)


def _plan_approach(w: World) -> None:
    """Convert the last detection into joint targets for the feed move.

    The point is scaled out of the image frame, mapped through the camera
    pose, and solved with the end link aimed along the target's elevation
    from the shoulder. On an unreachable solve the depth is shrunk and the
    solve retried; running out of retries abandons the cycle.
    """
    pose = camera_pose(w.table, w.q)
    point_cam = feed_point_camera(w.detection) * MM_PER_M
    target = pose.transform_point(point_cam)
    depth0 = float(np.linalg.norm(point_cam))
    while w.approach_attempts < MAX_APPROACH_ATTEMPTS:
        attempt = w.approach_attempts
        w.approach_attempts += 1
        if depth0 > 0.0:
            scale = shrink_approach(depth0, attempt) / depth0
            pos = pose.translation + (target - pose.translation) * scale
        else:
            pos = target
        elevation = math.atan2(pos[2] - BASE_HEIGHT, math.hypot(pos[0], pos[1]))
        try:
            q_sol = inverse_kinematics(pos, elevation)
        except KinematicsError:
            continue
        dispatch_targets(w, q_sol)
        w.approach_planned = True
        _event(w, f"approach planned on retry {attempt}")
        return
    _event(w, "approach unreachable after retry limit")
    _emit(w, Signal.SEARCH_FAILED)


def _run_servo(w: World) -> None:
    found = w.detection is not None and w.detection.found
    if found and not w.approach_planned:
        w.gate_history.append((w.t, ibvs_error(w.detection)))
        cutoff = w.t - 2.0 * w.servo.stable_duration
        while w.gate_history and w.gate_history[0][0] < cutoff:
            w.gate_history.pop(0)
    if w.approach_planned:
        if w.settled:
            _emit(w, Signal.FEED_POSE_REACHED)
        return
    if not w.settled:
        return
    if not found:
        w.fail_count += 1
        if w.fail_count >= w.scenario.search_attempt_limit:
            _event(w, "target lost while tracking")
            _emit(w, Signal.SEARCH_FAILED)
        return
    w.fail_count = 0
    if stability_gate(w.gate_history, w.servo, w.t):
        if w.state is FeedingState.PRODUCT_POSITIONING:
            _emit(w, Signal.POSITIONING_DONE)
        else:
            _plan_approach(w)
        return
    dispatch_targets(w, ibvs_step(_target_q(w), w.detection, w.servo, w.table))


def _run_dwell(w: World) -> None:
    if not w.settled:
        return
    if w.state is FeedingState.GRASP:
        if w.t - w.state_entered_t >= w.scenario.grasp_duration:
            if w.scenario.grasp_success:
                _emit(w, Signal.GRASP_CONFIRMED)
            elif w.fail_count == 0:
                # confirmation never arrives; the cycle waits for the operator
                w.fail_count = 1
                _event(w, "grasp not confirmed")
    elif w.state is FeedingState.FEEDING:
        if w.t - w.state_entered_t >= w.scenario.feed_duration:
            _emit(w, Signal.FEEDING_DONE)


def _consume_signals(w: World) -> None:
    while w.schedule_index < len(w.scenario.signals):
        item = w.scenario.signals[w.schedule_index]
        if item.t > w.t + 1e-12:
            break
        w.pending.append(Signal(item.u))
        w.schedule_index += 1
    queued, w.pending = w.pending, []
    for sig in queued:
        nxt = step(w.state, sig)
        w.trace.append(round(w.t, 9), w.state, sig, nxt)
        if nxt is not w.state:
            _enter(w, nxt)
        while is_transient(w.state):
            resolved = step(w.state, Signal.REPEAT_DONE)
            w.trace.append(round(w.t, 9), w.state, Signal.REPEAT_DONE, resolved)
            _enter(w, resolved)


def tick(w: World) -> None:
    _consume_signals(w)

    point = _current_target_point(w)
    if point is None:
        w.detection = None
        w.servo_error = None
    else:
        pose = camera_pose(w.table, w.q)
        w.detection = detect_target_sim(
            w.camera, pose, point, noise_px=w.scenario.noise_px, rng=w.rng
        )
        w.servo_error = ibvs_error(w.detection) if w.detection.found else None
        if w.servo_error is not None:
            w.min_servo_error = min(w.min_servo_error, w.servo_error)

    if w.state in _SEARCH_STATES:
        _run_search(w)
    elif w.state in _SERVO_STATES:
        _run_servo(w)
    elif w.state in (FeedingState.GRASP, FeedingState.FEEDING):
        _run_dwell(w)

    for i in range(4):
        w.motors[i] = stepper_advance(
            w.motors[i],
            w.target_steps[i],
            w.plan.max_rates[i],
            w.plan.accels[i],
            w.scenario.dt,
        )
    w.t += w.scenario.dt


def snapshot(w: World) -> dict:
    det = None
    if w.detection is not None:
        det = {
            "found": w.detection.found,
            "x_offset": w.detection.x_offset,
            "y_offset": w.detection.y_offset,
            "distance": w.detection.distance,
            "box_w": w.detection.box_w,
            "box_h": w.detection.box_h,
        }
    return {
        "t": round(w.t, 9),
        "state": w.state.value,
        "q": [float(v) for v in w.q],
        "steps": [m.steps for m in w.motors],
        "targets": list(w.target_steps),
        "settled": w.settled,
        "detection": det,
        "servo_error": w.servo_error,
        "events": list(w.events),
    }


@dataclass
class RunResult:
    snapshots: list
    trace: Trace
    final_state: str
    duration: float
    warned_payload: bool
    payload_weight: float
    payload_bound: float
    min_servo_error: float

    def summary(self) -> dict:
        return {
            "final_state": self.final_state,
            "duration": round(self.duration, 9),
            "ticks": len(self.snapshots),
            "states_visited": [s.value for s in self.trace.states_visited()],
            "min_servo_error": None
            if math.isinf(self.min_servo_error)
            else round(self.min_servo_error, 6),
            "payload": {
                "weight": self.payload_weight,
                "dynamic_bound": round(self.payload_bound, 6),
                "warning": self.warned_payload,
            },
        }


def run_headless(scenario: Scenario, duration: float, out_dir=None, snapshot_every: int = 1) -> RunResult:
    """Run a scenario for a fixed span and optionally write the log files.

    run.jsonl holds one snapshot per line, trace.jsonl the supervisor rows,
    summary.json the aggregate. Keys are sorted so identical runs produce
    byte-identical files.
    """
    if duration <= 0.0:
        raise ValueError("duration must be positive")
    if snapshot_every < 1:
        raise ValueError("snapshot_every must be >= 1")
    w = make_world(scenario)
    ticks = int(round(duration / scenario.dt))
    snaps = []
    for k in range(ticks):
        tick(w)
        if k % snapshot_every == 0:
            snaps.append(snapshot(w))
    result = RunResult(
        snapshots=snaps,
        trace=w.trace,
        final_state=w.state.value,
        duration=w.t,
        warned_payload=w.warned_payload,
        payload_weight=scenario.payload_weight,
        payload_bound=max_payload_dynamic(LinkParams()).payload_weight,
        min_servo_error=w.min_servo_error,
    )
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "run.jsonl"), "w") as fh:
            for snap in snaps:
                fh.write(json.dumps(snap, sort_keys=True) + "\n")
        w.trace.to_jsonl(os.path.join(out_dir, "trace.jsonl"))
        with open(os.path.join(out_dir, "summary.json"), "w") as fh:
            json.dump(result.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return result

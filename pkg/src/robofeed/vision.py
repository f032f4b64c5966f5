"""Camera model and visual servoing for the feeding arm.

The eye-in-hand camera sits on the forearm link. Detection is simulated by
projecting the target point through the calibrated pinhole model; the servo
law nudges the first two joints proportionally to the pixel offsets until
the offset radius stays inside the threshold long enough.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import yaml

from .kinematics import DEFAULT_TABLE, DHTable, Transform, forward_kinematics

MM_PER_M = 1000.0


class VisionError(Exception):
    pass


class BehindCameraError(VisionError):
    """Projection requested for a point at or behind the image plane."""


class EmptyBoxError(VisionError):
    """Distance requested for a degenerate detection box."""


class NotFoundError(VisionError):
    """Servo error requested for a detection that found nothing."""


class CalibrationFormatError(VisionError):
    """Calibration file missing required fields."""


@dataclass(frozen=True)
class CameraModel:
    width: int = 640
    height: int = 480
    fx: float = 1410.98768
    fy: float = 1411.54333
    cx: float = 153.16333
    cy: float = 312.17826
    # plumb-bob distortion (k1, k2, p1, p2, k3)
    dist: tuple[float, float, float, float, float] = (
        -0.091805,
        0.008574,
        0.002489,
        -0.030940,
        0.0,
    )
    rectification: tuple[float, ...] = (1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0)
    projection: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")
        if self.fx <= 0.0 or self.fy <= 0.0:
            raise ValueError("focal lengths must be positive")


def load_calibration(path) -> CameraModel:
    """Parse the camera calibration file (image size, camera matrix,
    distortion, rectification and projection blocks)."""
    with open(path) as fh:
        data = yaml.safe_load(fh)
    try:
        width = int(data["image_width"])
        height = int(data["image_height"])
        k = [float(v) for v in data["camera_matrix"]["data"]]
        dist = [float(v) for v in data["distortion_coefficients"]["data"]]
    except (KeyError, TypeError) as exc:
        raise CalibrationFormatError(f"missing calibration field: {exc}") from exc
    if len(k) != 9:
        raise CalibrationFormatError("camera_matrix must have 9 entries")
    if len(dist) != 5:
        raise CalibrationFormatError("distortion_coefficients must have 5 entries")
    rect = tuple(float(v) for v in data.get("rectification_matrix", {}).get("data", ()))
    proj = tuple(float(v) for v in data.get("projection_matrix", {}).get("data", ()))
    return CameraModel(
        width=width,
        height=height,
        fx=k[0],
        fy=k[4],
        cx=k[2],
        cy=k[5],
        dist=tuple(dist),
        rectification=rect or (1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0),
        projection=proj,
    )


def project(cam: CameraModel, point_cam) -> tuple[float, float]:
    """Pixel coordinates of a camera-frame point (any consistent length
    unit, z forward and positive)."""
    x3, y3, z3 = (float(v) for v in point_cam)
    if z3 <= 1e-6:
        raise BehindCameraError("point not in front of the camera")
    x = x3 / z3
    y = y3 / z3
    k1, k2, p1, p2, k3 = cam.dist
    r2 = x * x + y * y
    radial = 1.0 + k1 * r2 + k2 * r2 * r2 + k3 * r2 * r2 * r2
    xd = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x)
    yd = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y
    return (cam.fx * xd + cam.cx, cam.fy * yd + cam.cy)


def undistort_pixel(
    cam: CameraModel, pixel, iterations: int = 20, tol: float = 1e-6
) -> tuple[float, float]:
    """Invert the distortion by fixed-point iteration; returns the pixel the
    ideal pinhole would have produced."""
    u, v = (float(p) for p in pixel)
    xd = (u - cam.cx) / cam.fx
    yd = (v - cam.cy) / cam.fy
    k1, k2, p1, p2, k3 = cam.dist
    x, y = xd, yd
    for _ in range(iterations):
        r2 = x * x + y * y
        radial = 1.0 + k1 * r2 + k2 * r2 * r2 + k3 * r2 * r2 * r2
        dx = 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x)
        dy = p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y
        x_new = (xd - dx) / radial
        y_new = (yd - dy) / radial
        if max(abs(x_new - x) * cam.fx, abs(y_new - y) * cam.fy) < tol:
            x, y = x_new, y_new
            break
        x, y = x_new, y_new
    return (cam.fx * x + cam.cx, cam.fy * y + cam.cy)


def estimate_distance(box_w: float, box_h: float) -> float:
    """Range in cm from the detection box area (area falls as 1/range)."""
    if box_w <= 0.0 or box_h <= 0.0:
        raise EmptyBoxError("detection box must have positive area")
    return 250000.0 / (box_w * box_h)


@dataclass(frozen=True)
class NoseDetection:
    found: bool
    x_offset: float = 0.0
    y_offset: float = 0.0
    distance: float = 0.0
    box_w: float = 0.0
    box_h: float = 0.0


# Detector metadata kept with the model it emulates (not used by the sim).
HAAR_SCALE_FACTOR = 1.3
HAAR_MIN_NEIGHBORS = 8


def detect_target_sim(
    cam: CameraModel,
    cam_pose_world: Transform,
    target_world,
    noise_px: float = 0.0,
    rng: np.random.Generator | None = None,
) -> NoseDetection:
    """Simulated detector: projects the target through the camera pose.

    Offsets are measured from the image centre, y up. The box side is
    synthesised from the true range so that estimate_distance inverts it.
    Pose units are millimetres.
    """
    p_cam = cam_pose_world.inverse().transform_point(target_world)
    if p_cam[2] <= 1e-6:
        return NoseDetection(found=False)
    try:
        u, v = project(cam, p_cam)
    except BehindCameraError:
        return NoseDetection(found=False)
    if not (0.0 <= u <= cam.width and 0.0 <= v <= cam.height):
        return NoseDetection(found=False)
    distance_cm = float(np.linalg.norm(p_cam)) / 10.0
    side = max(1, round(math.sqrt(250000.0 / distance_cm)))
    x_off = u - cam.width / 2.0
    y_off = cam.height / 2.0 - v
    if noise_px > 0.0:
        if rng is None:
            raise ValueError("noise_px > 0 requires an rng")
        x_off += noise_px * rng.standard_normal()
        y_off += noise_px * rng.standard_normal()
    return NoseDetection(
        found=True,
        x_offset=x_off,
        y_offset=y_off,
        distance=estimate_distance(side, side),
        box_w=side,
        box_h=side,
    )


@dataclass(frozen=True)
class ServoConfig:
    x_sensitivity: float = 0.001
    y_sensitivity: float = 0.001
    radius_threshold: float = 20.0
    stable_duration: float = 3.0
    rotation_factor_init: float = 5.0
    rotation_increment: float = 10.0
    initial_direction: int = -1

    def __post_init__(self) -> None:
        if self.radius_threshold <= 0.0 or self.stable_duration <= 0.0:
            raise ValueError("threshold and duration must be positive")


def ibvs_error(detection: NoseDetection) -> float:
    if not detection.found:
        raise NotFoundError("no detection to servo on")
    return math.hypot(detection.x_offset, detection.y_offset)


def ibvs_step(
    q, detection: NoseDetection, cfg: ServoConfig, table: DHTable = DEFAULT_TABLE
) -> np.ndarray:
    """Joint-space servo nudge from the pixel offsets, limit-clamped."""
    if not detection.found:
        raise NotFoundError("no detection to servo on")
    q = np.asarray(q, dtype=float).copy()
    q[0] += detection.x_offset * cfg.x_sensitivity
    q[1] += detection.y_offset * cfg.y_sensitivity
    q[0] = min(max(q[0], table.rows[0].limit_lo), table.rows[0].limit_hi)
    q[1] = min(max(q[1], table.rows[1].limit_lo), table.rows[1].limit_hi)
    return q


def search_sweep(attempt: int, cfg: ServoConfig) -> float:
    """Base-yaw increment (rad) for the k-th failed search attempt.

    The magnitude grows by rotation_increment per attempt and the direction
    alternates, so the scan fans out around the start."""
    if attempt < 0:
        raise ValueError("attempt must be >= 0")
    magnitude = cfg.rotation_factor_init + cfg.rotation_increment * attempt
    direction = cfg.initial_direction * (-1) ** attempt
    return math.radians(direction * magnitude)


def stability_gate(history, cfg: ServoConfig, now: float) -> bool:
    """True when the servo error has stayed inside the threshold for the
    whole stable_duration window ending at `now`.

    history: iterable of (t, error) samples in time order. Any excursion
    restarts the window; an empty history never gates.
    """
    good_start = None
    covered_from = None
    for t, err in history:
        if t > now:
            break
        if covered_from is None:
            covered_from = t
        if err <= cfg.radius_threshold:
            if good_start is None:
                good_start = t
        else:
            good_start = None
    if good_start is None or covered_from is None:
        return False
    return now - good_start >= cfg.stable_duration


@dataclass(frozen=True)
class HandEyeChain:
    cam_from_calib: Transform
    calib_from_base: Transform
    base_from_hand: Transform


def hand_eye_compose(chain: HandEyeChain) -> Transform:
    return chain.cam_from_calib @ chain.calib_from_base @ chain.base_from_hand


# Fixed mount of the camera bracket on the forearm link (mm, fixed-axis rpy).
CAMERA_MOUNT = Transform.from_rpy(
    xyz=(0.0555 * MM_PER_M, -0.044098 * MM_PER_M, 0.11559 * MM_PER_M),
    rpy=(1.5498, 0.0, 0.0),
)

# Bracket body frame to optical frame (x right, y down, z forward): the
# sensor looks along -z of the bracket and is rolled a quarter turn, which
# makes both servo gains act as negative feedback at the working poses.
OPTICAL_ALIGN = Transform(
    rotation=np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]]),
    translation=np.zeros(3),
)


def camera_pose(table: DHTable, q) -> Transform:
    """World pose of the optical frame for arm pose q (mm)."""
    return forward_kinematics(table, q, upto=3) @ CAMERA_MOUNT @ OPTICAL_ALIGN


# Scale constants of the approach handoff: pixels to metres sideways,
# range (cm) to metres along the view axis, and a fixed drop below the
# detected point so the tool lands at the mouth rather than the nose.
FEED_X_SCALE = 0.005
FEED_DEPTH_SCALE = 0.0080
FEED_Y_SCALE = 0.005
FEED_Y_BIAS_PX = 10.0
MAX_APPROACH_ATTEMPTS = 10


def feed_point_camera(detection: NoseDetection) -> np.ndarray:
    """Approach point in the optical frame (metres): right, down, forward."""
    if not detection.found:
        raise NotFoundError("no detection to aim at")
    return np.array(
        [
            FEED_X_SCALE * detection.x_offset,
            FEED_Y_SCALE * (detection.y_offset + FEED_Y_BIAS_PX),
            FEED_DEPTH_SCALE * detection.distance,
        ]
    )


def shrink_approach(initial_depth: float, attempt: int) -> float:
    """Shorter forward depth for a failed plan: 10% of the initial depth is
    taken off per retry."""
    return initial_depth - initial_depth * 0.1 * (attempt + 1)

"""Kinematic model of the 4-DOF feeding arm.

Denavit-Hartenberg frame chain, closed-form position model, analytic
elbow-branch inverse kinematics, position Jacobian, mobility count and
Monte-Carlo workspace sampling. Lengths are millimetres, angles radians.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# Base column height (mm) and link lengths along x (mm).
BASE_HEIGHT = 155.5
LINK_OFFSETS_D = (155.5, 74.0, -67.7, -6.0)
LINK_LENGTHS_A = (0.0, 144.0, 120.0, 63.0)
LINK_TWISTS = (math.pi / 2.0, 0.0, 0.0, 0.0)
JOINT_LIMITS_DEG = ((-180.0, 180.0), (-144.0, 144.0), (-155.0, 155.0), (-180.0, 180.0))

# Arm reach from the shoulder point (0, 0, BASE_HEIGHT), mm.
REACH_RADIUS = LINK_LENGTHS_A[1] + LINK_LENGTHS_A[2] + LINK_LENGTHS_A[3]


class KinematicsError(Exception):
    pass


class UnreachableError(KinematicsError):
    """Target outside the elbow chain's annulus for the requested wrist angle."""


class SingularBaseError(KinematicsError):
    """Target on the base axis; the base yaw is undefined."""


@dataclass(frozen=True)
class DHRow:
    """One joint row: rotation theta about z, offset d along z, length a
    along x, twist alpha about x. theta_offset is added to the joint angle."""

    theta_offset: float
    d: float
    a: float
    alpha: float
    limit_lo: float
    limit_hi: float

    def __post_init__(self) -> None:
        if not self.limit_lo < self.limit_hi:
            raise ValueError("joint limits must satisfy lo < hi")
        # this arm only uses twists of 0 and +90 degrees
        if not (abs(self.alpha) < 1e-12 or abs(self.alpha - math.pi / 2.0) < 1e-12):
            raise ValueError("twist must be 0 or pi/2 for this arm")


@dataclass(frozen=True)
class DHTable:
    rows: tuple[DHRow, ...]

    def __post_init__(self) -> None:
        if len(self.rows) != 4:
            raise ValueError("the arm has exactly four joints")

    @classmethod
    def default(cls) -> "DHTable":
        rows = tuple(
            DHRow(
                theta_offset=0.0,
                d=LINK_OFFSETS_D[i],
                a=LINK_LENGTHS_A[i],
                alpha=LINK_TWISTS[i],
                limit_lo=math.radians(JOINT_LIMITS_DEG[i][0]),
                limit_hi=math.radians(JOINT_LIMITS_DEG[i][1]),
            )
            for i in range(4)
        )
        return cls(rows=rows)


DEFAULT_TABLE = DHTable.default()


@dataclass(frozen=True)
class Transform:
    """Rigid transform: 3x3 rotation plus translation vector."""

    rotation: np.ndarray
    translation: np.ndarray

    @classmethod
    def identity(cls) -> "Transform":
        return cls(rotation=np.eye(3), translation=np.zeros(3))

    @classmethod
    def from_rpy(cls, xyz, rpy) -> "Transform":
        """Fixed-axis roll/pitch/yaw convention: R = Rz(y) @ Ry(p) @ Rx(r)."""
        r, p, y = rpy
        cr, sr = math.cos(r), math.sin(r)
        cp, sp = math.cos(p), math.sin(p)
        cy, sy = math.cos(y), math.sin(y)
        rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
        ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
        rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
        return cls(rotation=rz @ ry @ rx, translation=np.asarray(xyz, dtype=float))

    def compose(self, other: "Transform") -> "Transform":
        return Transform(
            rotation=self.rotation @ other.rotation,
            translation=self.rotation @ other.translation + self.translation,
        )

    def __matmul__(self, other: "Transform") -> "Transform":
        return self.compose(other)

    def inverse(self) -> "Transform":
        rt = self.rotation.T
        return Transform(rotation=rt, translation=-rt @ self.translation)

    def transform_point(self, point) -> np.ndarray:
        return self.rotation @ np.asarray(point, dtype=float) + self.translation

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m


def dh_transform(row: DHRow, theta: float) -> Transform:
    """Standard DH link matrix for joint angle theta (offset applied)."""
    th = row.theta_offset + theta
    ct, st = math.cos(th), math.sin(th)
    ca, sa = math.cos(row.alpha), math.sin(row.alpha)
    rotation = np.array(
        [
            [ct, -st * ca, st * sa],
            [st, ct * ca, -ct * sa],
            [0.0, sa, ca],
        ]
    )
    translation = np.array([row.a * ct, row.a * st, row.d])
    return Transform(rotation=rotation, translation=translation)


def forward_kinematics(table: DHTable, q, upto: int = 4) -> Transform:
    """Chain product of the first `upto` link transforms.

    Out-of-limit joint angles are allowed here; limits are advisory and
    checked separately with within_limits().
    """
    q = np.asarray(q, dtype=float)
    t = Transform.identity()
    for i in range(upto):
        t = t @ dh_transform(table.rows[i], float(q[i]))
    return t


def within_limits(table: DHTable, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return np.array(
        [table.rows[i].limit_lo <= q[i] <= table.rows[i].limit_hi for i in range(4)]
    )


def clamp_to_limits(table: DHTable, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    lo = np.array([r.limit_lo for r in table.rows])
    hi = np.array([r.limit_hi for r in table.rows])
    return np.clip(q, lo, hi)


def closed_form_position(q) -> np.ndarray:
    """End point of the arm from the planar projection of the DH chain.

    The elbow plane rotates with the base yaw; positive q2 raises the arm.
    """
    q1, q2, q3, q4 = (float(v) for v in np.asarray(q, dtype=float))
    a2, a3, a4 = LINK_LENGTHS_A[1], LINK_LENGTHS_A[2], LINK_LENGTHS_A[3]
    c23 = math.cos(q2 + q3)
    s23 = math.sin(q2 + q3)
    c234 = math.cos(q2 + q3 + q4)
    s234 = math.sin(q2 + q3 + q4)
    radial = a2 * math.cos(q2) + a3 * c23 + a4 * c234
    return np.array(
        [
            math.cos(q1) * radial,
            math.sin(q1) * radial,
            BASE_HEIGHT + a2 * math.sin(q2) + a3 * s23 + a4 * s234,
        ]
    )


def inverse_kinematics(target_pos, theta_234: float) -> np.ndarray:
    """Elbow-branch IK for a target point and a requested wrist elevation sum.

    theta_234 fixes q2+q3+q4 so the four angles are determined. The elbow
    branch is the positive-sine one. Raises SingularBaseError on the base
    axis and UnreachableError outside the two-link annulus.
    """
    px, py, pz = (float(v) for v in np.asarray(target_pos, dtype=float))
    a2, a3, a4 = LINK_LENGTHS_A[1], LINK_LENGTHS_A[2], LINK_LENGTHS_A[3]
    planar = math.hypot(px, py)
    if planar < 1e-9:
        raise SingularBaseError("target on the base axis, yaw undefined")
    theta1 = math.atan2(py, px)
    if theta1 <= -math.pi:
        theta1 = math.pi
    # wrist centre: remove the last link at its requested elevation
    r = planar - a4 * math.cos(theta_234)
    z = (pz - BASE_HEIGHT) - a4 * math.sin(theta_234)
    cos3 = (r * r + z * z - a2 * a2 - a3 * a3) / (2.0 * a2 * a3)
    if abs(cos3) > 1.0 + 1e-12:
        raise UnreachableError(f"target out of reach (cos theta3 = {cos3:.6f})")
    cos3 = max(-1.0, min(1.0, cos3))
    sin3 = math.sqrt(1.0 - cos3 * cos3)
    theta3 = math.atan2(sin3, cos3)
    theta2 = math.atan2(z, r) - math.atan2(a3 * sin3, a2 + a3 * cos3)
    theta4 = theta_234 - theta2 - theta3
    return np.array([theta1, theta2, theta3, theta4])


def jacobian(q) -> np.ndarray:
    """3x4 position Jacobian of the closed-form model (mm per radian)."""
    q1, q2, q3, q4 = (float(v) for v in np.asarray(q, dtype=float))
    a2, a3, a4 = LINK_LENGTHS_A[1], LINK_LENGTHS_A[2], LINK_LENGTHS_A[3]
    c1, s1 = math.cos(q1), math.sin(q1)
    c2, s2 = math.cos(q2), math.sin(q2)
    c23, s23 = math.cos(q2 + q3), math.sin(q2 + q3)
    c234, s234 = math.cos(q2 + q3 + q4), math.sin(q2 + q3 + q4)
    radial = a2 * c2 + a3 * c23 + a4 * c234
    dr2 = -a2 * s2 - a3 * s23 - a4 * s234
    dr3 = -a3 * s23 - a4 * s234
    dr4 = -a4 * s234
    dz2 = a2 * c2 + a3 * c23 + a4 * c234
    dz3 = a3 * c23 + a4 * c234
    dz4 = a4 * c234
    return np.array(
        [
            [-s1 * radial, c1 * dr2, c1 * dr3, c1 * dr4],
            [c1 * radial, s1 * dr2, s1 * dr3, s1 * dr4],
            [0.0, dz2, dz3, dz4],
        ]
    )


def mobility_degree(n_links: int, pairs_class5: int) -> int:
    """Mobility of a spatial chain with single-freedom pairs: 6n - 5*p5."""
    if n_links < 0 or pairs_class5 < 0:
        raise ValueError("link and pair counts must be non-negative")
    return 6 * n_links - 5 * pairs_class5


@dataclass(frozen=True)
class WorkspaceCloud:
    points: np.ndarray
    seed: int
    count: int

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x_mm", "y_mm", "z_mm"])
            for p in self.points:
                writer.writerow([f"{v:.6g}" for v in p])


def sample_workspace(count: int, seed: int, table: DHTable = DEFAULT_TABLE) -> WorkspaceCloud:
    """Monte-Carlo workspace cloud: per-joint uniform draws inside limits.

    Philox keyed by the seed keeps the draw order reproducible and
    independent of global RNG state.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.Generator(np.random.Philox(seed))
    lo = np.array([r.limit_lo for r in table.rows])
    hi = np.array([r.limit_hi for r in table.rows])
    qs = rng.uniform(lo, hi, size=(count, 4))
    points = np.empty((count, 3))
    for i in range(count):
        points[i] = forward_kinematics(table, qs[i]).translation
    return WorkspaceCloud(points=points, seed=seed, count=count)

"""Manikin model: planar trunk pose, ergonomically limited head articulation,
eye/gaze kinematics, collision-member placement, and posture comfort scoring.

Trunk frame: +y is forward, +x is right, +z is up. Heading 0 faces world +y and
positive heading turns left (counterclockwise seen from above), so the heading
of a planar direction (vx, vy) is atan2(-vx, vy).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Pose, PosedMesh, TriMesh, make_box_mesh, wrap_angle

_FORWARD = np.array([0.0, 1.0, 0.0])


@dataclass(frozen=True)
class ManikinPose:
    """Planar trunk pose: position on the floor plus heading."""

    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "heading", wrap_angle(float(self.heading)))


@dataclass(frozen=True)
class HeadJoints:
    """Head articulation relative to the trunk.

    pitch: about the trunk lateral axis, positive looks up.
    bend:  lateral bend toward a shoulder; clamped but never auto-actuated.
    yaw:   about the trunk vertical axis, positive turns left.
    """

    pitch: float = 0.0
    bend: float = 0.0
    yaw: float = 0.0


@dataclass(frozen=True)
class JointRange:
    lower: float
    upper: float
    neutral: float = 0.0

    def __post_init__(self) -> None:
        if not self.lower <= self.neutral <= self.upper:
            raise ValueError(f"joint range needs lower <= neutral <= upper, got {self}")

    def clamp(self, value: float) -> float:
        return min(max(value, self.lower), self.upper)

    def worst_excursion(self) -> float:
        return max(abs(self.upper - self.neutral), abs(self.lower - self.neutral))


@dataclass(frozen=True)
class JointLimits:
    pitch: JointRange
    bend: JointRange
    yaw: JointRange

    @staticmethod
    def default() -> "JointLimits":
        # Adult averages; configuration, not canon. Override per scenario.
        return JointLimits(
            pitch=JointRange(math.radians(-60.0), math.radians(45.0)),
            bend=JointRange(math.radians(-40.0), math.radians(40.0)),
            yaw=JointRange(math.radians(-60.0), math.radians(60.0)),
        )


@dataclass
class BodyParams:
    """Member meshes plus the offsets that place the eye center.

    The eye center sits neck_height above the trunk origin, then eye_forward
    along and eye_up above the head frame.
    """

    neck_height: float
    eye_forward: float
    eye_up: float
    trunk_mesh: TriMesh
    head_mesh: TriMesh

    @staticmethod
    def default() -> "BodyParams":
        return BodyParams(
            neck_height=1.5,
            eye_forward=0.1,
            eye_up=0.1,
            trunk_mesh=make_box_mesh((0.45, 0.28, 1.4), center=(0.0, 0.0, 0.7)),
            head_mesh=make_box_mesh((0.2, 0.24, 0.24), center=(0.0, 0.0, 0.12)),
        )


@dataclass
class VisionCone:
    """Adaptive view cone state: current half-angle plus its adaptation bounds.

    min_half_angle is the value the cone starts from; the half-angle never
    leaves [min_half_angle, max_half_angle].
    """

    half_angle: float
    min_half_angle: float
    max_half_angle: float
    adapt_step: float
    facets: int

    def __post_init__(self) -> None:
        if not self.min_half_angle <= self.half_angle <= self.max_half_angle:
            raise ValueError("cone half-angle outside its adaptation bounds")

    def clamp(self, value: float) -> float:
        return min(max(value, self.min_half_angle), self.max_half_angle)


def _rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def head_rotation(joints: HeadJoints) -> np.ndarray:
    """Trunk-to-head rotation: yaw, then pitch, then lateral bend (intrinsic)."""
    return _rot_z(joints.yaw) @ _rot_x(joints.pitch) @ _rot_y(joints.bend)


def eye_center(pose: ManikinPose, joints: HeadJoints, body: BodyParams) -> np.ndarray:
    """World position of the point centered between the eyes."""
    world_head = _rot_z(pose.heading) @ head_rotation(joints)
    offset = world_head @ np.array([0.0, body.eye_forward, body.eye_up])
    return np.array([pose.x, pose.y, body.neck_height]) + offset


def vision_axis(pose: ManikinPose, joints: HeadJoints) -> np.ndarray:
    """Unit world direction the head looks along."""
    axis = _rot_z(pose.heading) @ head_rotation(joints) @ _FORWARD
    return axis / np.linalg.norm(axis)


def clamp_joints(joints: HeadJoints, limits: JointLimits) -> HeadJoints:
    """Each joint clamped into its range; idempotent."""
    return HeadJoints(
        pitch=limits.pitch.clamp(joints.pitch),
        bend=limits.bend.clamp(joints.bend),
        yaw=limits.yaw.clamp(joints.yaw),
    )


def comfort_score(joints: HeadJoints, limits: JointLimits) -> float:
    """1 at the neutral posture, falling to 0 as joints average out at their
    worst extremes: 1 - mean(|q - neutral| / worst excursion) over the joints.
    """
    total = 0.0
    for value, joint_range in (
        (joints.pitch, limits.pitch),
        (joints.bend, limits.bend),
        (joints.yaw, limits.yaw),
    ):
        worst = joint_range.worst_excursion()
        if worst > 0.0:
            total += abs(value - joint_range.neutral) / worst
    return 1.0 - total / 3.0


def place_members(pose: ManikinPose, joints: HeadJoints, body: BodyParams) -> list[PosedMesh]:
    """Collision members in fixed order (trunk, head).

    Member placements are restricted to vertical-axis rotations: head pitch and
    bend tilt the gaze, not the box-shaped collision members, which keeps
    members representable as lazily posed meshes.
    """
    trunk = PosedMesh(body.trunk_mesh, Pose(pose.x, pose.y, 0.0, pose.heading))
    head = PosedMesh(body.head_mesh, Pose(pose.x, pose.y, body.neck_height, pose.heading + joints.yaw))
    return [trunk, head]

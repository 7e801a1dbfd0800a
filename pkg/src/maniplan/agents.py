"""The five co-operating agents.

Each agent is a function from the world snapshot to a raw contribution; the
blackboard normalizes and applies. Agents never see each other's output. The
operator agent additionally owns its FIFO input queue, the single mutation it
is allowed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Optional

import numpy as np

from . import geometry
from .blackboard import AgentEntry, Contribution, WorldState
from .geometry import COINCIDENT_EPS, PosedMesh, make_cone_mesh, wrap_angle
from .manikin import HeadJoints, ManikinPose, eye_center, place_members, vision_axis

# Registry order is trace layout only; rates express priority (1 = every tick).
DEFAULT_AGENTS = (
    ("repulsion", 1),
    ("visibility", 1),
    ("head_orientation", 1),
    ("attraction", 3),
    ("operator", 9),
)


def heading_of(vx: float, vy: float) -> float:
    """Heading whose forward direction points along the planar vector (vx, vy)."""
    return math.atan2(-vx, vy)


@dataclass(frozen=True)
class VisionGeometry:
    """Per-snapshot gaze data: eye point, current target, their unit offset
    (None when the target sits on the eye), gaze axis, and eye-target distance."""

    eye: np.ndarray
    target: np.ndarray
    to_target: Optional[np.ndarray]
    gaze: np.ndarray
    distance: float


def vision_geometry(world: WorldState) -> VisionGeometry:
    eye = eye_center(world.pose, world.joints, world.body)
    target = world.current_target()
    offset = target - eye
    distance = float(np.linalg.norm(offset))
    to_target = offset / distance if distance >= COINCIDENT_EPS else None
    return VisionGeometry(eye, target, to_target, vision_axis(world.pose, world.joints), distance)


def attraction_propose(world: WorldState) -> Contribution:
    """Pull the trunk toward the current target.

    The raw translation is the full remaining planar offset (normalization
    saturates it, so the final approach decelerates instead of limit-cycling),
    and the heading swings toward the floor projection of the eye-to-target
    direction.
    """
    vg = vision_geometry(world)
    dx = float(vg.target[0]) - world.pose.x
    dy = float(vg.target[1]) - world.pose.y
    px = float(vg.target[0] - vg.eye[0])
    py = float(vg.target[1] - vg.eye[1])
    if math.hypot(px, py) <= 1e-12:
        turn = 0.0  # target overhead: no heading preference
    else:
        turn = wrap_angle(heading_of(px, py) - world.pose.heading)
    return Contribution(dx=dx, dy=dy, dheading=turn)


def repulsion_propose(world: WorldState) -> Contribution:
    """Descend the collision-length field.

    Zero whenever the members are collision-free; otherwise the negated
    finite-difference gradient of the total member/obstacle collision length.
    """
    members = place_members(world.pose, world.joints, world.body)
    if geometry.total_collision_length(members, world.obstacles) == 0.0:
        return Contribution()
    grad = geometry.collision_gradient(
        members,
        world.obstacles,
        world.pose,
        world.gradient_steps.pos,
        world.gradient_steps.ang,
    )
    return Contribution(dx=-float(grad[0]), dy=-float(grad[1]), dheading=-float(grad[2]))


def head_orientation_propose(world: WorldState) -> Contribution:
    """Turn the head (yaw, then pitch) until the gaze runs along the
    eye-to-target direction; increments never step past a joint limit."""
    vg = vision_geometry(world)
    if vg.to_target is None:
        return Contribution()
    c, s = math.cos(-world.pose.heading), math.sin(-world.pose.heading)
    ux = c * vg.to_target[0] - s * vg.to_target[1]
    uy = s * vg.to_target[0] + c * vg.to_target[1]
    uz = float(vg.to_target[2])
    planar = math.hypot(ux, uy)
    dyaw = 0.0 if planar <= 1e-12 else wrap_angle(heading_of(ux, uy) - world.joints.yaw)
    dpitch = math.atan2(uz, planar) - world.joints.pitch
    yaw_range = world.limits.yaw
    pitch_range = world.limits.pitch
    dyaw = min(max(dyaw, yaw_range.lower - world.joints.yaw), yaw_range.upper - world.joints.yaw)
    dpitch = min(
        max(dpitch, pitch_range.lower - world.joints.pitch),
        pitch_range.upper - world.joints.pitch,
    )
    return Contribution(dpitch=dpitch, dhead_yaw=dyaw)


def _cone_collision_length(world: WorldState, pose: ManikinPose, joints: HeadJoints) -> float:
    eye = eye_center(pose, joints, world.body)
    target = world.current_target()
    if float(np.linalg.norm(target - eye)) < COINCIDENT_EPS:
        return 0.0
    cone = make_cone_mesh(eye, target, world.cone.half_angle, world.cone.facets)
    return geometry.total_collision_length([PosedMesh(cone)], world.obstacles)


def visibility_propose(world: WorldState) -> Contribution:
    """Keep the view cone clear of the environment and adapt its width.

    When the faceted eye-to-target cone collides, descend the cone collision
    length over the trunk pose and the two actuated head joints (the cone is
    rebuilt per probe because the eye moves with them). The width always
    adapts: widen while the gaze lies inside the cone, narrow otherwise;
    bounds are enforced at application.
    """
    vg = vision_geometry(world)
    if vg.distance < 1e-6:
        return Contribution(note="visibility: target coincides with the eye center")

    base = _cone_collision_length(world, world.pose, world.joints)
    dx = dy = dheading = dpitch = dhead_yaw = 0.0
    if base > 0.0:
        hp, ha = world.gradient_steps.pos, world.gradient_steps.ang
        pose, joints = world.pose, world.joints

        def at(p: ManikinPose, j: HeadJoints) -> float:
            return _cone_collision_length(world, p, j)

        dx = -(
            at(ManikinPose(pose.x + hp, pose.y, pose.heading), joints)
            - at(ManikinPose(pose.x - hp, pose.y, pose.heading), joints)
        ) / (2.0 * hp)
        dy = -(
            at(ManikinPose(pose.x, pose.y + hp, pose.heading), joints)
            - at(ManikinPose(pose.x, pose.y - hp, pose.heading), joints)
        ) / (2.0 * hp)
        dheading = -(
            at(ManikinPose(pose.x, pose.y, pose.heading + ha), joints)
            - at(ManikinPose(pose.x, pose.y, pose.heading - ha), joints)
        ) / (2.0 * ha)
        dpitch = -(
            at(pose, replace(joints, pitch=joints.pitch + ha))
            - at(pose, replace(joints, pitch=joints.pitch - ha))
        ) / (2.0 * ha)
        dhead_yaw = -(
            at(pose, replace(joints, yaw=joints.yaw + ha))
            - at(pose, replace(joints, yaw=joints.yaw - ha))
        ) / (2.0 * ha)

    misalignment = math.acos(float(np.clip(vg.gaze @ vg.to_target, -1.0, 1.0)))
    dcone = world.cone.adapt_step if misalignment <= world.cone.half_angle else -world.cone.adapt_step
    return Contribution(
        dx=dx, dy=dy, dheading=dheading, dpitch=dpitch, dhead_yaw=dhead_yaw, dcone=dcone
    )


def operator_propose(world: WorldState) -> Contribution:
    """Replay the oldest ripe queued steering input; at most one per firing."""
    queue = world.operator_queue
    if queue and queue[0].tick_stamp <= world.tick:
        item = queue.popleft()
        return Contribution(dx=item.dx, dy=item.dy, dheading=item.dheading)
    return Contribution()


PROPOSERS = {
    "attraction": attraction_propose,
    "repulsion": repulsion_propose,
    "head_orientation": head_orientation_propose,
    "visibility": visibility_propose,
    "operator": operator_propose,
}


def build_agent_entries(config: Optional[Mapping[str, Mapping]] = None) -> list[AgentEntry]:
    """The standard five-agent registry, with per-agent overrides from
    config[name] = {rate, active, gain}."""
    config = config or {}
    entries = []
    for name, default_rate in DEFAULT_AGENTS:
        overrides = config.get(name, {})
        entries.append(
            AgentEntry(
                name=name,
                propose=PROPOSERS[name],
                rate=int(overrides.get("rate", default_rate)),
                active=bool(overrides.get("active", True)),
                gain=float(overrides.get("gain", 1.0)),
            )
        )
    return entries

"""Shared world state and the deterministic heartbeat.

Agents never talk to each other: each one reads the world, proposes a
normalized increment, and the step applies the component-wise sum. Within a
tick every agent observes the same pre-tick state because nothing is applied
until all scheduled agents have proposed.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import geometry
from .geometry import PosedMesh, make_cone_mesh, wrap_angle
from .manikin import (
    BodyParams,
    HeadJoints,
    JointLimits,
    ManikinPose,
    VisionCone,
    clamp_joints,
    comfort_score,
    eye_center,
    place_members,
    vision_axis,
)

IN_PROGRESS = "in_progress"
REACHED = "reached"

# Inside this eye-to-target distance the gaze-axis model is meaningless (the
# target is effectively inside the head), so alignment and occlusion are
# treated as trivially satisfied instead of chasing an ill-conditioned angle.
NEAR_FIELD_RADIUS = 0.05


class CommandError(ValueError):
    """Rejected runtime command (unknown kind, bad value)."""


class UnknownAgentError(CommandError):
    """Command referenced an agent that is not registered."""


@dataclass(frozen=True)
class Contribution:
    """One agent's proposed increment for one tick.

    dx/dy/dheading act on the trunk, dpitch/dhead_yaw on the head joint,
    dcone on the view-cone half-angle. `note` carries an agent warning into
    the trace and takes no part in arithmetic.
    """

    dx: float = 0.0
    dy: float = 0.0
    dheading: float = 0.0
    dpitch: float = 0.0
    dhead_yaw: float = 0.0
    dcone: float = 0.0
    note: Optional[str] = None

    def is_zero(self) -> bool:
        return (
            self.dx == 0.0
            and self.dy == 0.0
            and self.dheading == 0.0
            and self.dpitch == 0.0
            and self.dhead_yaw == 0.0
            and self.dcone == 0.0
        )


@dataclass
class Normalization:
    """Per-action caps: delta_pos meters of translation, delta_or radians of
    rotation. Mutable at runtime through configure()."""

    delta_pos: float
    delta_or: float


@dataclass
class AgentEntry:
    """Registry row: an agent's propose callable plus its scheduling state.

    rate is a period in ticks (an agent fires when tick % rate == 0), so a
    smaller rate means higher priority. gain scales this agent's caps.
    """

    name: str
    propose: Callable[["WorldState"], Contribution]
    rate: int
    active: bool = True
    gain: float = 1.0
    fires: int = 0


@dataclass(frozen=True)
class OperatorInput:
    """Raw steering delta queued for the operator agent, consumed FIFO."""

    dx: float
    dy: float
    dheading: float
    tick_stamp: int


@dataclass
class Tolerances:
    pos: float
    ang: float


@dataclass
class GradientSteps:
    pos: float
    ang: float


@dataclass
class WorldMetrics:
    """Per-tick derived measurements, recomputed by task_status."""

    collision_length: float = 0.0
    cone_collision_length: float = 0.0
    occluded: bool = False
    comfort: float = 1.0
    target_distance: float = 0.0
    alignment_error: float = 0.0
    aligned: bool = True


@dataclass
class WorldState:
    """The common database every agent reads and only step() writes."""

    pose: ManikinPose
    joints: HeadJoints
    body: BodyParams
    limits: JointLimits
    cone: VisionCone
    obstacles: list[PosedMesh]
    target_stack: list[np.ndarray]  # last entry is the current target
    normalization: Normalization
    agents: list[AgentEntry]
    tolerances: Tolerances
    gradient_steps: GradientSteps
    tick: int = 0
    status: str = IN_PROGRESS
    last_contributions: dict[str, Contribution] = field(default_factory=dict)
    operator_queue: deque = field(default_factory=deque)
    metrics: WorldMetrics = field(default_factory=WorldMetrics)

    def current_target(self) -> np.ndarray:
        return self.target_stack[-1]

    def agent(self, name: str) -> AgentEntry:
        for entry in self.agents:
            if entry.name == name:
                return entry
        raise UnknownAgentError(f"no agent named {name!r}")


def normalize(raw: Contribution, norm: Normalization, gain: float) -> Contribution:
    """Rescale a raw contribution into the per-action caps.

    The translation keeps its direction and is capped in magnitude; each
    rotation component is clamped independently; the cone adjustment passes
    through untouched.
    """
    cap_pos = norm.delta_pos * gain
    cap_or = norm.delta_or * gain
    dx, dy = raw.dx, raw.dy
    magnitude = math.hypot(dx, dy)
    if magnitude > cap_pos:
        scale = cap_pos / magnitude
        dx *= scale
        dy *= scale

    def clip(value: float) -> float:
        return min(max(value, -cap_or), cap_or)

    return Contribution(
        dx=dx,
        dy=dy,
        dheading=clip(raw.dheading),
        dpitch=clip(raw.dpitch),
        dhead_yaw=clip(raw.dhead_yaw),
        dcone=raw.dcone,
        note=raw.note,
    )


def step(world: WorldState) -> WorldState:
    """Advance the world one tick.

    Scheduled agents propose against the pre-tick state, proposals are
    normalized and summed, the sum is applied (with heading wrap, joint clamp,
    and cone clamp), the applied contributions are recorded, the task status is
    re-evaluated, and the tick counter advances. Stepping a reached world is a
    no-op.
    """
    if world.status == REACHED:
        return world

    fired: dict[str, Contribution] = {}
    for entry in world.agents:
        if entry.active and world.tick % entry.rate == 0:
            raw = entry.propose(world)
            fired[entry.name] = normalize(raw, world.normalization, entry.gain)
            entry.fires += 1

    dx = sum(c.dx for c in fired.values())
    dy = sum(c.dy for c in fired.values())
    dheading = sum(c.dheading for c in fired.values())
    dpitch = sum(c.dpitch for c in fired.values())
    dhead_yaw = sum(c.dhead_yaw for c in fired.values())
    dcone = sum(c.dcone for c in fired.values())

    world.pose = ManikinPose(
        world.pose.x + dx,
        world.pose.y + dy,
        wrap_angle(world.pose.heading + dheading),
    )
    world.joints = clamp_joints(
        replace(world.joints, pitch=world.joints.pitch + dpitch, yaw=world.joints.yaw + dhead_yaw),
        world.limits,
    )
    world.cone.half_angle = world.cone.clamp(world.cone.half_angle + dcone)
    world.last_contributions = fired
    task_status(world)
    world.tick += 1
    return world


def compute_metrics(world: WorldState) -> WorldMetrics:
    """Derived measurements against the current target; pure."""
    members = place_members(world.pose, world.joints, world.body)
    collision = geometry.total_collision_length(members, world.obstacles)
    eye = eye_center(world.pose, world.joints, world.body)
    target = world.current_target()
    offset = target - eye
    distance3 = float(np.linalg.norm(offset))
    if distance3 < NEAR_FIELD_RADIUS:
        occluded = False
        alignment_error = 0.0
        aligned = True
        cone_length = 0.0
    else:
        to_target = offset / distance3
        gaze = vision_axis(world.pose, world.joints)
        alignment_error = float(math.acos(np.clip(gaze @ to_target, -1.0, 1.0)))
        aligned = alignment_error <= world.tolerances.ang
        occluded = geometry.segment_occluded((eye, target), world.obstacles)
        cone_mesh = make_cone_mesh(eye, target, world.cone.half_angle, world.cone.facets)
        cone_length = geometry.total_collision_length([PosedMesh(cone_mesh)], world.obstacles)
    planar = math.hypot(target[0] - world.pose.x, target[1] - world.pose.y)
    return WorldMetrics(
        collision_length=collision,
        cone_collision_length=cone_length,
        occluded=occluded,
        comfort=comfort_score(world.joints, world.limits),
        target_distance=planar,
        alignment_error=alignment_error,
        aligned=aligned,
    )


def target_attained(metrics: WorldMetrics, tolerances: Tolerances) -> bool:
    return (
        metrics.target_distance <= tolerances.pos
        and metrics.aligned
        and not metrics.occluded
        and metrics.collision_length == 0.0
    )


def task_status(world: WorldState) -> str:
    """Re-evaluate the task: pop an attained intermediate target, or mark the
    run reached when the final target is attained. Updates world.metrics."""
    world.metrics = compute_metrics(world)
    if target_attained(world.metrics, world.tolerances):
        if len(world.target_stack) > 1:
            world.target_stack.pop()
        else:
            world.status = REACHED
    return world.status


def next_fire_tick(entry: AgentEntry, from_tick: int) -> int:
    """First tick >= from_tick at which the agent is scheduled to fire."""
    if not entry.active:
        return from_tick
    return ((from_tick + entry.rate - 1) // entry.rate) * entry.rate


def _positive(command: Mapping, key: str) -> float:
    value = command.get(key)
    if not isinstance(value, (int, float)) or not value > 0:
        raise CommandError(f"{command.get('command')}: {key} must be a positive number")
    return float(value)


def _point(command: Mapping) -> np.ndarray:
    value = command.get("point")
    if not isinstance(value, Sequence) or len(value) != 3:
        raise CommandError(f"{command.get('command')}: point must be [x, y, z]")
    point = np.asarray([float(v) for v in value])
    if not np.isfinite(point).all():
        raise CommandError(f"{command.get('command')}: point must be finite")
    return point


def configure(world: WorldState, command: Mapping) -> None:
    """Apply one runtime command to the world; takes effect before the next step.

    Retargeting commands revive a reached world: a fresh goal restarts the task.
    """
    kind = command.get("command")
    if kind == "set_rate":
        entry = world.agent(command.get("agent"))
        value = command.get("value")
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            raise CommandError("set_rate: value must be an integer >= 1")
        entry.rate = value
    elif kind == "pause":
        world.agent(command.get("agent")).active = False
    elif kind == "resume":
        world.agent(command.get("agent")).active = True
    elif kind == "set_gain":
        world.agent(command.get("agent")).gain = _positive(command, "value")
    elif kind == "set_delta_pos":
        world.normalization.delta_pos = _positive(command, "value")
    elif kind == "set_delta_or":
        world.normalization.delta_or = _positive(command, "value")
    elif kind == "push_intermediate_target":
        world.target_stack.append(_point(command))
        world.status = IN_PROGRESS
    elif kind == "set_target":
        world.target_stack = [_point(command)]
        world.status = IN_PROGRESS
    elif kind == "operator_input":
        for key in ("dx", "dy", "dtheta"):
            value = command.get(key)
            if (
                isinstance(value, bool)
                or not isinstance(value, (int, float))
                or not math.isfinite(value)
            ):
                raise CommandError(f"operator_input: {key} must be a finite number")
        world.operator_queue.append(
            OperatorInput(
                dx=float(command["dx"]),
                dy=float(command["dy"]),
                dheading=float(command["dtheta"]),
                tick_stamp=int(command.get("tick_stamp", world.tick)),
            )
        )
    else:
        raise CommandError(f"unknown command {kind!r}")

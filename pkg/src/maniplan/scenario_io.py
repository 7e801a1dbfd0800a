"""Scenario ingestion, mesh loading, and trace/report emission.

Scenario files are versioned JSON using degrees and meters; the engine runs on
radians and meters, converted only here. A loaded scenario keeps file units so
load -> serialize -> load is exact.

Mesh files are a wavefront-style subset: `v` and `f` statements; anything else
is ignored. Faces with more than three vertices are fanned from the first.

Traces are JSON lines, one record per tick, with a stable field order; they are
the golden-test surface for determinism.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from .agents import DEFAULT_AGENTS, build_agent_entries
from .blackboard import (
    GradientSteps,
    Normalization,
    Tolerances,
    WorldState,
    compute_metrics,
)
from .geometry import MeshError, Pose, PosedMesh, TriMesh, make_box_mesh
from .manikin import (
    BodyParams,
    HeadJoints,
    JointLimits,
    JointRange,
    ManikinPose,
    VisionCone,
    clamp_joints,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

# File-facing defaults (degrees/meters); engine-unit sources noted inline.
DEFAULT_DELTA_POS_M = 0.05
DEFAULT_DELTA_OR_DEG = math.degrees(0.02)      # 0.02 rad per action
DEFAULT_TOL_POS_M = 0.10
DEFAULT_TOL_ANG_DEG = math.degrees(0.05)       # 0.05 rad
DEFAULT_H_POS_M = 0.005
DEFAULT_H_ANG_DEG = math.degrees(0.005)        # 0.005 rad
DEFAULT_EPS_MIN_DEG = math.degrees(0.05)       # cone starts at its minimum width
DEFAULT_EPS_MAX_DEG = math.degrees(0.35)
DEFAULT_DELTA_EPS_DEG = math.degrees(0.01)
DEFAULT_FACETS = 8
DEFAULT_TICK_RATE_HZ = 50.0
DEFAULT_JOINT_LIMITS_DEG = {
    "pitch": (-60.0, 45.0, 0.0),
    "bend": (-40.0, 40.0, 0.0),
    "yaw": (-60.0, 60.0, 0.0),
}
DEFAULT_TRUNK_SIZE_M = (0.45, 0.28, 1.4)
DEFAULT_HEAD_SIZE_M = (0.2, 0.24, 0.24)
DEFAULT_NECK_HEIGHT_M = 1.5
DEFAULT_EYE_FORWARD_M = 0.1
DEFAULT_EYE_UP_M = 0.1


class ScenarioError(ValueError):
    """Scenario file failed to parse or validate."""


def _require_number(value: Any, where: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ScenarioError(f"{where}: expected a finite number, got {value!r}")
    if positive and value <= 0:
        raise ScenarioError(f"{where}: must be > 0, got {value!r}")
    return float(value)


def _require_point(value: Any, where: str) -> tuple[float, float, float]:
    if not isinstance(value, Sequence) or isinstance(value, str) or len(value) != 3:
        raise ScenarioError(f"{where}: expected [x, y, z]")
    x, y, z = (_require_number(v, where) for v in value)
    return (x, y, z)


def _require_mapping(value: Any, where: str) -> Mapping:
    if not isinstance(value, Mapping):
        raise ScenarioError(f"{where}: expected an object")
    return value


@dataclass(frozen=True)
class PoseSpec:
    x_m: float = 0.0
    y_m: float = 0.0
    z_m: float = 0.0
    yaw_deg: float = 0.0

    @staticmethod
    def from_dict(data: Any, where: str) -> "PoseSpec":
        data = _require_mapping(data, where)
        return PoseSpec(
            x_m=_require_number(data.get("x_m", 0.0), f"{where}.x_m"),
            y_m=_require_number(data.get("y_m", 0.0), f"{where}.y_m"),
            z_m=_require_number(data.get("z_m", 0.0), f"{where}.z_m"),
            yaw_deg=_require_number(data.get("yaw_deg", 0.0), f"{where}.yaw_deg"),
        )

    def to_dict(self) -> dict:
        return {"x_m": self.x_m, "y_m": self.y_m, "z_m": self.z_m, "yaw_deg": self.yaw_deg}

    def to_pose(self) -> Pose:
        return Pose(self.x_m, self.y_m, self.z_m, math.radians(self.yaw_deg))


@dataclass(frozen=True)
class ObstacleSpec:
    """Either a mesh file reference or an inline box, placed by a pose."""

    name: str
    pose: PoseSpec
    mesh: Optional[str] = None
    box_size_m: Optional[tuple[float, float, float]] = None
    box_center_m: tuple[float, float, float] = (0.0, 0.0, 0.0)

    @staticmethod
    def from_dict(data: Any, where: str) -> "ObstacleSpec":
        data = _require_mapping(data, where)
        name = str(data.get("name", where))
        pose = PoseSpec.from_dict(data.get("pose", {}), f"{where}.pose")
        mesh = data.get("mesh")
        box = data.get("box")
        if (mesh is None) == (box is None):
            raise ScenarioError(f"{where}: exactly one of 'mesh' or 'box' is required")
        if mesh is not None:
            return ObstacleSpec(name=name, pose=pose, mesh=str(mesh))
        box = _require_mapping(box, f"{where}.box")
        size = _require_point(box.get("size_m"), f"{where}.box.size_m")
        if min(size) <= 0:
            raise ScenarioError(f"{where}.box.size_m: sizes must be > 0")
        center = _require_point(box.get("center_m", (0.0, 0.0, 0.0)), f"{where}.box.center_m")
        return ObstacleSpec(name=name, pose=pose, box_size_m=size, box_center_m=center)

    def to_dict(self) -> dict:
        out: dict = {"name": self.name}
        if self.mesh is not None:
            out["mesh"] = self.mesh
        else:
            out["box"] = {"size_m": list(self.box_size_m), "center_m": list(self.box_center_m)}
        out["pose"] = self.pose.to_dict()
        return out


@dataclass(frozen=True)
class AgentSpec:
    rate: int
    active: bool = True
    gain: float = 1.0

    @staticmethod
    def from_dict(data: Any, where: str, default_rate: int) -> "AgentSpec":
        data = _require_mapping(data, where)
        rate = data.get("rate", default_rate)
        if isinstance(rate, bool) or not isinstance(rate, int) or rate < 1:
            raise ScenarioError(f"{where}.rate: must be an integer >= 1")
        active = data.get("active", True)
        if not isinstance(active, bool):
            raise ScenarioError(f"{where}.active: must be a boolean")
        gain = _require_number(data.get("gain", 1.0), f"{where}.gain", positive=True)
        return AgentSpec(rate=rate, active=active, gain=gain)

    def to_dict(self) -> dict:
        return {"rate": self.rate, "active": self.active, "gain": self.gain}


@dataclass(frozen=True)
class ManikinSpec:
    x_m: float = 0.0
    y_m: float = 0.0
    heading_deg: float = 0.0
    pitch_deg: float = 0.0
    bend_deg: float = 0.0
    yaw_deg: float = 0.0
    neck_height_m: float = DEFAULT_NECK_HEIGHT_M
    eye_forward_m: float = DEFAULT_EYE_FORWARD_M
    eye_up_m: float = DEFAULT_EYE_UP_M
    trunk_size_m: tuple[float, float, float] = DEFAULT_TRUNK_SIZE_M
    head_size_m: tuple[float, float, float] = DEFAULT_HEAD_SIZE_M
    joint_limits_deg: Mapping[str, tuple[float, float, float]] = field(
        default_factory=lambda: dict(DEFAULT_JOINT_LIMITS_DEG)
    )

    @staticmethod
    def from_dict(data: Any, where: str) -> "ManikinSpec":
        data = _require_mapping(data, where)
        pose = _require_mapping(data.get("pose", {}), f"{where}.pose")
        joints = _require_mapping(data.get("joints", {}), f"{where}.joints")
        body = _require_mapping(data.get("body", {}), f"{where}.body")
        limits_raw = _require_mapping(data.get("joint_limits_deg", {}), f"{where}.joint_limits_deg")
        limits: dict[str, tuple[float, float, float]] = {}
        for joint, default in DEFAULT_JOINT_LIMITS_DEG.items():
            entry = limits_raw.get(joint, default)
            entry = _require_point(entry, f"{where}.joint_limits_deg.{joint}")
            lower, upper, neutral = entry
            if not lower <= neutral <= upper:
                raise ScenarioError(
                    f"{where}.joint_limits_deg.{joint}: needs min <= neutral <= max"
                )
            limits[joint] = entry
        trunk = _require_point(body.get("trunk_size_m", DEFAULT_TRUNK_SIZE_M), f"{where}.body.trunk_size_m")
        head = _require_point(body.get("head_size_m", DEFAULT_HEAD_SIZE_M), f"{where}.body.head_size_m")
        return ManikinSpec(
            x_m=_require_number(pose.get("x_m", 0.0), f"{where}.pose.x_m"),
            y_m=_require_number(pose.get("y_m", 0.0), f"{where}.pose.y_m"),
            heading_deg=_require_number(pose.get("heading_deg", 0.0), f"{where}.pose.heading_deg"),
            pitch_deg=_require_number(joints.get("pitch_deg", 0.0), f"{where}.joints.pitch_deg"),
            bend_deg=_require_number(joints.get("bend_deg", 0.0), f"{where}.joints.bend_deg"),
            yaw_deg=_require_number(joints.get("yaw_deg", 0.0), f"{where}.joints.yaw_deg"),
            neck_height_m=_require_number(
                body.get("neck_height_m", DEFAULT_NECK_HEIGHT_M), f"{where}.body.neck_height_m", positive=True
            ),
            eye_forward_m=_require_number(body.get("eye_forward_m", DEFAULT_EYE_FORWARD_M), f"{where}.body.eye_forward_m"),
            eye_up_m=_require_number(body.get("eye_up_m", DEFAULT_EYE_UP_M), f"{where}.body.eye_up_m"),
            trunk_size_m=trunk,
            head_size_m=head,
            joint_limits_deg=limits,
        )

    def to_dict(self) -> dict:
        return {
            "pose": {"x_m": self.x_m, "y_m": self.y_m, "heading_deg": self.heading_deg},
            "joints": {"pitch_deg": self.pitch_deg, "bend_deg": self.bend_deg, "yaw_deg": self.yaw_deg},
            "body": {
                "neck_height_m": self.neck_height_m,
                "eye_forward_m": self.eye_forward_m,
                "eye_up_m": self.eye_up_m,
                "trunk_size_m": list(self.trunk_size_m),
                "head_size_m": list(self.head_size_m),
            },
            "joint_limits_deg": {k: list(v) for k, v in self.joint_limits_deg.items()},
        }


@dataclass(frozen=True)
class Scenario:
    """Validated scenario in file units (degrees/meters), defaults applied."""

    version: int
    obstacles: tuple[ObstacleSpec, ...]
    manikin: ManikinSpec
    final_target_m: tuple[float, float, float]
    waypoints_m: tuple[tuple[float, float, float], ...]
    agents: Mapping[str, AgentSpec]
    delta_pos_m: float
    delta_or_deg: float
    eps_min_deg: float
    eps_max_deg: float
    delta_eps_deg: float
    facets: int
    tol_pos_m: float
    tol_ang_deg: float
    h_pos_m: float
    h_ang_deg: float
    tick_rate_hz: float
    base_dir: Optional[Path] = field(default=None, compare=False)


def scenario_from_dict(data: Any, base_dir: Optional[Path] = None, where: str = "scenario") -> Scenario:
    data = _require_mapping(data, where)
    version = data.get("version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ScenarioError(f"{where}.version: unsupported schema version {version!r}")

    obstacles_raw = data.get("obstacles", [])
    if not isinstance(obstacles_raw, Sequence) or isinstance(obstacles_raw, str):
        raise ScenarioError(f"{where}.obstacles: expected a list")
    obstacles = tuple(
        ObstacleSpec.from_dict(o, f"{where}.obstacles[{i}]") for i, o in enumerate(obstacles_raw)
    )

    manikin = ManikinSpec.from_dict(data.get("manikin", {}), f"{where}.manikin")

    targets = _require_mapping(data.get("targets", {}), f"{where}.targets")
    if "final_m" not in targets:
        raise ScenarioError(f"{where}.targets.final_m: required")
    final = _require_point(targets.get("final_m"), f"{where}.targets.final_m")
    waypoints_raw = targets.get("waypoints_m", [])
    if not isinstance(waypoints_raw, Sequence) or isinstance(waypoints_raw, str):
        raise ScenarioError(f"{where}.targets.waypoints_m: expected a list")
    waypoints = tuple(
        _require_point(w, f"{where}.targets.waypoints_m[{i}]") for i, w in enumerate(waypoints_raw)
    )

    agents_raw = _require_mapping(data.get("agents", {}), f"{where}.agents")
    known = {name for name, _ in DEFAULT_AGENTS}
    for name in agents_raw:
        if name not in known:
            raise ScenarioError(f"{where}.agents.{name}: unknown agent")
    agents = {
        name: AgentSpec.from_dict(agents_raw.get(name, {}), f"{where}.agents.{name}", default_rate)
        for name, default_rate in DEFAULT_AGENTS
    }

    normalization = _require_mapping(data.get("normalization", {}), f"{where}.normalization")
    cone = _require_mapping(data.get("cone", {}), f"{where}.cone")
    tolerances = _require_mapping(data.get("tolerances", {}), f"{where}.tolerances")
    gradient = _require_mapping(data.get("gradient_steps", {}), f"{where}.gradient_steps")

    eps_min = _require_number(cone.get("eps_min_deg", DEFAULT_EPS_MIN_DEG), f"{where}.cone.eps_min_deg", positive=True)
    eps_max = _require_number(cone.get("eps_max_deg", DEFAULT_EPS_MAX_DEG), f"{where}.cone.eps_max_deg", positive=True)
    if eps_min > eps_max:
        raise ScenarioError(f"{where}.cone: eps_min_deg must be <= eps_max_deg")
    if eps_max >= 90.0:
        raise ScenarioError(f"{where}.cone.eps_max_deg: must be < 90")
    facets = cone.get("facets", DEFAULT_FACETS)
    if isinstance(facets, bool) or not isinstance(facets, int) or facets < 3:
        raise ScenarioError(f"{where}.cone.facets: must be an integer >= 3")

    return Scenario(
        version=SCHEMA_VERSION,
        obstacles=obstacles,
        manikin=manikin,
        final_target_m=final,
        waypoints_m=waypoints,
        agents=agents,
        delta_pos_m=_require_number(
            normalization.get("delta_pos_m", DEFAULT_DELTA_POS_M), f"{where}.normalization.delta_pos_m", positive=True
        ),
        delta_or_deg=_require_number(
            normalization.get("delta_or_deg", DEFAULT_DELTA_OR_DEG), f"{where}.normalization.delta_or_deg", positive=True
        ),
        eps_min_deg=eps_min,
        eps_max_deg=eps_max,
        delta_eps_deg=_require_number(
            cone.get("delta_eps_deg", DEFAULT_DELTA_EPS_DEG), f"{where}.cone.delta_eps_deg", positive=True
        ),
        facets=facets,
        tol_pos_m=_require_number(tolerances.get("tol_pos_m", DEFAULT_TOL_POS_M), f"{where}.tolerances.tol_pos_m", positive=True),
        tol_ang_deg=_require_number(tolerances.get("tol_ang_deg", DEFAULT_TOL_ANG_DEG), f"{where}.tolerances.tol_ang_deg", positive=True),
        h_pos_m=_require_number(gradient.get("h_pos_m", DEFAULT_H_POS_M), f"{where}.gradient_steps.h_pos_m", positive=True),
        h_ang_deg=_require_number(gradient.get("h_ang_deg", DEFAULT_H_ANG_DEG), f"{where}.gradient_steps.h_ang_deg", positive=True),
        tick_rate_hz=_require_number(data.get("tick_rate_hz", DEFAULT_TICK_RATE_HZ), f"{where}.tick_rate_hz", positive=True),
        base_dir=base_dir,
    )


def serialize_scenario(scenario: Scenario) -> dict:
    """Canonical dict form: every field present, stable key order."""
    return {
        "version": scenario.version,
        "obstacles": [o.to_dict() for o in scenario.obstacles],
        "manikin": scenario.manikin.to_dict(),
        "targets": {
            "final_m": list(scenario.final_target_m),
            "waypoints_m": [list(w) for w in scenario.waypoints_m],
        },
        "agents": {name: spec.to_dict() for name, spec in scenario.agents.items()},
        "normalization": {"delta_pos_m": scenario.delta_pos_m, "delta_or_deg": scenario.delta_or_deg},
        "cone": {
            "eps_min_deg": scenario.eps_min_deg,
            "eps_max_deg": scenario.eps_max_deg,
            "delta_eps_deg": scenario.delta_eps_deg,
            "facets": scenario.facets,
        },
        "tolerances": {"tol_pos_m": scenario.tol_pos_m, "tol_ang_deg": scenario.tol_ang_deg},
        "gradient_steps": {"h_pos_m": scenario.h_pos_m, "h_ang_deg": scenario.h_ang_deg},
        "tick_rate_hz": scenario.tick_rate_hz,
    }


def load_scenario(path) -> Scenario:
    """Load and validate a scenario file; all defaults applied."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    scenario = scenario_from_dict(data, base_dir=path.parent)
    for i, obstacle in enumerate(scenario.obstacles):
        if obstacle.mesh is not None and not (path.parent / obstacle.mesh).exists():
            raise ScenarioError(f"scenario.obstacles[{i}].mesh: file not found: {obstacle.mesh}")
    return scenario


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(json.dumps(serialize_scenario(scenario), indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# mesh loading
# ---------------------------------------------------------------------------

def load_mesh(path) -> TriMesh:
    """Load a wavefront-style mesh (v/f subset, 1-based indices).

    Polygons are fanned from their first vertex; normal/texture indices in face
    entries are ignored; degenerate triangles are dropped with a warning.
    """
    path = Path(path)
    vertices: list[tuple[float, float, float]] = []
    triangles: list[tuple[int, int, int]] = []
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise MeshError(f"cannot read mesh {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split()
        kind = fields[0]
        if kind == "v":
            if len(fields) < 4:
                raise MeshError(f"{path}:{lineno}: vertex needs 3 coordinates")
            try:
                vertices.append((float(fields[1]), float(fields[2]), float(fields[3])))
            except ValueError as exc:
                raise MeshError(f"{path}:{lineno}: bad vertex coordinate: {exc}") from exc
        elif kind == "f":
            if len(fields) < 4:
                raise MeshError(f"{path}:{lineno}: face needs at least 3 vertices")
            indices = []
            for entry in fields[1:]:
                head = entry.split("/", 1)[0]
                try:
                    index = int(head)
                except ValueError:
                    raise MeshError(f"{path}:{lineno}: bad face index {entry!r}") from None
                if index < 1 or index > len(vertices):
                    raise MeshError(
                        f"{path}:{lineno}: face index {index} out of range (have {len(vertices)} vertices)"
                    )
                indices.append(index - 1)
            for k in range(1, len(indices) - 1):
                triangles.append((indices[0], indices[k], indices[k + 1]))
        # every other statement (vn, vt, o, g, s, usemtl, mtllib, ...) is ignored
    if not vertices:
        raise MeshError(f"{path}: no vertices")
    mesh = TriMesh(vertices, triangles)
    if mesh.dropped_triangles:
        log.warning("%s: dropped %d degenerate triangle(s)", path, mesh.dropped_triangles)
    return mesh


# ---------------------------------------------------------------------------
# world construction
# ---------------------------------------------------------------------------

def _obstacle_posed(spec: ObstacleSpec, base_dir: Optional[Path]) -> PosedMesh:
    if spec.mesh is not None:
        mesh_path = Path(spec.mesh)
        if not mesh_path.is_absolute():
            mesh_path = (base_dir or Path.cwd()) / mesh_path
        mesh = load_mesh(mesh_path)
    else:
        mesh = make_box_mesh(spec.box_size_m, spec.box_center_m)
    return PosedMesh(mesh, spec.pose.to_pose())


def build_world(scenario: Scenario) -> WorldState:
    """Instantiate the runtime world from a scenario (degrees become radians)."""
    spec = scenario.manikin
    limits = JointLimits(
        pitch=JointRange(*(math.radians(v) for v in spec.joint_limits_deg["pitch"])),
        bend=JointRange(*(math.radians(v) for v in spec.joint_limits_deg["bend"])),
        yaw=JointRange(*(math.radians(v) for v in spec.joint_limits_deg["yaw"])),
    )
    body = BodyParams(
        neck_height=spec.neck_height_m,
        eye_forward=spec.eye_forward_m,
        eye_up=spec.eye_up_m,
        trunk_mesh=make_box_mesh(spec.trunk_size_m, center=(0.0, 0.0, spec.trunk_size_m[2] / 2.0)),
        head_mesh=make_box_mesh(spec.head_size_m, center=(0.0, 0.0, spec.head_size_m[2] / 2.0)),
    )
    cone = VisionCone(
        half_angle=math.radians(scenario.eps_min_deg),
        min_half_angle=math.radians(scenario.eps_min_deg),
        max_half_angle=math.radians(scenario.eps_max_deg),
        adapt_step=math.radians(scenario.delta_eps_deg),
        facets=scenario.facets,
    )
    # the stack bottom is the final target; waypoints go on top, first-visited last
    stack = [np.asarray(scenario.final_target_m, dtype=float)]
    stack.extend(np.asarray(w, dtype=float) for w in reversed(scenario.waypoints_m))
    world = WorldState(
        pose=ManikinPose(spec.x_m, spec.y_m, math.radians(spec.heading_deg)),
        joints=HeadJoints(
            pitch=math.radians(spec.pitch_deg),
            bend=math.radians(spec.bend_deg),
            yaw=math.radians(spec.yaw_deg),
        ),
        body=body,
        limits=limits,
        cone=cone,
        obstacles=[_obstacle_posed(o, scenario.base_dir) for o in scenario.obstacles],
        target_stack=stack,
        normalization=Normalization(
            delta_pos=scenario.delta_pos_m,
            delta_or=math.radians(scenario.delta_or_deg),
        ),
        agents=build_agent_entries({name: spec_.to_dict() for name, spec_ in scenario.agents.items()}),
        tolerances=Tolerances(pos=scenario.tol_pos_m, ang=math.radians(scenario.tol_ang_deg)),
        gradient_steps=GradientSteps(pos=scenario.h_pos_m, ang=math.radians(scenario.h_ang_deg)),
    )
    world.joints = clamp_joints(world.joints, world.limits)
    world.metrics = compute_metrics(world)
    return world


# ---------------------------------------------------------------------------
# trace records and reports
# ---------------------------------------------------------------------------

def _contribution_dict(contribution) -> dict:
    out = {
        "dx": contribution.dx,
        "dy": contribution.dy,
        "dheading": contribution.dheading,
        "dpitch": contribution.dpitch,
        "dhead_yaw": contribution.dhead_yaw,
        "dcone": contribution.dcone,
    }
    if contribution.note is not None:
        out["note"] = contribution.note
    return out


def trace_record(world: WorldState, commands: Sequence[Mapping] = ()) -> dict:
    """One trace line for the tick that just executed (field order is stable)."""
    m = world.metrics
    return {
        "tick": world.tick - 1,
        "x": world.pose.x,
        "y": world.pose.y,
        "heading": world.pose.heading,
        "head_pitch": world.joints.pitch,
        "head_bend": world.joints.bend,
        "head_yaw": world.joints.yaw,
        "cone_half_angle": world.cone.half_angle,
        "collision_length": m.collision_length,
        "cone_collision_length": m.cone_collision_length,
        "occluded": m.occluded,
        "comfort": m.comfort,
        "status": world.status,
        "contributions": {
            name: _contribution_dict(c) for name, c in world.last_contributions.items()
        },
        "commands": [dict(c) for c in commands],
    }


def format_trace_line(record: Mapping) -> str:
    return json.dumps(record, separators=(",", ":"))


def write_trace(records: Sequence[Mapping], path) -> None:
    """Line-delimited trace, one record per tick."""
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8") as handle:
            for record in records:
                handle.write(format_trace_line(record))
                handle.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write trace {path}: {exc}") from exc


def read_trace(path) -> list[dict]:
    path = Path(path)
    records = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            records.append(json.loads(line))
    return records


def summarize(records: Sequence[Mapping]) -> dict:
    """Run report: outcome, comfort/collision extremes, path length, firings."""
    if not records:
        raise ValueError("cannot summarize an empty trace")
    reached_tick = None
    for record in records:
        if record["status"] == "reached":
            reached_tick = record["tick"]
            break
    path_length = 0.0
    for previous, current in zip(records, records[1:]):
        path_length += math.hypot(current["x"] - previous["x"], current["y"] - previous["y"])
    firing_counts: dict[str, int] = {}
    for record in records:
        for name in record["contributions"]:
            firing_counts[name] = firing_counts.get(name, 0) + 1
    return {
        "ticks": len(records),
        "reached_tick": reached_tick,
        "final_status": records[-1]["status"],
        "min_comfort": min(r["comfort"] for r in records),
        "max_collision_length": max(r["collision_length"] for r in records),
        "path_length": path_length,
        "firing_counts": firing_counts,
    }

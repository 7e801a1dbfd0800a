"""Triangle-mesh geometry: collision lines between posed meshes, finite-difference
collision gradients, line-of-sight occlusion, and procedural cone/box meshes.

Conventions: lengths in meters, angles in radians, the floor plane is x-y and +z
is up. Poses are rigid transforms restricted to yaw about the vertical axis,
which keeps them closed under composition and cheap to invert.

The narrow phase runs a vectorized plane-side rejection over all triangle pairs
and hands the few survivors to a scalar kernel; the two stages use the same
epsilon so the pair set is exactly what the scalar kernel alone would accept.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)

Point3 = tuple[float, float, float]
Segment3 = tuple[Point3, Point3]

ON_PLANE_EPS = 1e-12        # |signed distance| to a unit-normal plane below this counts as "in the plane"
MIN_SEGMENT_LENGTH = 1e-12  # crossings shorter than this carry no length
MIN_TRIANGLE_AREA = 1e-12   # triangles below this area are dropped at load
COINCIDENT_EPS = 1e-9


class MeshError(ValueError):
    """Structurally invalid mesh: bad indices or no vertices."""


def wrap_angle(angle: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    wrapped = math.remainder(angle, math.tau)
    if wrapped <= -math.pi:
        wrapped += math.tau
    return wrapped


@dataclass(frozen=True)
class Pose:
    """Rigid placement: translation plus yaw about the vertical axis."""

    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    yaw: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))

    def apply(self, points: np.ndarray) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        pts = np.asarray(points, dtype=float)
        out = np.empty_like(pts)
        out[..., 0] = c * pts[..., 0] - s * pts[..., 1] + self.x
        out[..., 1] = s * pts[..., 0] + c * pts[..., 1] + self.y
        out[..., 2] = pts[..., 2] + self.z
        return out

    def compose(self, other: "Pose") -> "Pose":
        """self, applied after `other`."""
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return Pose(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.z + other.z,
            self.yaw + other.yaw,
        )

    def inverse(self) -> "Pose":
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return Pose(
            -(c * self.x + s * self.y),
            -(-s * self.x + c * self.y),
            -self.z,
            -self.yaw,
        )


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float


class TriMesh:
    """Immutable indexed triangle mesh.

    Degenerate triangles (area <= MIN_TRIANGLE_AREA) are dropped on
    construction; the count is kept in ``dropped_triangles``.
    """

    def __init__(self, vertices, triangles) -> None:
        verts = np.atleast_2d(np.asarray(vertices, dtype=float))
        if verts.size == 0 or verts.shape[-1] != 3:
            raise MeshError("mesh needs at least one 3-d vertex")
        tris = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        if tris.size and (tris.min() < 0 or tris.max() >= len(verts)):
            raise MeshError(f"triangle index out of range for {len(verts)} vertices")
        if len(tris):
            corners = verts[tris]
            areas = 0.5 * np.linalg.norm(
                np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]), axis=1
            )
            keep = areas > MIN_TRIANGLE_AREA
        else:
            keep = np.zeros(0, dtype=bool)
        self.dropped_triangles = int(len(tris) - keep.sum())
        if self.dropped_triangles:
            log.warning("dropped %d degenerate triangle(s)", self.dropped_triangles)
        self.vertices = verts
        self.triangles = tris[keep]
        self.vertices.setflags(write=False)
        self.triangles.setflags(write=False)

    def __len__(self) -> int:
        return len(self.triangles)

    @cached_property
    def corners(self) -> np.ndarray:
        """(T, 3, 3) triangle corner coordinates."""
        return self.vertices[self.triangles]

    @cached_property
    def bounding_sphere(self) -> Sphere:
        return bounding_sphere(self)


def bounding_sphere(mesh: TriMesh) -> Sphere:
    """Containing sphere: centroid seed, then one diameter-based tightening pass.

    Not minimal; radius is within 2x of the optimum, which is all the broad
    phase needs.
    """
    v = mesh.vertices

    def radius_about(center: np.ndarray) -> float:
        return float(np.linalg.norm(v - center, axis=1).max())

    centroid = v.mean(axis=0)
    best_center, best_radius = centroid, radius_about(centroid)
    far1 = v[np.linalg.norm(v - centroid, axis=1).argmax()]
    far2 = v[np.linalg.norm(v - far1, axis=1).argmax()]
    mid = 0.5 * (far1 + far2)
    mid_radius = radius_about(mid)
    if mid_radius < best_radius:
        best_center, best_radius = mid, mid_radius
    return Sphere(np.array(best_center, dtype=float), best_radius)


@dataclass(frozen=True)
class PosedMesh:
    """A mesh placed in the world; the mesh data itself is never mutated."""

    mesh: TriMesh
    pose: Pose = Pose()

    @cached_property
    def world_corners(self) -> np.ndarray:
        return self.pose.apply(self.mesh.corners)

    @cached_property
    def world_normals(self) -> np.ndarray:
        c = self.world_corners
        n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    @cached_property
    def world_sphere(self) -> Sphere:
        local = self.mesh.bounding_sphere
        return Sphere(self.pose.apply(local.center), local.radius)


@dataclass
class CollisionResult:
    """Collision-line segments between two posed meshes and their total length."""

    segments: list[Segment3]
    total_length: float
    pairs_tested: int
    gradient: Optional[np.ndarray] = None

    @staticmethod
    def empty() -> "CollisionResult":
        return CollisionResult([], 0.0, 0)


# ---------------------------------------------------------------------------
# triangle-triangle kernel (plain floats: called per surviving pair)
# ---------------------------------------------------------------------------

def _unit_normal(tri) -> Optional[Point3]:
    (ax, ay, az), (bx, by, bz), (cx, cy, cz) = tri
    ux, uy, uz = bx - ax, by - ay, bz - az
    vx, vy, vz = cx - ax, cy - ay, cz - az
    nx = uy * vz - uz * vy
    ny = uz * vx - ux * vz
    nz = ux * vy - uy * vx
    norm = math.sqrt(nx * nx + ny * ny + nz * nz)
    if norm <= 2.0 * MIN_TRIANGLE_AREA:
        return None
    return (nx / norm, ny / norm, nz / norm)


def _plane_crossings(tri, dists) -> list[Point3]:
    """Points where the triangle boundary meets the plane `dists` refer to."""
    pts: list[Point3] = []
    for i in range(3):
        di = dists[i]
        if abs(di) <= ON_PLANE_EPS:
            pts.append(tri[i])
            continue
        j = (i + 1) % 3
        dj = dists[j]
        if abs(dj) <= ON_PLANE_EPS or (di > 0.0) == (dj > 0.0):
            continue
        t = di / (di - dj)
        pi, pj = tri[i], tri[j]
        pts.append(
            (
                pi[0] + t * (pj[0] - pi[0]),
                pi[1] + t * (pj[1] - pi[1]),
                pi[2] + t * (pj[2] - pi[2]),
            )
        )
    unique: list[Point3] = []
    for p in pts:
        if all(
            (p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 + (p[2] - q[2]) ** 2 > MIN_SEGMENT_LENGTH**2
            for q in unique
        ):
            unique.append(p)
    return unique


def tri_tri_intersection(a, b) -> Optional[Segment3]:
    """Segment where two triangles cross transversally, else None.

    Coplanar overlap and point contact return None: contact that carries no
    length contributes nothing to a collision line, and zero keeps the total
    length continuous as contact begins.
    """
    ta = tuple((float(p[0]), float(p[1]), float(p[2])) for p in a)
    tb = tuple((float(p[0]), float(p[1]), float(p[2])) for p in b)
    na = _unit_normal(ta)
    nb = _unit_normal(tb)
    if na is None or nb is None:
        raise ValueError("degenerate triangle")

    # A transversal crossing needs each triangle to carry material strictly on
    # both sides of the other's plane; this single check also rejects disjoint,
    # tangential (point/edge touch), and coplanar contact.
    b0 = tb[0]
    da = tuple(
        (p[0] - b0[0]) * nb[0] + (p[1] - b0[1]) * nb[1] + (p[2] - b0[2]) * nb[2] for p in ta
    )
    if not (min(da) < -ON_PLANE_EPS and max(da) > ON_PLANE_EPS):
        return None

    a0 = ta[0]
    db = tuple(
        (p[0] - a0[0]) * na[0] + (p[1] - a0[1]) * na[1] + (p[2] - a0[2]) * na[2] for p in tb
    )
    if not (min(db) < -ON_PLANE_EPS and max(db) > ON_PLANE_EPS):
        return None

    dx = na[1] * nb[2] - na[2] * nb[1]
    dy = na[2] * nb[0] - na[0] * nb[2]
    dz = na[0] * nb[1] - na[1] * nb[0]
    dn = math.sqrt(dx * dx + dy * dy + dz * dz)
    if dn <= ON_PLANE_EPS:
        return None
    dx, dy, dz = dx / dn, dy / dn, dz / dn

    pa = _plane_crossings(ta, da)
    pb = _plane_crossings(tb, db)
    if len(pa) < 2 or len(pb) < 2:
        return None

    def span(points):
        scored = [(p[0] * dx + p[1] * dy + p[2] * dz, p) for p in points]
        return min(scored), max(scored)

    a_lo, a_hi = span(pa)
    b_lo, b_hi = span(pb)
    lo = a_lo if a_lo[0] >= b_lo[0] else b_lo
    hi = a_hi if a_hi[0] <= b_hi[0] else b_hi
    if hi[0] - lo[0] <= MIN_SEGMENT_LENGTH:
        return None
    return (lo[1], hi[1])


def segment_length(seg: Segment3) -> float:
    (x0, y0, z0), (x1, y1, z1) = seg
    return math.sqrt((x1 - x0) ** 2 + (y1 - y0) ** 2 + (z1 - z0) ** 2)


# ---------------------------------------------------------------------------
# mesh-level collision line
# ---------------------------------------------------------------------------

def _candidate_pairs(a: PosedMesh, b: PosedMesh) -> np.ndarray:
    """(N, 2) triangle index pairs that strictly straddle each other's planes.

    Same epsilon and same criterion as the scalar kernel's first rejection, so
    the survivors are exactly the pairs the kernel alone would keep.
    """
    ca, cb = a.world_corners, b.world_corners
    na, nb = a.world_normals, b.world_normals
    # d_ab[i, j, k]: signed distance of corner k of a's triangle i to b's plane j
    d_ab = np.einsum("iak,jk->ija", ca, nb) - np.einsum("jk,jk->j", cb[:, 0], nb)[None, :, None]
    straddle_ab = (d_ab > ON_PLANE_EPS).any(axis=2) & (d_ab < -ON_PLANE_EPS).any(axis=2)
    d_ba = np.einsum("jak,ik->ija", cb, na) - np.einsum("ik,ik->i", ca[:, 0], na)[:, None, None]
    straddle_ba = (d_ba > ON_PLANE_EPS).any(axis=2) & (d_ba < -ON_PLANE_EPS).any(axis=2)
    return np.argwhere(straddle_ab & straddle_ba)


def collision_line(a: PosedMesh, b: PosedMesh) -> CollisionResult:
    """Collision line between two posed meshes.

    Disjoint bounding spheres short-circuit to an empty result with
    pairs_tested = 0; otherwise every triangle pair is under test and the
    transversal crossing segments are summed. The gradient field is left unset.
    """
    sa, sb = a.world_sphere, b.world_sphere
    if float(np.linalg.norm(sa.center - sb.center)) > sa.radius + sb.radius:
        return CollisionResult.empty()
    if len(a.mesh) == 0 or len(b.mesh) == 0:
        return CollisionResult([], 0.0, len(a.mesh) * len(b.mesh))
    ca, cb = a.world_corners, b.world_corners
    segments: list[Segment3] = []
    total = 0.0
    for i, j in _candidate_pairs(a, b):
        seg = tri_tri_intersection(ca[i], cb[j])
        if seg is not None:
            segments.append(seg)
            total += segment_length(seg)
    return CollisionResult(segments, total, len(a.mesh) * len(b.mesh))


def total_collision_length(subjects: Sequence[PosedMesh], obstacles: Sequence[PosedMesh]) -> float:
    """Sum of collision-line lengths over every subject/obstacle mesh pair."""
    return sum(collision_line(s, o).total_length for s in subjects for o in obstacles)


def collision_gradient(
    subject: Sequence[PosedMesh],
    obstacles: Sequence[PosedMesh],
    pose,
    h_pos: float,
    h_ang: float,
) -> np.ndarray:
    """Central-difference gradient of total collision length w.r.t. (x, y, heading).

    `pose` is the planar frame the subject meshes are rigidly attached to
    (anything with .x, .y, .heading). Probes re-pose the whole subject around
    the perturbed frame; obstacles stay fixed. Deterministic and reentrant.
    """
    if h_pos <= 0.0 or h_ang <= 0.0:
        raise ValueError("finite-difference steps must be positive")
    frame = Pose(pose.x, pose.y, 0.0, pose.heading)
    inv = frame.inverse()
    local = [(m.mesh, inv.compose(m.pose)) for m in subject]

    def length_at(x: float, y: float, heading: float) -> float:
        at = Pose(x, y, 0.0, heading)
        placed = [PosedMesh(mesh, at.compose(rel)) for mesh, rel in local]
        return total_collision_length(placed, obstacles)

    x, y, heading = pose.x, pose.y, pose.heading
    return np.array(
        [
            (length_at(x + h_pos, y, heading) - length_at(x - h_pos, y, heading)) / (2.0 * h_pos),
            (length_at(x, y + h_pos, heading) - length_at(x, y - h_pos, heading)) / (2.0 * h_pos),
            (length_at(x, y, heading + h_ang) - length_at(x, y, heading - h_ang)) / (2.0 * h_ang),
        ]
    )


# ---------------------------------------------------------------------------
# line-of-sight occlusion
# ---------------------------------------------------------------------------

def _segment_point_distance(p0: np.ndarray, p1: np.ndarray, point: np.ndarray) -> float:
    d = p1 - p0
    denom = float(d @ d)
    t = 0.0 if denom == 0.0 else float(np.clip((point - p0) @ d / denom, 0.0, 1.0))
    return float(np.linalg.norm(p0 + t * d - point))


def _segment_hits_corners(origin: np.ndarray, direction: np.ndarray, corners: np.ndarray) -> bool:
    v0 = corners[:, 0]
    e1 = corners[:, 1] - v0
    e2 = corners[:, 2] - v0
    pvec = np.cross(direction, e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    ok = np.abs(det) > 1e-15
    if not ok.any():
        return False
    inv = np.zeros_like(det)
    inv[ok] = 1.0 / det[ok]
    tvec = origin - v0
    u = np.einsum("ij,ij->i", tvec, pvec) * inv
    qvec = np.cross(tvec, e1)
    v = np.einsum("j,ij->i", direction, qvec) * inv
    t = np.einsum("ij,ij->i", e2, qvec) * inv
    eps = 1e-12
    hits = ok & (u >= -eps) & (v >= -eps) & (u + v <= 1.0 + eps) & (t >= -eps) & (t <= 1.0 + eps)
    return bool(hits.any())


def segment_occluded(segment, obstacles: Sequence[PosedMesh]) -> bool:
    """True when the segment crosses any obstacle triangle (broad-phase culled)."""
    p0 = np.asarray(segment[0], dtype=float)
    p1 = np.asarray(segment[1], dtype=float)
    direction = p1 - p0
    if float(np.linalg.norm(direction)) <= MIN_SEGMENT_LENGTH:
        raise ValueError("degenerate segment")
    for posed in obstacles:
        if len(posed.mesh) == 0:
            continue
        sphere = posed.world_sphere
        if _segment_point_distance(p0, p1, sphere.center) > sphere.radius:
            continue
        if _segment_hits_corners(p0, direction, posed.world_corners):
            return True
    return False


# ---------------------------------------------------------------------------
# procedural meshes
# ---------------------------------------------------------------------------

def make_cone_mesh(vertex, target, half_angle: float, facets: int) -> TriMesh:
    """Open faceted lateral cone surface (no base cap).

    The apex sits at `vertex`; the base ring is a regular `facets`-gon inscribed
    in the circle of radius |target - vertex| * tan(half_angle), lying in the
    plane through `target` orthogonal to the apex-to-target direction.
    """
    apex = np.asarray(vertex, dtype=float)
    center = np.asarray(target, dtype=float)
    axis = center - apex
    length = float(np.linalg.norm(axis))
    if length < COINCIDENT_EPS:
        raise ValueError("cone apex coincides with target")
    if not 0.0 < half_angle < math.pi / 2.0:
        raise ValueError("half_angle must lie in (0, pi/2)")
    if facets < 3:
        raise ValueError("a cone needs at least 3 facets")
    axis_dir = axis / length
    ref = np.array([0.0, 0.0, 1.0]) if abs(axis_dir[2]) <= 0.9 else np.array([1.0, 0.0, 0.0])
    side1 = np.cross(axis_dir, ref)
    side1 /= np.linalg.norm(side1)
    side2 = np.cross(axis_dir, side1)
    radius = length * math.tan(half_angle)
    angles = np.linspace(0.0, math.tau, facets, endpoint=False)
    ring = center + radius * (np.cos(angles)[:, None] * side1 + np.sin(angles)[:, None] * side2)
    vertices = np.vstack([apex, ring])
    triangles = [(0, 1 + k, 1 + (k + 1) % facets) for k in range(facets)]
    return TriMesh(vertices, triangles)


_BOX_FACES = (
    (0, 1, 2), (0, 2, 3),  # bottom
    (4, 6, 5), (4, 7, 6),  # top
    (0, 4, 5), (0, 5, 1),  # front
    (1, 5, 6), (1, 6, 2),  # right
    (2, 6, 7), (2, 7, 3),  # back
    (3, 7, 4), (3, 4, 0),  # left
)


def make_box_mesh(size, center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Axis-aligned box of the given (x, y, z) size as 12 triangles."""
    hx, hy, hz = (float(s) / 2.0 for s in size)
    cx, cy, cz = (float(c) for c in center)
    corners = [
        (cx - hx, cy - hy, cz - hz),
        (cx + hx, cy - hy, cz - hz),
        (cx + hx, cy + hy, cz - hz),
        (cx - hx, cy + hy, cz - hz),
        (cx - hx, cy - hy, cz + hz),
        (cx + hx, cy - hy, cz + hz),
        (cx + hx, cy + hy, cz + hz),
        (cx - hx, cy + hy, cz + hz),
    ]
    return TriMesh(corners, _BOX_FACES)

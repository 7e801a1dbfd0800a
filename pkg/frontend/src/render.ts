// Top-down floor-plane rendering of the world plus strip charts. Pure drawing:
// everything shown comes from the latest snapshot and the scene frame.

import type { Scene, SceneMesh, Snapshot } from "./protocol.js";
import { stSegmentColor } from "./viewmodel.js";
import type { Viewport } from "./steer.js";
import { worldToScreen } from "./steer.js";

const COLORS = {
  background: "#10151c",
  grid: "#1d2633",
  obstacle: "#4a5a70",
  obstacleEdge: "#2c3a4d",
  trunk: "#e8b339",
  headIndicator: "#7ec8ff",
  target: "#ff5d73",
  waypoint: "#ffb8c2",
  cone: "rgba(126, 200, 255, 0.25)",
  text: "#c6d4e2",
};

function meshFootprint(mesh: SceneMesh): [number, number][][] {
  const pose = mesh.pose ?? { x: 0, y: 0, z: 0, yaw: 0 };
  const c = Math.cos(pose.yaw);
  const s = Math.sin(pose.yaw);
  const placed = mesh.vertices.map(([x, y]) => [
    c * x - s * y + pose.x,
    s * x + c * y + pose.y,
  ]) as [number, number][];
  return mesh.triangles.map((tri) => tri.map((i) => placed[i]) as [number, number][]);
}

function drawPolygon(
  ctx: CanvasRenderingContext2D,
  view: Viewport,
  points: [number, number][],
  fill: string,
  stroke?: string,
): void {
  if (points.length === 0) return;
  ctx.beginPath();
  const [sx, sy] = worldToScreen(view, points[0][0], points[0][1]);
  ctx.moveTo(sx, sy);
  for (const [x, y] of points.slice(1)) {
    const [px, py] = worldToScreen(view, x, y);
    ctx.lineTo(px, py);
  }
  ctx.closePath();
  ctx.fillStyle = fill;
  ctx.fill();
  if (stroke) {
    ctx.strokeStyle = stroke;
    ctx.stroke();
  }
}

function drawGrid(ctx: CanvasRenderingContext2D, view: Viewport): void {
  ctx.strokeStyle = COLORS.grid;
  ctx.lineWidth = 1;
  const halfW = view.width / 2 / view.scale;
  const halfH = view.height / 2 / view.scale;
  const x0 = Math.floor(view.centerX - halfW);
  const x1 = Math.ceil(view.centerX + halfW);
  const y0 = Math.floor(view.centerY - halfH);
  const y1 = Math.ceil(view.centerY + halfH);
  ctx.beginPath();
  for (let x = x0; x <= x1; x++) {
    const [px] = worldToScreen(view, x, 0);
    ctx.moveTo(px, 0);
    ctx.lineTo(px, view.height);
  }
  for (let y = y0; y <= y1; y++) {
    const [, py] = worldToScreen(view, 0, y);
    ctx.moveTo(0, py);
    ctx.lineTo(view.width, py);
  }
  ctx.stroke();
}

function trunkFootprint(scene: Scene, snap: Snapshot): [number, number][] {
  const xs = scene.members.trunk.vertices.map((v) => v[0]);
  const ys = scene.members.trunk.vertices.map((v) => v[1]);
  const hx = Math.max(...xs.map(Math.abs));
  const hy = Math.max(...ys.map(Math.abs));
  const { x, y, heading } = snap.pose;
  const c = Math.cos(heading);
  const s = Math.sin(heading);
  const local: [number, number][] = [
    [-hx, -hy],
    [hx, -hy],
    [hx, hy],
    [-hx, hy],
  ];
  return local.map(([lx, ly]) => [c * lx - s * ly + x, s * lx + c * ly + y]);
}

export function drawWorld(
  ctx: CanvasRenderingContext2D,
  view: Viewport,
  scene: Scene | null,
  snap: Snapshot | null,
): void {
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, view.width, view.height);
  drawGrid(ctx, view);
  if (!scene || !snap) {
    ctx.fillStyle = COLORS.text;
    ctx.font = "14px sans-serif";
    ctx.fillText("waiting for scene…", 16, 24);
    return;
  }

  for (const obstacle of scene.obstacles) {
    for (const tri of meshFootprint(obstacle)) {
      drawPolygon(ctx, view, tri, COLORS.obstacle, COLORS.obstacleEdge);
    }
  }

  // targets: bottom of the stack is the final goal, the rest are waypoints
  const stack = snap.target_stack;
  stack.forEach(([tx, ty], index) => {
    const [px, py] = worldToScreen(view, tx, ty);
    const isFinal = index === 0;
    ctx.beginPath();
    ctx.arc(px, py, isFinal ? 7 : 5, 0, Math.PI * 2);
    ctx.fillStyle = isFinal ? COLORS.target : COLORS.waypoint;
    ctx.fill();
    ctx.fillStyle = COLORS.text;
    ctx.font = "11px sans-serif";
    ctx.fillText(isFinal ? "target" : `wp${stack.length - 1 - index}`, px + 9, py + 4);
  });

  // view cone footprint: sight line plus the cone's circle at the target plane
  const current = stack[stack.length - 1];
  const [ex, ey, ez] = snap.eye;
  if (current) {
    const [tx, ty, tz] = current;
    const span = Math.hypot(tx - ex, ty - ey, tz - ez);
    const radius = span * Math.tan(snap.cone_half_angle);
    const [cx, cy] = worldToScreen(view, tx, ty);
    ctx.beginPath();
    ctx.arc(cx, cy, Math.max(radius * view.scale, 2), 0, Math.PI * 2);
    ctx.fillStyle = COLORS.cone;
    ctx.fill();

    // eye-to-target segment colored by the occlusion flag
    const [sx, sy] = worldToScreen(view, ex, ey);
    ctx.beginPath();
    ctx.moveTo(sx, sy);
    ctx.lineTo(cx, cy);
    ctx.strokeStyle = stSegmentColor(snap.occluded);
    ctx.lineWidth = 2;
    ctx.stroke();
  }

  // manikin: trunk footprint, heading glyph, head-yaw indicator
  drawPolygon(ctx, view, trunkFootprint(scene, snap), COLORS.trunk);
  const { x, y, heading } = snap.pose;
  const [mx, my] = worldToScreen(view, x, y);
  const forward = 0.45;
  const [fx, fy] = worldToScreen(
    view,
    x - Math.sin(heading) * forward,
    y + Math.cos(heading) * forward,
  );
  ctx.beginPath();
  ctx.moveTo(mx, my);
  ctx.lineTo(fx, fy);
  ctx.strokeStyle = "#111";
  ctx.lineWidth = 3;
  ctx.stroke();

  const gazeAngle = heading + snap.joints.yaw;
  const [gx, gy] = worldToScreen(
    view,
    x - Math.sin(gazeAngle) * 0.7,
    y + Math.cos(gazeAngle) * 0.7,
  );
  ctx.beginPath();
  ctx.moveTo(mx, my);
  ctx.lineTo(gx, gy);
  ctx.strokeStyle = COLORS.headIndicator;
  ctx.lineWidth = 2;
  ctx.stroke();
}

export function drawSeries(
  ctx: CanvasRenderingContext2D,
  width: number,
  height: number,
  values: number[],
  color: string,
  label: string,
  fixedMax?: number,
): void {
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, width, height);
  ctx.strokeStyle = COLORS.grid;
  ctx.strokeRect(0.5, 0.5, width - 1, height - 1);
  ctx.fillStyle = COLORS.text;
  ctx.font = "10px sans-serif";
  if (values.length > 1) {
    const max = fixedMax ?? Math.max(...values, 1e-9);
    const min = fixedMax === undefined ? Math.min(...values, 0) : 0;
    const range = max - min || 1;
    ctx.beginPath();
    values.forEach((value, i) => {
      const px = (i / (values.length - 1)) * (width - 8) + 4;
      const py = height - 12 - ((value - min) / range) * (height - 20);
      if (i === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    });
    ctx.strokeStyle = color;
    ctx.lineWidth = 1.5;
    ctx.stroke();
    ctx.fillText(`${label}: ${values[values.length - 1].toFixed(3)}`, 6, 10);
  } else {
    ctx.fillText(label, 6, 10);
  }
}

// Console entry point: wires the socket client, viewport, steering, panel, and
// the render loop together.

import { SimClient } from "./client.js";
import { Panel } from "./panel.js";
import { drawSeries, drawWorld } from "./render.js";
import { DragCoalescer, screenToWorld, Viewport } from "./steer.js";
import { ViewModel } from "./viewmodel.js";

const canvas = document.getElementById("viewport") as HTMLCanvasElement;
const chartCollision = document.getElementById("chart-collision") as HTMLCanvasElement;
const chartComfort = document.getElementById("chart-comfort") as HTMLCanvasElement;
const chartCone = document.getElementById("chart-cone") as HTMLCanvasElement;
const panelRoot = document.getElementById("panel") as HTMLElement;

const vm = new ViewModel();
const wsUrl = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/ws`;
const client = new SimClient(wsUrl, vm);
const panel = new Panel(panelRoot, client);

const view: Viewport = {
  scale: 70,
  centerX: 0,
  centerY: 2,
  width: canvas.width,
  height: canvas.height,
};

const steer = new DragCoalescer(1 / view.scale);

const GRAB_RADIUS_M = 0.6; // drags starting this close to the manikin steer it

let steering = false;
let lastPointer: [number, number] | null = null;
let dragMoved = false;

function nearManikin(px: number, py: number): boolean {
  if (!vm.snapshot) return false;
  const [wx, wy] = screenToWorld(view, px, py);
  const { x, y } = vm.snapshot.pose;
  return Math.hypot(wx - x, wy - y) <= GRAB_RADIUS_M;
}

canvas.addEventListener("pointerdown", (event) => {
  steering = nearManikin(event.offsetX, event.offsetY);
  dragMoved = false;
  lastPointer = [event.offsetX, event.offsetY];
  canvas.setPointerCapture(event.pointerId);
});

canvas.addEventListener("pointermove", (event) => {
  if (!lastPointer) return;
  const dx = event.offsetX - lastPointer[0];
  const dy = event.offsetY - lastPointer[1];
  if (dx !== 0 || dy !== 0) {
    dragMoved = true;
    if (steering) steer.addDrag(dx, dy);
    lastPointer = [event.offsetX, event.offsetY];
  }
});

canvas.addEventListener("pointerup", (event) => {
  canvas.releasePointerCapture(event.pointerId);
  if (!dragMoved && !steering) {
    // click away from the manikin: waypoint; modifier-click: retarget
    const [wx, wy] = screenToWorld(view, event.offsetX, event.offsetY);
    const z = vm.snapshot ? vm.snapshot.eye[2] : 1.5;
    const type = event.shiftKey || event.ctrlKey ? "set_target" : "push_waypoint";
    client.send({ type, point: [wx, wy, z] });
  }
  steering = false;
  lastPointer = null;
});

window.addEventListener("keydown", (event) => {
  if (event.key === "q") steer.addTurn(0.05);
  if (event.key === "e") steer.addTurn(-0.05);
});

function frame(): void {
  // at most one coalesced operator command per frame
  const input = steer.flush();
  if (input) client.send(input);

  const ctx = canvas.getContext("2d");
  if (ctx) drawWorld(ctx, view, vm.scene, vm.snapshot);
  const c1 = chartCollision.getContext("2d");
  if (c1) {
    drawSeries(c1, chartCollision.width, chartCollision.height, vm.collisionSeries.values, "#e74c3c", "collision m");
  }
  const c2 = chartComfort.getContext("2d");
  if (c2) {
    drawSeries(c2, chartComfort.width, chartComfort.height, vm.comfortSeries.values, "#27ae60", "comfort", 1);
  }
  const c3 = chartCone.getContext("2d");
  if (c3) {
    drawSeries(c3, chartCone.width, chartCone.height, vm.coneSeries.values, "#7ec8ff", "cone rad");
  }
  panel.refresh();
  requestAnimationFrame(frame);
}

client.connect();
requestAnimationFrame(frame);

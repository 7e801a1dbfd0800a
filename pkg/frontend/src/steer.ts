// Pointer/keyboard steering mapped onto the operator agent's (dx, dy, dtheta).
// Rapid drag events are coalesced to at most one command per flush while
// preserving the total commanded displacement.

import type { OperatorInputCommand } from "./protocol.js";

export class DragCoalescer {
  metersPerPixel: number;
  private dx = 0;
  private dy = 0;
  private dtheta = 0;

  constructor(metersPerPixel: number) {
    this.metersPerPixel = metersPerPixel;
  }

  /** Screen-space drag: +x right, +y down; world is top-down with +y up-screen. */
  addDrag(dxPixels: number, dyPixels: number): void {
    this.dx += dxPixels * this.metersPerPixel;
    this.dy += -dyPixels * this.metersPerPixel;
  }

  addTurn(dtheta: number): void {
    this.dtheta += dtheta;
  }

  get empty(): boolean {
    return this.dx === 0 && this.dy === 0 && this.dtheta === 0;
  }

  /** Drain the accumulator into one operator_input command (null when idle). */
  flush(): OperatorInputCommand | null {
    if (this.empty) return null;
    const command: OperatorInputCommand = {
      type: "operator_input",
      dx: this.dx,
      dy: this.dy,
      dtheta: this.dtheta,
    };
    this.dx = 0;
    this.dy = 0;
    this.dtheta = 0;
    return command;
  }
}

export interface Viewport {
  /** canvas pixels per world meter */
  scale: number;
  /** world coordinates at the canvas center */
  centerX: number;
  centerY: number;
  width: number;
  height: number;
}

export function worldToScreen(view: Viewport, x: number, y: number): [number, number] {
  return [
    view.width / 2 + (x - view.centerX) * view.scale,
    view.height / 2 - (y - view.centerY) * view.scale,
  ];
}

export function screenToWorld(view: Viewport, px: number, py: number): [number, number] {
  return [
    view.centerX + (px - view.width / 2) / view.scale,
    view.centerY - (py - view.height / 2) / view.scale,
  ];
}

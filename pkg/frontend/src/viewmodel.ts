// Client-side view of the blackboard. Rendering reads only what the server
// sent: the console never simulates locally, and a stale or closed console
// can never perturb the run.

import type { ClientCommand, Scene, ServerMessage, Snapshot } from "./protocol.js";

export type ConnectionState = "connecting" | "connected" | "disconnected";

export interface PendingCommand {
  command: ClientCommand;
  state: "pending" | "acked" | "error";
  ackTick?: number;
  error?: string;
}

export class SeriesBuffer {
  readonly capacity: number;
  readonly values: number[] = [];

  constructor(capacity: number) {
    this.capacity = capacity;
  }

  push(value: number): void {
    this.values.push(value);
    if (this.values.length > this.capacity) {
      this.values.splice(0, this.values.length - this.capacity);
    }
  }

  clear(): void {
    this.values.length = 0;
  }
}

export const ST_SEGMENT_COLORS = {
  visible: "#27ae60",
  occluded: "#e74c3c",
} as const;

export function stSegmentColor(occluded: boolean): string {
  return occluded ? ST_SEGMENT_COLORS.occluded : ST_SEGMENT_COLORS.visible;
}

const SERIES_CAPACITY = 600;

export class ViewModel {
  connection: ConnectionState = "connecting";
  scene: Scene | null = null;
  snapshot: Snapshot | null = null;
  statusNote = "";
  monotonicityViolations = 0;
  pending = new Map<number | string, PendingCommand>();

  readonly collisionSeries = new SeriesBuffer(SERIES_CAPACITY);
  readonly comfortSeries = new SeriesBuffer(SERIES_CAPACITY);
  readonly coneSeries = new SeriesBuffer(SERIES_CAPACITY);

  private lastTick = -1;

  handleMessage(msg: ServerMessage): void {
    switch (msg.type) {
      case "hello":
        break;
      case "scene":
        // a scene frame starts a new world epoch: reset derived state
        this.scene = msg;
        this.lastTick = -1;
        this.collisionSeries.clear();
        this.comfortSeries.clear();
        this.coneSeries.clear();
        break;
      case "snapshot":
        if (msg.tick <= this.lastTick) {
          this.monotonicityViolations += 1;
          console.warn(
            `snapshot tick ${msg.tick} not above ${this.lastTick}: server/client out of sync`,
          );
        }
        this.lastTick = msg.tick;
        this.snapshot = msg;
        this.collisionSeries.push(msg.collision_length);
        this.comfortSeries.push(msg.comfort);
        this.coneSeries.push(msg.cone_half_angle);
        break;
      case "ack": {
        const entry = msg.id !== undefined ? this.pending.get(msg.id) : undefined;
        if (entry) {
          entry.state = "acked";
          entry.ackTick = msg.tick;
        }
        this.statusNote = `${msg.command} @ tick ${msg.tick}`;
        break;
      }
      case "error": {
        const entry = msg.id !== undefined ? this.pending.get(msg.id) : undefined;
        if (entry) {
          entry.state = "error";
          entry.error = msg.message;
        }
        this.statusNote = `error: ${msg.message}`;
        break;
      }
    }
  }

  trackCommand(id: number | string, command: ClientCommand): void {
    this.pending.set(id, { command, state: "pending" });
    if (this.pending.size > 200) {
      const oldest = this.pending.keys().next().value;
      if (oldest !== undefined) this.pending.delete(oldest);
    }
  }

  agentRow(name: string) {
    return this.snapshot?.agents.find((a) => a.name === name) ?? null;
  }
}

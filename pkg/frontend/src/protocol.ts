// Wire types for the live-session protocol (JSON text frames over a WebSocket).

export interface PoseMsg {
  x: number;
  y: number;
  heading: number;
}

export interface JointsMsg {
  pitch: number;
  bend: number;
  yaw: number;
}

export interface ContributionMsg {
  dx: number;
  dy: number;
  dheading: number;
  dpitch: number;
  dhead_yaw: number;
  dcone: number;
}

export interface AgentRow {
  name: string;
  rate: number;
  active: boolean;
  gain: number;
  fires: number;
  last: ContributionMsg | null;
}

export interface Snapshot {
  type: "snapshot";
  tick: number;
  pose: PoseMsg;
  joints: JointsMsg;
  cone_half_angle: number;
  collision_length: number;
  cone_collision_length: number;
  occluded: boolean;
  comfort: number;
  status: string;
  eye: number[];
  target_stack: number[][];
  delta_pos: number;
  delta_or: number;
  agents: AgentRow[];
}

export interface SceneMesh {
  vertices: number[][];
  triangles: number[][];
  pose?: { x: number; y: number; z: number; yaw: number };
  name?: string;
}

export interface Scene {
  type: "scene";
  protocol: number;
  obstacles: SceneMesh[];
  members: { trunk: SceneMesh; head: SceneMesh };
  body: { neck_height: number; eye_forward: number; eye_up: number };
  tolerances: { pos: number; ang: number };
  cone: { min_half_angle: number; max_half_angle: number; facets: number };
  tick_rate_hz: number;
}

export interface Hello {
  type: "hello";
  protocol: number;
}

export interface Ack {
  type: "ack";
  command: string;
  tick: number;
  id?: number | string;
}

export interface ErrorFrame {
  type: "error";
  message: string;
  id?: number | string;
}

export type ServerMessage = Hello | Scene | Snapshot | Ack | ErrorFrame;

export interface OperatorInputCommand {
  type: "operator_input";
  dx: number;
  dy: number;
  dtheta: number;
  id?: number;
}

export interface ConfigureCommand {
  type: "configure";
  command:
    | "set_rate"
    | "pause"
    | "resume"
    | "set_gain"
    | "set_delta_pos"
    | "set_delta_or";
  agent?: string;
  value?: number;
  id?: number;
}

export interface TargetCommand {
  type: "set_target" | "push_waypoint";
  point: [number, number, number];
  id?: number;
}

export interface RunControlCommand {
  type: "run" | "pause_sim" | "reset";
  id?: number;
}

export interface StepCommand {
  type: "step_n";
  n: number;
  id?: number;
}

export type ClientCommand =
  | OperatorInputCommand
  | ConfigureCommand
  | TargetCommand
  | RunControlCommand
  | StepCommand;

export function parseServerMessage(text: string): ServerMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const type = (data as { type?: unknown }).type;
  if (
    type === "hello" ||
    type === "scene" ||
    type === "snapshot" ||
    type === "ack" ||
    type === "error"
  ) {
    return data as ServerMessage;
  }
  return null;
}

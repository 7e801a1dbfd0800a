// Round-trip behavior against a scripted fake server that mimics the live
// session protocol: pause an agent, see it inactive in the next snapshot;
// steer, and track the ack tick for the applied input.

import { describe, expect, it } from "vitest";

import { SimClient, SocketLike } from "../src/client.js";
import type { AgentRow, Snapshot } from "../src/protocol.js";
import { DragCoalescer } from "../src/steer.js";
import { ViewModel } from "../src/viewmodel.js";

class FakeServer {
  tick = 0;
  operatorRate = 9;
  agents: AgentRow[] = [
    { name: "repulsion", rate: 1, active: true, gain: 1, fires: 0, last: null },
    { name: "attraction", rate: 3, active: true, gain: 1, fires: 0, last: null },
    { name: "operator", rate: 9, active: true, gain: 1, fires: 0, last: null },
  ];

  snapshot(): Snapshot {
    return {
      type: "snapshot",
      tick: this.tick,
      pose: { x: 0, y: 0, heading: 0 },
      joints: { pitch: 0, bend: 0, yaw: 0 },
      cone_half_angle: 0.05,
      collision_length: 0,
      cone_collision_length: 0,
      occluded: false,
      comfort: 1,
      status: "in_progress",
      eye: [0, 0.1, 1.6],
      target_stack: [[0, 5, 1.6]],
      delta_pos: 0.05,
      delta_or: 0.02,
      agents: this.agents.map((a) => ({ ...a })),
    };
  }

  handle(frame: Record<string, unknown>): object[] {
    const type = frame.type as string;
    if (type === "configure" && frame.command === "pause") {
      const agent = this.agents.find((a) => a.name === frame.agent);
      if (!agent) return [{ type: "error", message: "unknown agent", id: frame.id }];
      agent.active = false;
      agent.last = null;
      return [{ type: "ack", command: "pause", tick: this.tick, id: frame.id }];
    }
    if (type === "operator_input") {
      const ackTick = Math.ceil(this.tick / this.operatorRate) * this.operatorRate;
      return [{ type: "ack", command: "operator_input", tick: ackTick, id: frame.id }];
    }
    if (type === "step_n") {
      this.tick += frame.n as number;
      return [
        { type: "ack", command: "step_n", tick: this.tick, id: frame.id },
        this.snapshot(),
      ];
    }
    return [{ type: "error", message: `unknown ${type}`, id: frame.id }];
  }
}

class FakeSocket implements SocketLike {
  onopen: (() => void) | null = null;
  onclose: (() => void) | null = null;
  onmessage: ((event: { data: string }) => void) | null = null;
  closed = false;

  constructor(private readonly server: FakeServer) {}

  open(): void {
    this.onopen?.();
    this.deliver({ type: "hello", protocol: 1 });
    // the live server sends the scene on every (re)connection, which resets
    // the client's snapshot epoch
    this.deliver({
      type: "scene",
      protocol: 1,
      obstacles: [],
      members: { trunk: { vertices: [], triangles: [] }, head: { vertices: [], triangles: [] } },
      body: { neck_height: 1.5, eye_forward: 0.1, eye_up: 0.1 },
      tolerances: { pos: 0.1, ang: 0.05 },
      cone: { min_half_angle: 0.05, max_half_angle: 0.35, facets: 8 },
      tick_rate_hz: 50,
    });
    this.deliver(this.server.snapshot());
  }

  send(data: string): void {
    for (const reply of this.server.handle(JSON.parse(data))) {
      this.deliver(reply);
    }
  }

  close(): void {
    this.closed = true;
    this.onclose?.();
  }

  private deliver(message: object): void {
    this.onmessage?.({ data: JSON.stringify(message) });
  }
}

function connectedClient(server: FakeServer): { client: SimClient; vm: ViewModel; socket: FakeSocket } {
  const vm = new ViewModel();
  let socket!: FakeSocket;
  const client = new SimClient(
    "ws://fake/ws",
    vm,
    () => {
      socket = new FakeSocket(server);
      return socket;
    },
    () => 0,
  );
  client.connect();
  socket.open();
  return { client, vm, socket };
}

describe("pause round-trip", () => {
  it("acks the pause and the next snapshot registry shows the agent inactive", () => {
    const server = new FakeServer();
    const { client, vm } = connectedClient(server);
    const id = client.send({ type: "configure", command: "pause", agent: "attraction" });
    expect(id).not.toBeNull();
    expect(vm.pending.get(id!)?.state).toBe("acked");

    client.send({ type: "step_n", n: 1 });
    const row = vm.agentRow("attraction");
    expect(row).not.toBeNull();
    expect(row!.active).toBe(false);
    expect(row!.last).toBeNull(); // zero live contribution while paused
  });
});

describe("drag round-trip", () => {
  it("a drag gesture becomes one operator_input with a tracked applied tick", () => {
    const server = new FakeServer();
    server.tick = 5;
    const { client, vm } = connectedClient(server);

    const steer = new DragCoalescer(0.01);
    steer.addDrag(60, -20);
    steer.addDrag(40, -10);
    const command = steer.flush()!;
    expect(command.dx).toBeCloseTo(1.0, 12);
    expect(command.dy).toBeCloseTo(0.3, 12);

    const id = client.send(command)!;
    const pending = vm.pending.get(id)!;
    expect(pending.state).toBe("acked");
    expect(pending.ackTick).toBe(9); // next rate-9 operator firing after tick 5
  });
});

describe("disconnected behavior", () => {
  it("rejects commands locally with a visible notice", () => {
    const vm = new ViewModel();
    const client = new SimClient("ws://fake/ws", vm, () => {
      throw new Error("no server");
    });
    expect(() => client.send({ type: "run" })).not.toThrow();
    expect(client.send({ type: "run" })).toBeNull();
    expect(vm.statusNote).toContain("not connected");
  });

  it("reconnects with growing backoff after a drop", () => {
    const server = new FakeServer();
    const vm = new ViewModel();
    const delays: number[] = [];
    const sockets: FakeSocket[] = [];
    const client = new SimClient(
      "ws://fake/ws",
      vm,
      () => {
        const socket = new FakeSocket(server);
        sockets.push(socket);
        return socket;
      },
      (fn, ms) => {
        delays.push(ms);
        fn(); // run the reconnect immediately in tests
        return 0;
      },
    );
    client.connect();
    sockets[0].open();
    expect(vm.connection).toBe("connected");
    sockets[0].onclose?.(); // drop: reconnect chain runs synchronously
    expect(delays[0]).toBe(500);
    expect(vm.connection).toBe("connecting");
    sockets[1].open();
    expect(vm.connection).toBe("connected");
  });
});

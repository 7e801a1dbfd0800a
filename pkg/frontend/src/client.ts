// WebSocket client: reconnects with backoff, stamps outgoing commands with ids
// so acks can be matched, and feeds every server frame to the view model.

import type { ClientCommand } from "./protocol.js";
import { parseServerMessage } from "./protocol.js";
import { ViewModel } from "./viewmodel.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onclose: (() => void) | null;
  onmessage: ((event: { data: string }) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

const BACKOFF_START_MS = 500;
const BACKOFF_MAX_MS = 8000;

export class SimClient {
  readonly vm: ViewModel;
  private readonly url: string;
  private readonly factory: SocketFactory;
  private readonly setTimer: (fn: () => void, ms: number) => unknown;
  private socket: SocketLike | null = null;
  private backoffMs = BACKOFF_START_MS;
  private nextId = 1;
  private closed = false;

  constructor(
    url: string,
    vm: ViewModel,
    factory: SocketFactory = (u) => new WebSocket(u) as unknown as SocketLike,
    setTimer: (fn: () => void, ms: number) => unknown = (fn, ms) => setTimeout(fn, ms),
  ) {
    this.url = url;
    this.vm = vm;
    this.factory = factory;
    this.setTimer = setTimer;
  }

  connect(): void {
    this.vm.connection = "connecting";
    const socket = this.factory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.vm.connection = "connected";
      this.backoffMs = BACKOFF_START_MS;
    };
    socket.onmessage = (event) => {
      const message = parseServerMessage(event.data);
      if (message) this.vm.handleMessage(message);
    };
    socket.onclose = () => {
      this.socket = null;
      if (this.closed) return;
      this.vm.connection = "disconnected";
      const delay = this.backoffMs;
      this.backoffMs = Math.min(this.backoffMs * 2, BACKOFF_MAX_MS);
      this.setTimer(() => this.connect(), delay);
    };
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
  }

  get connected(): boolean {
    return this.vm.connection === "connected" && this.socket !== null;
  }

  /** Send a command; returns its id, or null when disconnected (recorded in
   * the status bar so the user sees the rejection). */
  send(command: ClientCommand): number | null {
    if (!this.connected || !this.socket) {
      this.vm.statusNote = `not connected: ${command.type} dropped`;
      return null;
    }
    const id = this.nextId++;
    const framed = { ...command, id };
    this.vm.trackCommand(id, framed);
    this.socket.send(JSON.stringify(framed));
    return id;
  }
}

// Side panel: per-agent rows (pause/work, rate, gain, live contribution),
// global normalization controls, run controls, comfort gauge, status bar.
// Every control maps to exactly one protocol command; nothing mutates locally.

import type { SimClient } from "./client.js";
import type { AgentRow } from "./protocol.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

interface AgentRowElements {
  active: HTMLInputElement;
  rate: HTMLInputElement;
  gain: HTMLInputElement;
  live: HTMLSpanElement;
  fires: HTMLSpanElement;
}

export class Panel {
  private readonly client: SimClient;
  private readonly agentRows = new Map<string, AgentRowElements>();
  private readonly statusBar: HTMLElement;
  private readonly comfortFill: HTMLElement;
  private readonly comfortText: HTMLElement;
  private readonly tickLabel: HTMLElement;
  private deltaPos: HTMLInputElement;
  private deltaOr: HTMLInputElement;

  constructor(root: HTMLElement, client: SimClient) {
    this.client = client;

    const controls = el("div", "control-row");
    for (const [label, type] of [
      ["run", "run"],
      ["pause", "pause_sim"],
      ["reset", "reset"],
    ] as const) {
      const button = el("button", "ctl", label);
      button.onclick = () => this.client.send({ type });
      controls.appendChild(button);
    }
    const stepButton = el("button", "ctl", "step 10");
    stepButton.onclick = () => this.client.send({ type: "step_n", n: 10 });
    controls.appendChild(stepButton);
    root.appendChild(controls);

    this.tickLabel = el("div", "tick-label", "tick –");
    root.appendChild(this.tickLabel);

    const deltas = el("div", "delta-row");
    deltas.appendChild(el("span", "lbl", "step caps"));
    this.deltaPos = this.numberInput(deltas, "pos m", (v) =>
      this.client.send({ type: "configure", command: "set_delta_pos", value: v }),
    );
    this.deltaOr = this.numberInput(deltas, "rot rad", (v) =>
      this.client.send({ type: "configure", command: "set_delta_or", value: v }),
    );
    root.appendChild(deltas);

    const gauge = el("div", "comfort-gauge");
    gauge.appendChild(el("span", "lbl", "comfort"));
    const track = el("div", "gauge-track");
    this.comfortFill = el("div", "gauge-fill");
    track.appendChild(this.comfortFill);
    gauge.appendChild(track);
    this.comfortText = el("span", "gauge-text", "–");
    gauge.appendChild(this.comfortText);
    root.appendChild(gauge);

    root.appendChild(el("div", "agents-header", "agents"));
    this.statusBar = el("div", "status-bar", "connecting…");
    root.appendChild(this.statusBar);
  }

  private numberInput(
    parent: HTMLElement,
    placeholder: string,
    onCommit: (value: number) => void,
  ): HTMLInputElement {
    const input = el("input") as HTMLInputElement;
    input.type = "number";
    input.step = "0.01";
    input.placeholder = placeholder;
    input.onchange = () => {
      const value = parseFloat(input.value);
      if (Number.isFinite(value) && value > 0) onCommit(value);
    };
    parent.appendChild(input);
    return input;
  }

  private ensureAgentRow(agent: AgentRow): AgentRowElements {
    const existing = this.agentRows.get(agent.name);
    if (existing) return existing;
    const row = el("div", "agent-row");
    const active = el("input") as HTMLInputElement;
    active.type = "checkbox";
    active.title = "work / pause";
    active.onchange = () =>
      this.client.send({
        type: "configure",
        command: active.checked ? "resume" : "pause",
        agent: agent.name,
      });
    row.appendChild(active);
    row.appendChild(el("span", "agent-name", agent.name));

    const rate = el("input") as HTMLInputElement;
    rate.type = "number";
    rate.min = "1";
    rate.step = "1";
    rate.title = "activity rate (period in ticks)";
    rate.onchange = () => {
      const value = parseInt(rate.value, 10);
      if (Number.isFinite(value) && value >= 1) {
        this.client.send({ type: "configure", command: "set_rate", agent: agent.name, value });
      }
    };
    row.appendChild(rate);

    const gain = el("input") as HTMLInputElement;
    gain.type = "number";
    gain.min = "0.1";
    gain.step = "0.1";
    gain.title = "gain";
    gain.onchange = () => {
      const value = parseFloat(gain.value);
      if (Number.isFinite(value) && value > 0) {
        this.client.send({ type: "configure", command: "set_gain", agent: agent.name, value });
      }
    };
    row.appendChild(gain);

    const fires = el("span", "agent-fires", "0");
    row.appendChild(fires);
    const live = el("span", "agent-live", "—");
    row.appendChild(live);

    this.statusBar.before(row);
    const elements = { active, rate, gain, live, fires };
    this.agentRows.set(agent.name, elements);
    return elements;
  }

  refresh(): void {
    const vm = this.client.vm;
    const snap = vm.snapshot;
    this.statusBar.textContent = `${vm.connection} | ${vm.statusNote || "ready"}`;
    if (!snap) return;
    this.tickLabel.textContent = `tick ${snap.tick} | ${snap.status}`;
    if (document.activeElement !== this.deltaPos) {
      this.deltaPos.value = snap.delta_pos.toFixed(3);
    }
    if (document.activeElement !== this.deltaOr) {
      this.deltaOr.value = snap.delta_or.toFixed(3);
    }
    const comfort = Math.max(0, Math.min(1, snap.comfort));
    this.comfortFill.style.width = `${(comfort * 100).toFixed(0)}%`;
    this.comfortFill.style.background = comfort > 0.6 ? "#27ae60" : comfort > 0.3 ? "#e8b339" : "#e74c3c";
    this.comfortText.textContent = comfort.toFixed(2);

    for (const agent of snap.agents) {
      const row = this.ensureAgentRow(agent);
      if (document.activeElement !== row.active) row.active.checked = agent.active;
      if (document.activeElement !== row.rate) row.rate.value = String(agent.rate);
      if (document.activeElement !== row.gain) row.gain.value = String(agent.gain);
      row.fires.textContent = String(agent.fires);
      if (!agent.active || agent.last === null) {
        row.live.textContent = "—";
      } else {
        const c = agent.last;
        row.live.textContent =
          `${c.dx.toFixed(3)},${c.dy.toFixed(3)},${c.dheading.toFixed(3)}`;
      }
    }
  }
}

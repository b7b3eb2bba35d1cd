// Console state: one plain object, mutated only through these helpers, with
// a change listener the renderer subscribes to.  Device values mirror the
// server; writes are applied from acknowledgments and polled events, never
// optimistically.

import type { DeviceView, RuleRow, TraceEvent } from "./api";

export interface ConsoleState {
  screen: "login" | "main";
  role: "admin" | "viewer" | null;
  mustChangePassword: boolean;
  loginError: string | null;
  devices: Map<string, DeviceView>;
  deviceOrder: string[];
  rules: RuleRow[];
  cursor: number;
  feed: TraceEvent[];
  report: import("./api").MetricsReport | null;
  notice: string | null;
}

export const FEED_LIMIT = 200;

export class Store {
  state: ConsoleState = {
    screen: "login",
    role: null,
    mustChangePassword: false,
    loginError: null,
    devices: new Map(),
    deviceOrder: [],
    rules: [],
    cursor: 0,
    feed: [],
    report: null,
    notice: null,
  };

  private listeners: Array<() => void> = [];

  subscribe(listener: () => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener();
  }

  update(mutate: (state: ConsoleState) => void): void {
    mutate(this.state);
    this.emit();
  }

  setDevices(devices: DeviceView[]): void {
    this.update((state) => {
      state.devices = new Map(devices.map((d) => [d.id, d]));
      state.deviceOrder = devices.map((d) => d.id);
    });
  }

  setRules(rules: RuleRow[]): void {
    this.update((state) => {
      state.rules = rules;
    });
  }

  applyChange(event: TraceEvent): void {
    if (event.type !== "change" || !event.device || !event.property) return;
    const device = this.state.devices.get(event.device);
    if (device) device.state[event.property] = event.new;
  }

  ingestEvents(cursor: number, events: TraceEvent[]): void {
    this.update((state) => {
      state.cursor = cursor;
      for (const event of events) {
        this.applyChange(event);
        if (event.type === "change") {
          state.feed.push(event);
        }
      }
      if (state.feed.length > FEED_LIMIT) {
        state.feed.splice(0, state.feed.length - FEED_LIMIT);
      }
    });
  }

  reset(): void {
    this.update((state) => {
      state.screen = "login";
      state.role = null;
      state.mustChangePassword = false;
      state.devices = new Map();
      state.deviceOrder = [];
      state.rules = [];
      state.cursor = 0;
      state.feed = [];
      state.report = null;
      state.notice = null;
    });
  }
}

// Glue between the API client and the store: login/logout, the event poll
// loop, and every operator action.  The server stays the source of truth;
// device state only moves on acknowledgments and polled events.

import { ApiError, GatewayClient, Stimulus } from "./api";
import { Store } from "./store";

export class Controller {
  private pollTimer: ReturnType<typeof setInterval> | null = null;

  constructor(
    readonly client: GatewayClient,
    readonly store: Store,
    readonly pollIntervalMs = 1000,
  ) {
    client.onAuthLost = () => {
      this.stopPolling();
      this.store.reset();
      this.store.update((state) => {
        state.loginError = "session expired; please log in again";
      });
    };
  }

  async login(address: string, username: string, password: string): Promise<void> {
    this.client.baseUrl = address.replace(/\/+$/, "");
    try {
      const result = await this.client.login(username, password);
      this.store.update((state) => {
        state.screen = "main";
        state.role = result.role;
        state.mustChangePassword = result.must_change_password;
        state.loginError = null;
      });
      await this.refreshDevices();
      await this.refreshRules();
      await this.pollOnce();
      this.startPolling();
    } catch (err) {
      const message = err instanceof ApiError && err.isAuthFailure
        ? "login failed"
        : `login failed: ${err instanceof Error ? err.message : err}`;
      this.store.update((state) => {
        state.loginError = message;
      });
    }
  }

  logout(): void {
    this.stopPolling();
    this.client.logout();
    this.store.reset();
  }

  startPolling(): void {
    if (this.pollTimer !== null) return;
    this.pollTimer = setInterval(() => {
      void this.pollOnce().catch(() => undefined);
    }, this.pollIntervalMs);
  }

  stopPolling(): void {
    if (this.pollTimer !== null) {
      clearInterval(this.pollTimer);
      this.pollTimer = null;
    }
  }

  async pollOnce(): Promise<void> {
    if (!this.client.authenticated) return;
    const { cursor, events } = await this.client.events(this.store.state.cursor);
    if (events.length > 0 || cursor !== this.store.state.cursor) {
      this.store.ingestEvents(cursor, events);
    }
  }

  async refreshDevices(): Promise<void> {
    const { devices } = await this.client.devices();
    this.store.setDevices(devices);
  }

  async refreshRules(): Promise<void> {
    const { rules } = await this.client.rules();
    this.store.setRules(rules);
  }

  async refreshReport(): Promise<void> {
    const report = await this.client.metricsReport();
    this.store.update((state) => {
      state.report = report;
    });
  }

  async setProperty(device: string, property: string, value: unknown): Promise<void> {
    try {
      const { change } = await this.client.putProperty(device, property, value);
      if (change) this.store.applyChange(change);
      this.store.update(() => undefined);
    } catch (err) {
      this.notice(err);
      await this.refreshDevices();
    }
  }

  async saveRule(name: string, text: string): Promise<void> {
    try {
      await this.client.updateRule(name, { text });
    } catch (err) {
      this.notice(err);
    }
    await this.refreshRules();
  }

  async addRule(text: string): Promise<void> {
    try {
      await this.client.addRule(text);
    } catch (err) {
      this.notice(err);
    }
    await this.refreshRules();
  }

  async removeRule(name: string): Promise<void> {
    try {
      await this.client.deleteRule(name);
    } catch (err) {
      this.notice(err);
    }
    await this.refreshRules();
  }

  async toggleRule(name: string, enabled: boolean): Promise<void> {
    try {
      await this.client.updateRule(name, { enabled });
    } catch (err) {
      this.notice(err);
    }
    await this.refreshRules();
  }

  async stimulus(stimulus: Stimulus): Promise<void> {
    try {
      await this.client.injectStimulus(stimulus);
    } catch (err) {
      this.notice(err);
    }
  }

  private notice(err: unknown): void {
    this.store.update((state) => {
      state.notice = err instanceof Error ? err.message : String(err);
    });
  }
}

// Thin typed client over the gateway's HTTP/JSON API.  The bearer token
// lives only in this object; nothing is ever written to durable storage.

export interface PropertySchema {
  name: string;
  kind: "boolean" | "enum" | "number";
  writable_by: "command" | "sensor";
  values?: string[];
  minimum?: number;
  maximum?: number;
  unit?: string;
}

export interface DeviceView {
  id: string;
  kind: string;
  display_name: string;
  serial: string;
  segment: string;
  address: string | null;
  properties: PropertySchema[];
  state: Record<string, unknown>;
}

export interface RuleRow {
  name: string;
  enabled: boolean;
  condition: string;
  actions: string;
  text: string;
}

export interface TraceEvent {
  type: "change" | "snapshot" | "catalog";
  t: number;
  device?: string;
  property?: string;
  old?: unknown;
  new?: unknown;
  cause?: string;
  env?: Record<string, number | boolean>;
}

export interface ReportRow {
  target: string;
  indicator: string;
  baseline: unknown;
  automated: unknown;
  relative_change: number | null;
}

export interface MetricsReport {
  report: { rows: ReportRow[] };
  automated: Record<string, unknown>;
  baseline: Record<string, unknown>;
}

export interface LoginResult {
  token: string;
  role: "admin" | "viewer";
  must_change_password: boolean;
  expires_in_s: number;
}

export type Stimulus =
  | { kind: "motion_pulse" }
  | { kind: "card_scan"; card_id: number }
  | { kind: "fire_start" }
  | { kind: "fire_end" }
  | { kind: "wind_set"; speed: number }
  | { kind: "occupancy_set"; count: number };

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly detail: unknown = null,
  ) {
    super(message);
  }

  get isAuthFailure(): boolean {
    return this.status === 401;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class GatewayClient {
  private token: string | null = null;
  role: "admin" | "viewer" | null = null;
  onAuthLost: (() => void) | null = null;

  constructor(
    public baseUrl: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  get authenticated(): boolean {
    return this.token !== null;
  }

  logout(): void {
    this.token = null;
    this.role = null;
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const headers: Record<string, string> = {};
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    if (body !== undefined) headers["Content-Type"] = "application/json";
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, {
        method,
        headers,
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(0, "unreachable", `cannot reach ${this.baseUrl}: ${err}`);
    }
    if (response.status === 204) return undefined as T;
    const text = await response.text();
    const payload = text ? JSON.parse(text) : null;
    if (!response.ok) {
      const error = new ApiError(
        response.status,
        payload?.code ?? "error",
        payload?.message ?? response.statusText,
        payload?.detail ?? null,
      );
      if (error.isAuthFailure && path !== "/login") {
        this.logout();
        this.onAuthLost?.();
      }
      throw error;
    }
    return payload as T;
  }

  async login(username: string, password: string): Promise<LoginResult> {
    const result = await this.request<LoginResult>("POST", "/login", {
      username,
      password,
    });
    this.token = result.token;
    this.role = result.role;
    return result;
  }

  devices(): Promise<{ devices: DeviceView[] }> {
    return this.request("GET", "/devices");
  }

  device(id: string): Promise<DeviceView> {
    return this.request("GET", `/devices/${encodeURIComponent(id)}`);
  }

  putProperty(
    device: string,
    property: string,
    value: unknown,
  ): Promise<{ change: TraceEvent | null }> {
    return this.request(
      "PUT",
      `/devices/${encodeURIComponent(device)}/properties/${encodeURIComponent(property)}`,
      { value },
    );
  }

  rules(): Promise<{ rules: RuleRow[] }> {
    return this.request("GET", "/rules");
  }

  addRule(text: string): Promise<{ rule: string }> {
    return this.request("POST", "/rules", { text });
  }

  updateRule(
    name: string,
    patch: { text?: string; enabled?: boolean },
  ): Promise<{ rule: string }> {
    return this.request("PUT", `/rules/${encodeURIComponent(name)}`, patch);
  }

  deleteRule(name: string): Promise<void> {
    return this.request("DELETE", `/rules/${encodeURIComponent(name)}`);
  }

  events(after: number): Promise<{ cursor: number; events: TraceEvent[] }> {
    return this.request("GET", `/events?after=${after}`);
  }

  injectStimulus(stimulus: Stimulus): Promise<{ queued: boolean }> {
    return this.request("POST", "/stimuli", stimulus);
  }

  metricsReport(): Promise<MetricsReport> {
    return this.request("GET", "/metrics/report");
  }
}

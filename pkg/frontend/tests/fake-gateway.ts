// In-memory stand-in for the gateway, speaking the same HTTP/JSON contract.
// Tests drive the console against this instead of a live server.

import type { DeviceView, RuleRow, TraceEvent } from "../src/api";

export const DEFAULT_RULE_TEXTS = [
  'rule "Motion On" when MotionDetector.On is true then set Webcam.On = true, set Siren.On = true',
  'rule "Smoke On" when Window.On is true then set Siren.On = true',
  'rule "Motion Off" when MotionDetector.On is false then set Webcam.On = false, set Siren.On = false',
  'rule "Smoke Off" when Window.On is false then set Siren.On = false',
  'rule "Sprinkler On" when FireMonitor.FireDetected is true then set FireSprinkler.Status = true, set Siren.On = true',
  'rule "Sprinkler Off" when FireMonitor.FireDetected is false then set FireSprinkler.Status = false, set Siren.On = false',
  'rule "Smoke On car" when SmokeDetector.Level >= 0.18 then set Blower.Status = High, set Window.On = true',
  'rule "Smoke car off" when SmokeDetector.Level < 0.1 then set Blower.Status = Off, set Window.On = false',
  'rule "RFID Valid" when RFIDReader.CardID = 1001 then set RFIDReader.Status = Valid',
  'rule "RFID invalid" when RFIDReader.CardID != 1001 then set RFIDReader.Status = Invalid',
  'rule "Door Unlock" when RFIDReader.Status = Valid then set Door.Lock = Unlock',
  'rule "Door Lock" when RFIDReader.Status = Invalid then set Door.Lock = Lock',
];

const RULE_NAME = /^rule "((?:[^"\\]|\\.)*)"( disabled)? when (.*?) then (.*)$/;

function rowFromText(text: string): RuleRow {
  const match = RULE_NAME.exec(text);
  if (!match) throw new Error(`fake gateway cannot parse: ${text}`);
  return {
    name: match[1].replace(/\\"/g, '"'),
    enabled: !match[2],
    condition: match[3],
    actions: match[4],
    text,
  };
}

function device(
  id: string,
  kind: string,
  serial: string,
  properties: DeviceView["properties"],
  state: Record<string, unknown>,
): DeviceView {
  return {
    id,
    kind,
    display_name: `${id} (${serial}-)`,
    serial,
    segment: "office",
    address: `192.168.25.${100 + FAKE_DEVICE_COUNTER++}`,
    properties,
    state,
  };
}

let FAKE_DEVICE_COUNTER = 0;

const bool = (name: string, writable = true) => ({
  name,
  kind: "boolean" as const,
  writable_by: writable ? ("command" as const) : ("sensor" as const),
});

export class FakeGateway {
  token = "fake-token-1";
  role: "admin" | "viewer" = "admin";
  devices: DeviceView[];
  rules: RuleRow[] = DEFAULT_RULE_TEXTS.map(rowFromText);
  events: TraceEvent[] = [];
  simTime = 0;
  requests: Array<{ method: string; path: string; body: unknown }> = [];

  constructor() {
    FAKE_DEVICE_COUNTER = 0;
    this.devices = [
      device("Light", "Light", "PTT08102ZTN", [bool("On")], { On: false }),
      device("Siren", "Siren", "PTT08107G8Q", [bool("On")], { On: false }),
      device(
        "Fan",
        "Ceiling Fan",
        "PTT0810921C",
        [{ name: "Status", kind: "enum", writable_by: "command", values: ["Off", "Low", "High"] }],
        { Status: "Off" },
      ),
      device("FireSprinkler", "Fire Sprinkler", "PTT0810FS03", [bool("Status")], { Status: false }),
      device("FireMonitor", "Fire Monitor", "PTT0810FM02", [bool("FireDetected", false)], { FireDetected: false }),
      device(
        "SmokeDetector",
        "Smoke Detector",
        "PTT08109WB5",
        [{ name: "Level", kind: "number", writable_by: "sensor", minimum: 0, maximum: 1 }],
        { Level: 0.0 },
      ),
      device(
        "Door",
        "Door",
        "PTT0810S959",
        [{ name: "Lock", kind: "enum", writable_by: "command", values: ["Lock", "Unlock"] }],
        { Lock: "Lock" },
      ),
    ];
  }

  private change(deviceId: string, property: string, value: unknown, cause: string): TraceEvent {
    const target = this.devices.find((d) => d.id === deviceId)!;
    const event: TraceEvent = {
      type: "change",
      t: this.simTime,
      device: deviceId,
      property,
      old: target.state[property],
      new: value,
      cause,
    };
    target.state[property] = value;
    this.events.push(event);
    return event;
  }

  fetch = async (url: string, init?: RequestInit): Promise<Response> => {
    const method = init?.method ?? "GET";
    const parsed = new URL(url);
    const path = decodeURIComponent(parsed.pathname);
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    this.requests.push({ method, path, body });

    const json = (status: number, payload: unknown) =>
      new Response(JSON.stringify(payload), {
        status,
        headers: { "Content-Type": "application/json" },
      });
    const failure = (status: number, code: string, message: string) =>
      json(status, { code, message, detail: null });

    if (method === "POST" && path === "/login") {
      if (body?.username === "admin" && body?.password === "admin") {
        return json(200, {
          token: this.token,
          role: this.role,
          must_change_password: true,
          expires_in_s: 1800,
        });
      }
      return failure(401, "auth_failed", "invalid credentials or session");
    }

    const header = (init?.headers as Record<string, string>)?.["Authorization"];
    if (header !== `Bearer ${this.token}`) {
      return failure(401, "auth_failed", "invalid credentials or session");
    }

    if (method === "GET" && path === "/devices") {
      return json(200, { devices: this.devices });
    }
    const propertyMatch = path.match(/^\/devices\/([^/]+)\/properties\/([^/]+)$/);
    if (method === "PUT" && propertyMatch) {
      if (this.role !== "admin") return failure(403, "forbidden", "administrator role required");
      const [, deviceId, property] = propertyMatch;
      const target = this.devices.find((d) => d.id === deviceId);
      if (!target) return failure(404, "not_found", `no device ${deviceId}`);
      const schema = target.properties.find((p) => p.name === property);
      if (!schema) return failure(404, "not_found", `no property ${property}`);
      if (schema.writable_by !== "command") {
        return failure(403, "sensor_readonly", `${deviceId}.${property} is sensor-only`);
      }
      if (target.state[property] === body.value) return json(200, { change: null });
      this.simTime += 1;
      return json(200, { change: this.change(deviceId, property, body.value, "command:admin") });
    }
    if (method === "GET" && path === "/rules") {
      return json(200, { rules: this.rules });
    }
    if (method === "POST" && path === "/rules") {
      const row = rowFromText(body.text);
      if (this.rules.some((r) => r.name === row.name)) {
        return failure(409, "conflict", `rule ${row.name} already exists`);
      }
      this.rules.push(row);
      return json(201, { rule: row.text });
    }
    const ruleMatch = path.match(/^\/rules\/(.+)$/);
    if (method === "PUT" && ruleMatch) {
      const index = this.rules.findIndex((r) => r.name === ruleMatch[1]);
      if (index < 0) return failure(404, "not_found", `no rule ${ruleMatch[1]}`);
      if (body.text !== undefined) this.rules[index] = rowFromText(body.text);
      if (body.enabled !== undefined) {
        const row = this.rules[index];
        this.rules[index] = {
          ...row,
          enabled: body.enabled,
          text: body.enabled
            ? row.text.replace('" disabled when', '" when')
            : row.text.replace('" when', '" disabled when'),
        };
      }
      return json(200, { rule: this.rules[index].text });
    }
    if (method === "DELETE" && ruleMatch) {
      const before = this.rules.length;
      this.rules = this.rules.filter((r) => r.name !== ruleMatch[1]);
      if (this.rules.length === before) {
        return failure(404, "not_found", `no rule ${ruleMatch[1]}`);
      }
      return new Response(null, { status: 204 });
    }
    if (method === "GET" && path === "/events") {
      const after = Number(parsed.searchParams.get("after") ?? "0");
      return json(200, { cursor: this.events.length, events: this.events.slice(after) });
    }
    if (method === "POST" && path === "/stimuli") {
      if (this.role !== "admin") return failure(403, "forbidden", "administrator role required");
      this.simTime += 1;
      if (body.kind === "fire_start") {
        this.change("FireMonitor", "FireDetected", true, "environment");
        this.change("FireSprinkler", "Status", true, "rule:Sprinkler On");
        this.change("Siren", "On", true, "rule:Sprinkler On");
      } else if (body.kind === "fire_end") {
        this.change("FireMonitor", "FireDetected", false, "environment");
        this.change("FireSprinkler", "Status", false, "rule:Sprinkler Off");
        this.change("Siren", "On", false, "rule:Sprinkler Off");
      } else if (body.kind === "card_scan") {
        const lock = body.card_id === 1001 ? "Unlock" : "Lock";
        this.change("Door", "Lock", lock, "rule:Door Unlock");
      }
      return json(202, { queued: true });
    }
    if (method === "GET" && path === "/metrics/report") {
      return json(200, {
        report: {
          rows: [
            { target: "7.3", indicator: "energy_consumed_wh", baseline: 16200.0, automated: 490.0, relative_change: -0.9698 },
            { target: "12.5", indicator: "waste_hours", baseline: 12.0, automated: 0.0, relative_change: -1.0 },
            { target: "9.4", indicator: "automation_and_metering_active", baseline: false, automated: true, relative_change: null },
          ],
        },
        automated: { total_energy_wh: 490.0 },
        baseline: { total_energy_wh: 16200.0 },
      });
    }
    return failure(404, "not_found", `no route for ${method} ${path}`);
  };
}

import { describe, expect, it } from "vitest";

import { ApiError, GatewayClient } from "../src/api";
import { FakeGateway } from "./fake-gateway";

function makeClient() {
  const fake = new FakeGateway();
  const client = new GatewayClient("http://gw.test", fake.fetch);
  return { fake, client };
}

describe("gateway client", () => {
  it("logs in and carries the bearer token afterwards", async () => {
    const { fake, client } = makeClient();
    const result = await client.login("admin", "admin");
    expect(result.role).toBe("admin");
    expect(client.authenticated).toBe(true);
    await client.devices();
    const last = fake.requests.at(-1)!;
    expect(last.path).toBe("/devices");
  });

  it("rejects bad credentials with a uniform error", async () => {
    const { client } = makeClient();
    const wrongPassword = await client.login("admin", "nope").catch((e) => e);
    const unknownUser = await client.login("ghost", "nope").catch((e) => e);
    expect(wrongPassword).toBeInstanceOf(ApiError);
    expect(wrongPassword.status).toBe(401);
    expect(wrongPassword.message).toBe(unknownUser.message);
    expect(wrongPassword.code).toBe(unknownUser.code);
  });

  it("signals auth loss when a session dies mid-flight", async () => {
    const { fake, client } = makeClient();
    await client.login("admin", "admin");
    let lost = false;
    client.onAuthLost = () => {
      lost = true;
    };
    fake.token = "rotated-away";
    await expect(client.devices()).rejects.toBeInstanceOf(ApiError);
    expect(lost).toBe(true);
    expect(client.authenticated).toBe(false);
  });

  it("puts a property and returns the acknowledged change", async () => {
    const { client } = makeClient();
    await client.login("admin", "admin");
    const { change } = await client.putProperty("Light", "On", true);
    expect(change).not.toBeNull();
    expect(change!.new).toBe(true);
    expect(change!.cause).toBe("command:admin");
    const again = await client.putProperty("Light", "On", true);
    expect(again.change).toBeNull();
  });

  it("surfaces structured error bodies", async () => {
    const { client } = makeClient();
    await client.login("admin", "admin");
    const err = await client
      .putProperty("SmokeDetector", "Level", 0.5)
      .catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(403);
    expect(err.code).toBe("sensor_readonly");
  });

  it("pages events with a cursor", async () => {
    const { fake, client } = makeClient();
    await client.login("admin", "admin");
    const first = await client.events(0);
    expect(first.events).toHaveLength(0);
    await client.injectStimulus({ kind: "fire_start" });
    const second = await client.events(first.cursor);
    expect(second.events.length).toBeGreaterThan(0);
    const third = await client.events(second.cursor);
    expect(third.events).toHaveLength(0);
    expect(fake.requests.filter((r) => r.path === "/events")).toHaveLength(3);
  });
});

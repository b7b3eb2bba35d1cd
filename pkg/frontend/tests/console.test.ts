// End-to-end console behavior against the in-memory gateway.

import { beforeEach, describe, expect, it } from "vitest";

import { GatewayClient } from "../src/api";
import { Controller } from "../src/controller";
import { Store } from "../src/store";
import { ConsoleUI } from "../src/ui";
import { FakeGateway } from "./fake-gateway";

const POLL_MS = 5;

interface Harness {
  fake: FakeGateway;
  client: GatewayClient;
  store: Store;
  controller: Controller;
  root: HTMLElement;
}

let harness: Harness;

beforeEach(() => {
  document.body.innerHTML = '<div id="app"></div>';
  const fake = new FakeGateway();
  const client = new GatewayClient("http://gw.test", fake.fetch);
  const store = new Store();
  const controller = new Controller(client, store, POLL_MS);
  const root = document.getElementById("app")!;
  new ConsoleUI(root, store, controller);
  harness = { fake, client, store, controller, root };
});

function query<T extends Element>(selector: string): T {
  const node = harness.root.querySelector(selector);
  if (!node) throw new Error(`no element matching ${selector}`);
  return node as T;
}

async function waitUntil(check: () => boolean, timeoutMs = 2000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (!check()) {
    if (Date.now() > deadline) throw new Error("condition never became true");
    await new Promise((resolve) => setTimeout(resolve, 2));
  }
}

async function loginAsAdmin(): Promise<void> {
  query<HTMLInputElement>("#login-username").value = "admin";
  query<HTMLInputElement>("#login-password").value = "admin";
  query<HTMLFormElement>("form.login-card").dispatchEvent(
    new Event("submit", { bubbles: true, cancelable: true }),
  );
  await waitUntil(() => harness.root.querySelector("#devices-panel") !== null);
  harness.controller.stopPolling();
}

describe("login flow", () => {
  it("reaches the device panel with the device list", async () => {
    await loginAsAdmin();
    const panel = query<HTMLElement>("#devices-panel");
    expect(panel.querySelectorAll("details.device-row").length).toBe(
      harness.fake.devices.length,
    );
    expect(panel.textContent).toContain("Fan (PTT0810921C-)");
    expect(panel.textContent).toContain("Ceiling Fan");
  });

  it("shows a uniform inline error on a wrong password", async () => {
    query<HTMLInputElement>("#login-username").value = "admin";
    query<HTMLInputElement>("#login-password").value = "wrong";
    query<HTMLFormElement>("form.login-card").dispatchEvent(
      new Event("submit", { bubbles: true, cancelable: true }),
    );
    await waitUntil(() => query("#login-error").textContent !== "");
    expect(query("#login-error").textContent).toBe("login failed");
    expect(harness.root.querySelector("#devices-panel")).toBeNull();
  });

  it("returns to the login screen when the session expires mid-flight", async () => {
    await loginAsAdmin();
    harness.fake.token = "rotated-away";
    await harness.controller.refreshDevices().catch(() => undefined);
    await waitUntil(() => harness.root.querySelector("#login-error") !== null);
    expect(query("#login-error").textContent).toContain("session expired");
  });

  it("keeps the token out of durable storage", async () => {
    await loginAsAdmin();
    expect(window.localStorage.length).toBe(0);
    expect(document.cookie).toBe("");
  });
});

describe("device panel", () => {
  it("reflects the acknowledged state of a toggle, not the click", async () => {
    await loginAsAdmin();
    const box = query<HTMLInputElement>("#control-Light-On");
    expect(box.checked).toBe(false);
    box.checked = true;
    box.dispatchEvent(new Event("change", { bubbles: true }));
    await waitUntil(
      () => harness.store.state.devices.get("Light")?.state.On === true,
    );
    expect(query<HTMLInputElement>("#control-Light-On").checked).toBe(true);
    const put = harness.fake.requests.find((r) => r.method === "PUT");
    expect(put?.path).toBe("/devices/Light/properties/On");
  });

  it("renders sensor values as read-only gauges", async () => {
    await loginAsAdmin();
    const gauge = query<HTMLElement>("#control-SmokeDetector-Level");
    expect(gauge.textContent).toContain("Level: 0");
    expect(gauge.querySelector("input")).toBeNull();
  });

  it("disables controls for viewers", async () => {
    harness.fake.role = "viewer";
    await loginAsAdmin();
    expect(query<HTMLInputElement>("#control-Light-On").disabled).toBe(true);
    expect(query<HTMLButtonElement>("#stimulus-fire-start").disabled).toBe(true);
    const edit = query<HTMLButtonElement>("#conditions-table .rule-row button.edit");
    expect(edit.disabled).toBe(true);
  });
});

describe("conditions table", () => {
  it("renders all twelve default rows with Edit and Remove", async () => {
    await loginAsAdmin();
    const rows = harness.root.querySelectorAll("#conditions-table tr.rule-row");
    expect(rows.length).toBe(12);
    for (const row of rows) {
      expect(row.querySelector("button.edit")?.textContent).toBe("Edit");
      expect(row.querySelector("button.remove")?.textContent).toBe("Remove");
      expect(row.querySelector("td.enabled")?.textContent).toContain("Yes");
    }
    const names = [...rows].map((r) => r.querySelector("td.name")?.textContent);
    expect(names).toContain("Smoke On car");
    expect(names).toContain("Door Unlock");
  });

  it("edits a threshold through the grammar and re-renders from the server", async () => {
    await loginAsAdmin();
    const row = [...harness.root.querySelectorAll("#conditions-table tr.rule-row")].find(
      (r) => r.querySelector("td.name")?.textContent === "Smoke On car",
    )!;
    (row.querySelector("button.edit") as HTMLButtonElement).click();
    const input = query<HTMLInputElement>("#rule-editor-input");
    const newText = input.value.replace("0.18", "0.25");
    input.value = newText;
    input.dispatchEvent(new Event("input", { bubbles: true }));
    expect(query<HTMLButtonElement>("#rule-editor-save").disabled).toBe(false);
    expect(query("#rule-editor-preview").textContent).toBe(newText);
    query<HTMLButtonElement>("#rule-editor-save").click();
    await waitUntil(() =>
      (harness.root.querySelector("#conditions-table")?.textContent ?? "").includes("0.25"),
    );
    const put = harness.fake.requests.find(
      (r) => r.method === "PUT" && r.path === "/rules/Smoke On car",
    );
    expect(put?.body).toEqual({ text: newText });
    expect(harness.fake.rules.find((r) => r.name === "Smoke On car")?.condition).toBe(
      "SmokeDetector.Level >= 0.25",
    );
  });

  it("rejects invalid condition text inline without a request", async () => {
    await loginAsAdmin();
    const before = harness.fake.requests.length;
    const row = harness.root.querySelector("#conditions-table tr.rule-row")!;
    (row.querySelector("button.edit") as HTMLButtonElement).click();
    const input = query<HTMLInputElement>("#rule-editor-input");
    input.value = 'rule "x" when X.Y ~~ 3 then set X.Y = 1';
    input.dispatchEvent(new Event("input", { bubbles: true }));
    const preview = query("#rule-editor-preview");
    expect(preview.classList.contains("error")).toBe(true);
    expect(preview.textContent).toContain("column 19");
    expect(query<HTMLButtonElement>("#rule-editor-save").disabled).toBe(true);
    expect(harness.fake.requests.length).toBe(before);
  });

  it("removes a rule and drops the row", async () => {
    await loginAsAdmin();
    const row = [...harness.root.querySelectorAll("#conditions-table tr.rule-row")].find(
      (r) => r.querySelector("td.name")?.textContent === "Door Lock",
    )!;
    (row.querySelector("button.remove") as HTMLButtonElement).click();
    await waitUntil(
      () => harness.root.querySelectorAll("#conditions-table tr.rule-row").length === 11,
    );
    expect(
      [...harness.root.querySelectorAll("#conditions-table td.name")].map(
        (n) => n.textContent,
      ),
    ).not.toContain("Door Lock");
  });
});

describe("stimulus bar and event feed", () => {
  it("fire start shows sprinkler and siren on within one poll interval", async () => {
    await loginAsAdmin();
    harness.controller.startPolling();
    query<HTMLButtonElement>("#stimulus-fire-start").click();
    await waitUntil(() => {
      const sprinkler = harness.store.state.devices.get("FireSprinkler");
      const siren = harness.store.state.devices.get("Siren");
      return sprinkler?.state.Status === true && siren?.state.On === true;
    });
    harness.controller.stopPolling();
    expect(query("#state-FireSprinkler").textContent).toContain("Status=true");
    expect(query("#state-Siren").textContent).toContain("On=true");
    const feed = query("#feed-list").textContent ?? "";
    expect(feed).toContain("FireSprinkler.Status");
    expect(feed).toContain("rule:Sprinkler On");
  });

  it("a valid badge scan unlocks the door; a foreign card does not", async () => {
    await loginAsAdmin();
    harness.controller.startPolling();
    query<HTMLButtonElement>("#stimulus-card").click();
    await waitUntil(
      () => harness.store.state.devices.get("Door")?.state.Lock === "Unlock",
    );
    const cardInput = query<HTMLInputElement>("#stimulus-card-id");
    cardInput.value = "999";
    query<HTMLButtonElement>("#stimulus-card").click();
    await waitUntil(
      () => harness.store.state.devices.get("Door")?.state.Lock === "Lock",
    );
    harness.controller.stopPolling();
    expect(query("#state-Door").textContent).toContain("Lock=Lock");
  });
});

describe("metrics view", () => {
  it("renders target rows after refresh", async () => {
    await loginAsAdmin();
    query<HTMLButtonElement>("#metrics-refresh").click();
    await waitUntil(() => harness.root.querySelector("#report-table") !== null);
    const table = query("#report-table");
    expect(table.textContent).toContain("7.3");
    expect(table.textContent).toContain("waste_hours");
    expect(table.textContent).toContain("-97.0%");
  });
});

describe("logout", () => {
  it("clears the session and returns to login", async () => {
    await loginAsAdmin();
    query<HTMLButtonElement>("#logout").click();
    await waitUntil(() => harness.root.querySelector("form.login-card") !== null);
    expect(harness.client.authenticated).toBe(false);
  });
});

// DOM construction for the console.  One static skeleton per screen;
// sections re-render independently when their slice of the store changes,
// so the rule editor and stimulus inputs survive the 1 s event poll.

import type { DeviceView, PropertySchema, ReportRow, TraceEvent } from "./api";
import type { Controller } from "./controller";
import { parseRule, serializeRule, RuleSyntaxError } from "./rules";
import type { Store } from "./store";

type Child = string | Node;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | boolean | ((event: Event) => void)> = {},
  ...children: Child[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (typeof value === "function") {
      node.addEventListener(key.replace(/^on/, ""), value);
    } else if (typeof value === "boolean") {
      if (value) node.setAttribute(key, "");
      (node as unknown as Record<string, unknown>)[key] = value;
    } else {
      node.setAttribute(key, value);
    }
  }
  node.append(...children);
  return node;
}

export class ConsoleUI {
  private screen: "none" | "login" | "main" = "none";
  private sections: Partial<Record<"devices" | "rules" | "feed" | "metrics", HTMLElement>> = {};
  private editingRule: string | null = null;
  private draftText = "";
  private openDevices = new Set<string>();
  private pendingWrites = new Set<string>();
  private lastRulesJson = "";

  constructor(
    private root: HTMLElement,
    private store: Store,
    private controller: Controller,
  ) {
    store.subscribe(() => this.render());
    this.render();
  }

  render(): void {
    const want = this.store.state.screen;
    if (want !== this.screen) {
      this.screen = want;
      this.root.replaceChildren(want === "login" ? this.buildLogin() : this.buildMain());
      this.lastRulesJson = "";
    }
    if (want === "login") {
      const error = this.root.querySelector("#login-error");
      if (error) error.textContent = this.store.state.loginError ?? "";
    } else {
      this.updateDevices();
      this.updateRules();
      this.updateFeed();
      this.updateMetrics();
    }
  }

  // -- login ----------------------------------------------------------------

  private buildLogin(): HTMLElement {
    const address = el("input", {
      id: "login-address",
      value: this.controller.client.baseUrl,
    }) as HTMLInputElement;
    address.value = this.controller.client.baseUrl;
    const username = el("input", { id: "login-username", autocomplete: "username" }) as HTMLInputElement;
    const password = el("input", {
      id: "login-password",
      type: "password",
      autocomplete: "current-password",
    }) as HTMLInputElement;
    const error = el("p", { class: "error", id: "login-error" });
    error.textContent = this.store.state.loginError ?? "";
    const submit = async (event: Event) => {
      event.preventDefault();
      await this.controller.login(address.value, username.value, password.value);
    };
    return el(
      "form",
      { class: "login-card", onsubmit: submit },
      el("h1", {}, "IoT Monitor"),
      el("label", {}, "IoT Server Address: ", address),
      el("label", {}, "User Name: ", username),
      el("label", {}, "Password: ", password),
      el("button", { type: "submit", id: "login-submit" }, "Login"),
      error,
    );
  }

  // -- main skeleton ----------------------------------------------------------

  private buildMain(): HTMLElement {
    this.sections = {
      devices: el("section", { id: "devices-panel" }),
      rules: el("section", { id: "conditions-panel" }),
      feed: el("section", { id: "event-feed" }),
      metrics: el("section", { id: "metrics-panel" }),
    };
    const role = this.store.state.role ?? "viewer";
    const notice = this.store.state.mustChangePassword
      ? el("p", { class: "notice" }, "Bootstrap password in use; please change it.")
      : "";
    return el(
      "div",
      { class: "console" },
      el(
        "header",
        {},
        el("h1", {}, "IoT Server"),
        el("span", { class: "role" }, `role: ${role}`),
        el("button", { id: "logout", onclick: () => this.controller.logout() }, "Log Out"),
      ),
      notice,
      this.buildStimulusBar(),
      el("h2", {}, "Devices"),
      this.sections.devices!,
      el("h2", {}, "Device Conditions"),
      this.sections.rules!,
      el("h2", {}, "Sustainability"),
      this.sections.metrics!,
      el("h2", {}, "Events"),
      this.sections.feed!,
    );
  }

  // -- stimulus bar -----------------------------------------------------------

  private buildStimulusBar(): HTMLElement {
    const admin = this.store.state.role === "admin";
    const cardId = el("input", {
      id: "stimulus-card-id",
      type: "number",
      value: "1001",
    }) as HTMLInputElement;
    cardId.value = "1001";
    const windLabel = el("span", { id: "wind-value" }, "0 m/s");
    const wind = el("input", {
      id: "stimulus-wind",
      type: "range",
      min: "0",
      max: "20",
      step: "0.5",
      value: "0",
    }) as HTMLInputElement;
    wind.addEventListener("change", () => {
      windLabel.textContent = `${wind.value} m/s`;
      void this.controller.stimulus({ kind: "wind_set", speed: Number(wind.value) });
    });
    const bar = el(
      "div",
      { class: "stimulus-bar", id: "stimulus-bar" },
      el("button", { id: "stimulus-motion", onclick: () => void this.controller.stimulus({ kind: "motion_pulse" }) }, "Motion"),
      el("button", {
        id: "stimulus-card",
        onclick: () => void this.controller.stimulus({ kind: "card_scan", card_id: Number(cardId.value) }),
      }, "Scan Card"),
      cardId,
      el("button", { id: "stimulus-fire-start", onclick: () => void this.controller.stimulus({ kind: "fire_start" }) }, "Fire Start"),
      el("button", { id: "stimulus-fire-end", onclick: () => void this.controller.stimulus({ kind: "fire_end" }) }, "Fire End"),
      el("label", {}, "Wind ", wind, windLabel),
    );
    if (!admin) {
      bar.querySelectorAll("button,input").forEach((node) => {
        (node as HTMLButtonElement).disabled = true;
      });
    }
    return bar;
  }

  // -- devices ------------------------------------------------------------------

  private updateDevices(): void {
    const section = this.sections.devices;
    if (!section) return;
    const rows = this.store.state.deviceOrder.map((id) => {
      const device = this.store.state.devices.get(id)!;
      return this.deviceRow(device);
    });
    section.replaceChildren(...rows);
  }

  private deviceRow(device: DeviceView): HTMLElement {
    const details = el("details", { class: "device-row", id: `device-${device.id}` });
    if (this.openDevices.has(device.id)) details.open = true;
    details.addEventListener("toggle", () => {
      if (details.open) this.openDevices.add(device.id);
      else this.openDevices.delete(device.id);
    });
    const stateBadge = Object.entries(device.state)
      .map(([prop, value]) => `${prop}=${value}`)
      .join(" ");
    details.append(
      el(
        "summary",
        {},
        el("strong", {}, device.display_name),
        el("span", { class: "kind" }, ` ${device.kind}`),
        el("span", { class: "state-badge", id: `state-${device.id}` }, ` ${stateBadge}`),
        el("span", { class: "address" }, device.address ? ` ${device.address}` : ""),
      ),
      ...device.properties.map((schema) => this.propertyControl(device, schema)),
    );
    return details;
  }

  private propertyControl(device: DeviceView, schema: PropertySchema): HTMLElement {
    const value = device.state[schema.name];
    const writable = schema.writable_by === "command" && this.store.state.role === "admin";
    const key = `${device.id}.${schema.name}`;
    const pending = this.pendingWrites.has(key);
    if (schema.kind === "boolean" && schema.writable_by === "command") {
      const box = el("input", {
        type: "checkbox",
        id: `control-${device.id}-${schema.name}`,
      }) as HTMLInputElement;
      box.checked = value === true;
      box.disabled = !writable || pending;
      box.addEventListener("change", () => {
        box.disabled = true;
        void this.write(device.id, schema.name, box.checked);
      });
      return el("label", { class: "prop" }, `${schema.name} `, box);
    }
    if (schema.kind === "enum") {
      const select = el("select", {
        id: `control-${device.id}-${schema.name}`,
      }) as HTMLSelectElement;
      for (const option of schema.values ?? []) {
        select.append(el("option", { value: option }, option));
      }
      select.value = String(value);
      select.disabled = !writable || pending;
      select.addEventListener("change", () => {
        select.disabled = true;
        void this.write(device.id, schema.name, select.value);
      });
      return el("label", { class: "prop" }, `${schema.name} `, select);
    }
    const unit = schema.unit ? ` ${schema.unit}` : "";
    return el(
      "div",
      { class: "prop gauge", id: `control-${device.id}-${schema.name}` },
      `${schema.name}: ${value}${unit}`,
    );
  }

  private async write(device: string, prop: string, value: unknown): Promise<void> {
    const key = `${device}.${prop}`;
    this.pendingWrites.add(key);
    try {
      await this.controller.setProperty(device, prop, value);
    } finally {
      this.pendingWrites.delete(key);
      this.updateDevices();
    }
  }

  // -- conditions table -----------------------------------------------------------

  private updateRules(): void {
    const section = this.sections.rules;
    if (!section) return;
    const snapshot = JSON.stringify(this.store.state.rules) + `|${this.editingRule}`;
    if (snapshot === this.lastRulesJson) return;
    this.lastRulesJson = snapshot;

    const header = el(
      "tr",
      {},
      el("th", {}, "Actions"),
      el("th", {}, "Enabled"),
      el("th", {}, "Name"),
      el("th", {}, "Condition"),
      el("th", {}, "Actions"),
    );
    const body = this.store.state.rules.map((rule) =>
      this.editingRule === rule.name ? this.ruleEditorRow(rule.name, rule.text) : this.ruleRow(rule),
    );
    const table = el("table", { class: "conditions", id: "conditions-table" }, header, ...body);
    section.replaceChildren(table, this.addRuleForm());
  }

  private ruleRow(rule: { name: string; enabled: boolean; condition: string; actions: string }): HTMLElement {
    const admin = this.store.state.role === "admin";
    const edit = el("button", {
      class: "edit",
      onclick: () => {
        this.editingRule = rule.name;
        this.draftText = "";
        this.updateRules();
      },
    }, "Edit") as HTMLButtonElement;
    const remove = el("button", {
      class: "remove",
      onclick: () => void this.controller.removeRule(rule.name),
    }, "Remove") as HTMLButtonElement;
    edit.disabled = remove.disabled = !admin;
    const enabled = el("input", { type: "checkbox" }) as HTMLInputElement;
    enabled.checked = rule.enabled;
    enabled.disabled = !admin;
    enabled.addEventListener("change", () =>
      void this.controller.toggleRule(rule.name, enabled.checked),
    );
    return el(
      "tr",
      { class: "rule-row", "data-rule": rule.name },
      el("td", {}, edit, " ", remove),
      el("td", { class: "enabled" }, enabled, rule.enabled ? " Yes" : " No"),
      el("td", { class: "name" }, rule.name),
      el("td", { class: "condition" }, rule.condition),
      el("td", { class: "actions" }, rule.actions),
    );
  }

  private ruleEditorRow(name: string, currentText: string): HTMLElement {
    const input = el("input", {
      class: "rule-editor",
      id: "rule-editor-input",
    }) as HTMLInputElement;
    input.value = this.draftText || currentText;
    const preview = el("span", { class: "preview", id: "rule-editor-preview" });
    const save = el("button", { id: "rule-editor-save" }, "Save") as HTMLButtonElement;
    const cancel = el("button", { id: "rule-editor-cancel" }, "Cancel");
    const check = () => {
      this.draftText = input.value;
      try {
        const parsed = parseRule(input.value);
        preview.textContent = serializeRule(parsed);
        preview.classList.remove("error");
        save.disabled = false;
      } catch (err) {
        preview.textContent = err instanceof RuleSyntaxError ? err.message : String(err);
        preview.classList.add("error");
        save.disabled = true;
      }
    };
    input.addEventListener("input", check);
    check();
    save.addEventListener("click", async () => {
      // Client-side grammar check already passed; the server copy wins on save.
      await this.controller.saveRule(name, input.value);
      this.editingRule = null;
      this.draftText = "";
    });
    cancel.addEventListener("click", () => {
      this.editingRule = null;
      this.draftText = "";
      this.updateRules();
    });
    return el(
      "tr",
      { class: "rule-row editing", "data-rule": name },
      el("td", {}, save, " ", cancel),
      el("td", { colspan: "4" }, input, preview),
    );
  }

  private addRuleForm(): HTMLElement {
    const admin = this.store.state.role === "admin";
    const input = el("input", {
      class: "rule-editor",
      id: "rule-add-input",
      placeholder: 'rule "name" when Device.Prop is true then set Device.Prop = value',
    }) as HTMLInputElement;
    const preview = el("span", { class: "preview", id: "rule-add-preview" });
    const add = el("button", { id: "rule-add-submit" }, "Add Rule") as HTMLButtonElement;
    add.disabled = true;
    input.addEventListener("input", () => {
      if (!input.value.trim()) {
        preview.textContent = "";
        add.disabled = true;
        return;
      }
      try {
        preview.textContent = serializeRule(parseRule(input.value));
        preview.classList.remove("error");
        add.disabled = false;
      } catch (err) {
        preview.textContent = err instanceof RuleSyntaxError ? err.message : String(err);
        preview.classList.add("error");
        add.disabled = true;
      }
    });
    add.addEventListener("click", async () => {
      await this.controller.addRule(input.value);
      input.value = "";
      preview.textContent = "";
      add.disabled = true;
    });
    if (!admin) {
      input.disabled = true;
    }
    return el("div", { class: "add-rule" }, input, add, preview);
  }

  // -- metrics -----------------------------------------------------------------

  private updateMetrics(): void {
    const section = this.sections.metrics;
    if (!section) return;
    const refresh = el("button", {
      id: "metrics-refresh",
      onclick: () => void this.controller.refreshReport(),
    }, "Refresh Report");
    const report = this.store.state.report;
    if (!report) {
      section.replaceChildren(refresh, el("p", {}, "No report yet."));
      return;
    }
    const header = el(
      "tr",
      {},
      el("th", {}, "Target"),
      el("th", {}, "Indicator"),
      el("th", {}, "Baseline"),
      el("th", {}, "Automated"),
      el("th", {}, "Change"),
    );
    const rows = report.report.rows.map((row: ReportRow) =>
      el(
        "tr",
        { class: "report-row", "data-target": row.target },
        el("td", {}, row.target),
        el("td", {}, row.indicator),
        el("td", {}, formatCell(row.baseline)),
        el("td", {}, formatCell(row.automated)),
        el("td", {}, row.relative_change === null ? "n/a" : `${(row.relative_change * 100).toFixed(1)}%`),
      ),
    );
    section.replaceChildren(refresh, el("table", { class: "report", id: "report-table" }, header, ...rows));
  }

  // -- event feed ----------------------------------------------------------------

  private updateFeed(): void {
    const section = this.sections.feed;
    if (!section) return;
    const recent = this.store.state.feed.slice(-30).reverse();
    section.replaceChildren(
      el(
        "ul",
        { class: "feed", id: "feed-list" },
        ...recent.map((event: TraceEvent) =>
          el(
            "li",
            {},
            `t=${event.t} ${event.device}.${event.property} ` +
              `${JSON.stringify(event.old)} -> ${JSON.stringify(event.new)} (${event.cause})`,
          ),
        ),
      ),
    );
  }
}

function formatCell(value: unknown): string {
  if (value === true) return "yes";
  if (value === false) return "no";
  if (typeof value === "number") return value.toFixed(3);
  return String(value);
}

import { describe, expect, it } from "vitest";

import { parseRule, serializeRule, RuleSyntaxError, isNumber } from "../src/rules";
import { DEFAULT_RULE_TEXTS } from "./fake-gateway";

describe("rule grammar", () => {
  it("round-trips every default rule text unchanged", () => {
    for (const text of DEFAULT_RULE_TEXTS) {
      expect(serializeRule(parseRule(text))).toBe(text);
    }
  });

  it("preserves numeric lexemes", () => {
    const text =
      'rule "Wind Close Windows" when WindDetector.Speed >= 8.0 then set Window.On = false';
    const rule = parseRule(text);
    expect(isNumber(rule.condition.operand!)).toBe(true);
    expect(serializeRule(rule)).toBe(text);
    const card = parseRule(
      'rule "RFID Valid" when RFIDReader.CardID = 1001 then set RFIDReader.Status = Valid',
    );
    if (isNumber(card.condition.operand!)) {
      expect(card.condition.operand.value).toBe(1001);
      expect(card.condition.operand.text).toBe("1001");
    }
  });

  it("parses structure", () => {
    const rule = parseRule(DEFAULT_RULE_TEXTS[6]);
    expect(rule.name).toBe("Smoke On car");
    expect(rule.enabled).toBe(true);
    expect(rule.condition.comparator).toBe("gte");
    expect(rule.actions).toHaveLength(2);
    expect(rule.actions[0]).toMatchObject({ device: "Blower", property: "Status", value: "High" });
  });

  it("supports the disabled flag", () => {
    const text = 'rule "Idle" disabled when Window.On is true then set Siren.On = true';
    const rule = parseRule(text);
    expect(rule.enabled).toBe(false);
    expect(serializeRule(rule)).toBe(text);
  });

  it("round-trips escaped quotes in names", () => {
    const text = 'rule "say \\"hi\\"" when Window.On is true then set Siren.On = true';
    expect(serializeRule(parseRule(text))).toBe(text);
  });

  it("rejects a bad comparator with its column", () => {
    expect(() => parseRule('rule "x" when X.Y ~~ 3 then set X.Y = 1')).toThrowError(
      RuleSyntaxError,
    );
    try {
      parseRule('rule "x" when X.Y ~~ 3 then set X.Y = 1');
    } catch (err) {
      expect((err as RuleSyntaxError).column).toBe(19);
    }
  });

  it("rejects trailing junk", () => {
    expect(() =>
      parseRule('rule "x" when X.Y is true then set X.Y = 1 extra'),
    ).toThrowError(RuleSyntaxError);
  });

  it("rejects a missing then", () => {
    expect(() => parseRule('rule "x" when X.Y is true set X.Y = 1')).toThrowError(
      RuleSyntaxError,
    );
  });
});

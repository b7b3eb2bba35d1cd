// Client-side copy of the gateway's rule grammar, used for parse preview
// before any request is sent and for rendering canonical rule text.
//
//   rule "<name>" [disabled] when <Device>.<Prop> <op> [<value>]
//       then set <Device>.<Prop> = <value> {, set ...}
//
//   <op> ::= is true | is false | = | != | >= | <

// Numeric literals keep their source text so serializing a parsed rule
// reproduces the server's rendering exactly ("8.0" must not become "8").
export interface NumberLiteral {
  kind: "num";
  text: string;
  value: number;
}

export type RuleValue = boolean | string | NumberLiteral;

export function numberLiteral(text: string): NumberLiteral {
  return { kind: "num", text, value: Number(text) };
}

export function isNumber(value: RuleValue): value is NumberLiteral {
  return typeof value === "object" && value !== null && value.kind === "num";
}

export type Comparator = "is_true" | "is_false" | "eq" | "neq" | "gte" | "lt";

export interface Condition {
  device: string;
  property: string;
  comparator: Comparator;
  operand: RuleValue | null;
}

export interface RuleAction {
  device: string;
  property: string;
  value: RuleValue;
}

export interface Rule {
  name: string;
  enabled: boolean;
  condition: Condition;
  actions: RuleAction[];
}

export class RuleSyntaxError extends Error {
  constructor(message: string, readonly column: number) {
    super(`column ${column}: ${message}`);
  }
}

interface Token {
  kind: "string" | "number" | "ident" | "symbol";
  text: string;
  column: number;
}

const TOKEN = /\s*(?:("(?:[^"\\]|\\.)*")|(-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)|([A-Za-z_][A-Za-z0-9_]*)|(!=|>=|=|<|\.|,))/y;

function tokenize(line: string): Token[] {
  const tokens: Token[] = [];
  let pos = 0;
  while (pos < line.length) {
    TOKEN.lastIndex = pos;
    const match = TOKEN.exec(line);
    if (!match) {
      const rest = line.slice(pos);
      const trimmed = rest.trimStart();
      if (!trimmed) break;
      throw new RuleSyntaxError(
        `unexpected character ${JSON.stringify(trimmed[0])}`,
        pos + (rest.length - trimmed.length) + 1,
      );
    }
    const text = match[1] ?? match[2] ?? match[3] ?? match[4];
    const kind = match[1] ? "string" : match[2] ? "number" : match[3] ? "ident" : "symbol";
    tokens.push({ kind, text, column: match.index + match[0].length - text.length + 1 });
    pos = TOKEN.lastIndex;
  }
  return tokens;
}

class Parser {
  private index = 0;

  constructor(private tokens: Token[]) {}

  private fail(message: string): never {
    const token = this.tokens[this.index];
    const last = this.tokens[this.tokens.length - 1];
    const column = token ? token.column : last ? last.column + last.text.length : 1;
    throw new RuleSyntaxError(message, column);
  }

  peek(): Token | undefined {
    return this.tokens[this.index];
  }

  take(kind?: Token["kind"], text?: string, what?: string): Token {
    const token = this.tokens[this.index];
    const expected = what ?? text ?? kind ?? "token";
    if (!token) this.fail(`expected ${expected} but the line ended`);
    if (kind && token.kind !== kind) this.fail(`expected ${expected}, found ${JSON.stringify(token.text)}`);
    if (text && token.text !== text) this.fail(`expected ${expected}, found ${JSON.stringify(token.text)}`);
    this.index += 1;
    return token;
  }

  keyword(word: string): Token {
    return this.take("ident", word, `'${word}'`);
  }

  reference(): [string, string] {
    const device = this.take("ident", undefined, "device name").text;
    this.take("symbol", ".", "'.'");
    const property = this.take("ident", undefined, "property name").text;
    return [device, property];
  }

  value(): RuleValue {
    const token = this.peek();
    if (!token) this.fail("expected a value but the line ended");
    this.index += 1;
    if (token.kind === "number") return numberLiteral(token.text);
    if (token.kind === "ident") {
      if (token.text === "true") return true;
      if (token.text === "false") return false;
      return token.text;
    }
    this.index -= 1;
    this.fail(`expected a value, found ${JSON.stringify(token.text)}`);
  }

  done(): void {
    const token = this.peek();
    if (token) this.fail(`unexpected trailing ${JSON.stringify(token.text)}`);
  }
}

export function parseRule(line: string): Rule {
  const parser = new Parser(tokenize(line));
  parser.keyword("rule");
  const nameToken = parser.take("string", undefined, "quoted rule name");
  const name = nameToken.text.slice(1, -1).replace(/\\"/g, '"').replace(/\\\\/g, "\\");
  let enabled = true;
  if (parser.peek()?.kind === "ident" && parser.peek()?.text === "disabled") {
    enabled = false;
    parser.take("ident");
  }
  parser.keyword("when");
  const [device, property] = parser.reference();
  let condition: Condition;
  const op = parser.peek();
  if (op?.kind === "ident" && op.text === "is") {
    parser.take("ident");
    const flag = parser.take("ident", undefined, "'true' or 'false'");
    if (flag.text === "true") condition = { device, property, comparator: "is_true", operand: null };
    else if (flag.text === "false") condition = { device, property, comparator: "is_false", operand: null };
    else throw new RuleSyntaxError(`expected 'true' or 'false' after 'is'`, flag.column);
  } else if (op?.kind === "symbol" && ["=", "!=", ">=", "<"].includes(op.text)) {
    parser.take("symbol");
    const comparator = ({ "=": "eq", "!=": "neq", ">=": "gte", "<": "lt" } as const)[
      op.text as "=" | "!=" | ">=" | "<"
    ];
    condition = { device, property, comparator, operand: parser.value() };
  } else {
    throw new RuleSyntaxError(
      `expected a comparator, found ${JSON.stringify(op?.text ?? "end of line")}`,
      op?.column ?? 1,
    );
  }
  parser.keyword("then");
  const actions: RuleAction[] = [];
  for (;;) {
    parser.keyword("set");
    const [actionDevice, actionProperty] = parser.reference();
    parser.take("symbol", "=", "'='");
    actions.push({ device: actionDevice, property: actionProperty, value: parser.value() });
    if (!parser.peek()) break;
    parser.take("symbol", ",", "','");
  }
  parser.done();
  return { name, enabled, condition, actions };
}

function formatValue(value: RuleValue): string {
  if (value === true) return "true";
  if (value === false) return "false";
  if (isNumber(value)) return value.text;
  return value;
}

export function conditionText(condition: Condition): string {
  const subject = `${condition.device}.${condition.property}`;
  switch (condition.comparator) {
    case "is_true":
      return `${subject} is true`;
    case "is_false":
      return `${subject} is false`;
    case "eq":
      return `${subject} = ${formatValue(condition.operand!)}`;
    case "neq":
      return `${subject} != ${formatValue(condition.operand!)}`;
    case "gte":
      return `${subject} >= ${formatValue(condition.operand!)}`;
    case "lt":
      return `${subject} < ${formatValue(condition.operand!)}`;
  }
}

export function actionsText(actions: RuleAction[]): string {
  return actions
    .map((a) => `set ${a.device}.${a.property} = ${formatValue(a.value)}`)
    .join(", ");
}

export function serializeRule(rule: Rule): string {
  const name = rule.name.replace(/\\/g, "\\\\").replace(/"/g, '\\"');
  const disabled = rule.enabled ? "" : " disabled";
  return `rule "${name}"${disabled} when ${conditionText(rule.condition)} then ${actionsText(rule.actions)}`;
}

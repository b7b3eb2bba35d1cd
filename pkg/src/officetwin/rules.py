"""Condition/action rule engine with deterministic fixed-point evaluation.

A rule pairs one predicate over a device property with one or more property
writes.  Evaluation repeats passes over the rule list until the world stops
changing:

* within a pass, every enabled rule whose condition held at the start of
  the pass fires, in list order;
* actions are applied immediately, so when two fired rules write the same
  property the later rule wins (list order is priority);
* the run converges when a pass leaves the world exactly as it found it,
  and raises OscillationError when the pass limit is hit first.

Evaluating conditions against the pass-start world makes chained rules
(write then test) take one pass per link, and makes a conflicting pair
settle on the later rule's value instead of flapping.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Optional

from .devices import (
    BOOLEAN,
    COMMAND,
    ENUM,
    NUMBER,
    Catalog,
    StateChange,
    World,
    apply_change,
)

IS_TRUE = "is_true"
IS_FALSE = "is_false"
EQ = "eq"
NEQ = "neq"
GTE = "gte"
LT = "lt"

COMPARATORS = (IS_TRUE, IS_FALSE, EQ, NEQ, GTE, LT)

DEFAULT_MAX_PASSES = 16


class RuleError(Exception):
    """Base class for rule-engine failures."""


class DanglingReferenceError(RuleError):
    """A rule refers to a device or property that does not exist."""


class OscillationError(RuleError):
    """The pass limit was reached with the world still changing."""

    def __init__(self, rule_names: tuple[str, ...], passes: int,
                 sim_time: Optional[float] = None):
        self.rule_names = rule_names
        self.passes = passes
        self.sim_time = sim_time
        where = f" at t={sim_time}" if sim_time is not None else ""
        super().__init__(
            f"rules did not stabilize after {passes} passes{where}; "
            f"still firing: {', '.join(rule_names)}"
        )

    def at_time(self, sim_time: float) -> "OscillationError":
        return OscillationError(self.rule_names, self.passes, sim_time)


class RuleSyntaxError(RuleError):
    """Rule text that does not match the grammar; carries line and column."""

    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


@dataclass(frozen=True)
class Condition:
    device_id: str
    property: str
    comparator: str
    operand: Any = None


@dataclass(frozen=True)
class RuleAction:
    device_id: str
    property: str
    value: Any


@dataclass(frozen=True)
class Rule:
    name: str
    condition: Condition
    actions: tuple[RuleAction, ...]
    enabled: bool = True


@dataclass
class RuleSet:
    """Ordered rules; earlier position is evaluated first, later writes win."""

    rules: list[Rule] = field(default_factory=list)

    def __post_init__(self) -> None:
        names = [r.name for r in self.rules]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise RuleError(f"duplicate rule names: {', '.join(dupes)}")

    def __iter__(self):
        return iter(self.rules)

    def __len__(self) -> int:
        return len(self.rules)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, RuleSet) and self.rules == other.rules

    def get(self, name: str) -> Rule:
        for rule in self.rules:
            if rule.name == name:
                return rule
        raise RuleError(f"no rule named {name!r}")


@dataclass(frozen=True)
class Firing:
    pass_number: int
    rule_name: str
    changes: tuple[StateChange, ...]


@dataclass
class EvaluationTrace:
    passes: int
    firings: list[Firing]
    converged: bool
    final_pass_cancelled: bool = False

    def fired_names(self) -> list[str]:
        return [f.rule_name for f in self.firings]

    def committed_changes(self) -> list[StateChange]:
        """Changes that survive into the converged world, in firing order.

        When convergence was detected by a pass whose writes cancelled out,
        that pass's changes are omitted: the world they produced is the one
        the pass started from.
        """
        return [
            change
            for firing in self.firings
            if not (self.final_pass_cancelled and firing.pass_number == self.passes)
            for change in firing.changes
        ]


def _lookup(world: World, device_id: str, prop: str) -> Any:
    try:
        state = world[device_id]
    except KeyError:
        raise DanglingReferenceError(f"no device {device_id!r} in world") from None
    try:
        return state.values[prop]
    except KeyError:
        raise DanglingReferenceError(
            f"device {device_id!r} has no property {prop!r}"
        ) from None


def evaluate_condition(cond: Condition, world: World) -> bool:
    """Pure predicate over the world; raises on dangling references."""
    return _compare(_lookup(world, cond.device_id, cond.property), cond)


def single_pass(rules: RuleSet, world: World, sim_time: float = 0.0,
                pass_number: int = 1) -> tuple[World, list[Firing]]:
    """Run one pass over a copy of ``world``; returns (new world, firings).

    Conditions are decided against the world as it stood when the pass
    began; the actions of every firing rule are then applied in list
    order, so later rules overwrite earlier ones on conflicts.
    """
    result = dict(world)
    cloned: set[str] = set()
    firings: list[Firing] = []
    for rule in rules:
        if not rule.enabled:
            continue
        cond = rule.condition
        start_state = world.get(cond.device_id)
        if start_state is None:
            raise DanglingReferenceError(f"no device {cond.device_id!r} in world")
        if cond.property not in start_state.values:
            raise DanglingReferenceError(
                f"device {cond.device_id!r} has no property {cond.property!r}"
            )
        if not _compare(start_state.values[cond.property], cond):
            continue
        changes = []
        for action in rule.actions:
            target = result.get(action.device_id)
            if target is None:
                raise DanglingReferenceError(
                    f"no device {action.device_id!r} in world"
                )
            if action.device_id not in cloned:
                target = target.clone()
                result[action.device_id] = target
                cloned.add(action.device_id)
            change = apply_change(target, action.property, action.value,
                                  f"rule:{rule.name}", sim_time)
            if change is not None:
                changes.append(change)
        firings.append(Firing(pass_number, rule.name, tuple(changes)))
    return result, firings


def _compare(value: Any, cond: Condition) -> bool:
    comp = cond.comparator
    if comp == IS_TRUE:
        return value is True
    if comp == IS_FALSE:
        return value is False
    if comp == EQ:
        return value == cond.operand
    if comp == NEQ:
        return value != cond.operand
    if comp == GTE:
        return value >= cond.operand
    if comp == LT:
        return value < cond.operand
    raise RuleError(f"unknown comparator {comp!r}")


def run_to_fixed_point(rules: RuleSet, world: World,
                       max_passes: int = DEFAULT_MAX_PASSES,
                       sim_time: float = 0.0) -> tuple[World, EvaluationTrace]:
    """Iterate passes until the world is a fixed point of the pass function.

    Convergence is reached when a pass produces a world identical to the
    one it started from, either because nothing fired a value-altering
    action or because conflicting writes cancelled out at the priority
    winner's value.  Hitting ``max_passes`` first raises OscillationError
    naming the rules that fired in the last pass.
    """
    if max_passes < 1:
        raise ValueError("max_passes must be at least 1")
    current = world
    firings: list[Firing] = []
    for pass_number in range(1, max_passes + 1):
        stepped, pass_firings = single_pass(rules, current, sim_time, pass_number)
        firings.extend(pass_firings)
        pass_changes = [c for f in pass_firings for c in f.changes]
        if not pass_changes:
            return stepped, EvaluationTrace(pass_number, firings, True)
        first_old: dict[tuple[str, str], Any] = {}
        last_new: dict[tuple[str, str], Any] = {}
        for change in pass_changes:
            key = (change.device_id, change.property)
            first_old.setdefault(key, change.old_value)
            last_new[key] = change.new_value
        if all(first_old[key] == last_new[key]
               and type(first_old[key]) is type(last_new[key])
               for key in first_old):
            # The pass's writes cancelled; the world it started from is the
            # fixed point, with untouched change stamps.
            return current, EvaluationTrace(pass_number, firings, True,
                                            final_pass_cancelled=True)
        current = stepped
    last = tuple(f.rule_name for f in pass_firings if f.changes)
    raise OscillationError(last, max_passes)


# ---------------------------------------------------------------------------
# Rule file grammar
#
#   rule "<name>" [disabled] when <Device>.<Prop> <op> [<value>]
#       then set <Device>.<Prop> = <value> {, set <Device>.<Prop> = <value>}
#
# <op> is one of: is true | is false | = | != | >= | <
# Values are true/false, numbers, or bare enumeration identifiers.
# Lines starting with # are comments; blank lines are ignored.
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r'\s*(?:(?P<string>"(?:[^"\\]|\\.)*")'
    r"|(?P<number>-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<symbol>!=|>=|=|<|\.|,))"
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    column: int


def _tokenize(line: str, line_no: int) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(line):
        match = _TOKEN_RE.match(line, pos)
        if match is None:
            stripped = line[pos:].lstrip()
            if not stripped:
                break
            column = pos + (len(line[pos:]) - len(stripped)) + 1
            raise RuleSyntaxError(f"unexpected character {stripped[0]!r}",
                                  line_no, column)
        kind = match.lastgroup or "symbol"
        tokens.append(_Token(kind, match.group(kind), match.start(kind) + 1))
        pos = match.end()
    return tokens


class _LineParser:
    def __init__(self, tokens: list[_Token], line_no: int):
        self.tokens = tokens
        self.line_no = line_no
        self.index = 0

    def _error(self, message: str) -> RuleSyntaxError:
        column = (self.tokens[self.index].column
                  if self.index < len(self.tokens)
                  else (self.tokens[-1].column + len(self.tokens[-1].text)
                        if self.tokens else 1))
        return RuleSyntaxError(message, self.line_no, column)

    def peek(self) -> Optional[_Token]:
        return self.tokens[self.index] if self.index < len(self.tokens) else None

    def take(self, kind: Optional[str] = None, text: Optional[str] = None,
             what: str = "") -> _Token:
        token = self.peek()
        expect = what or text or kind or "token"
        if token is None:
            raise self._error(f"expected {expect} but the line ended")
        if kind is not None and token.kind != kind:
            raise self._error(f"expected {expect}, found {token.text!r}")
        if text is not None and token.text != text:
            raise self._error(f"expected {expect}, found {token.text!r}")
        self.index += 1
        return token

    def keyword(self, word: str) -> _Token:
        return self.take("ident", word, what=f"'{word}'")

    def reference(self) -> tuple[str, str]:
        device = self.take("ident", what="device name").text
        self.take("symbol", ".", what="'.'")
        prop = self.take("ident", what="property name").text
        return device, prop

    def value(self) -> Any:
        token = self.peek()
        if token is None:
            raise self._error("expected a value but the line ended")
        self.index += 1
        if token.kind == "number":
            return float(token.text) if any(c in token.text for c in ".eE") \
                else int(token.text)
        if token.kind == "ident":
            if token.text == "true":
                return True
            if token.text == "false":
                return False
            return token.text
        raise RuleSyntaxError(f"expected a value, found {token.text!r}",
                              self.line_no, token.column)

    def done(self) -> None:
        token = self.peek()
        if token is not None:
            raise RuleSyntaxError(f"unexpected trailing {token.text!r}",
                                  self.line_no, token.column)


def _parse_rule_line(line: str, line_no: int) -> Rule:
    parser = _LineParser(_tokenize(line, line_no), line_no)
    parser.keyword("rule")
    name_token = parser.take("string", what="quoted rule name")
    name = name_token.text[1:-1].replace('\\"', '"').replace("\\\\", "\\")
    enabled = True
    token = parser.peek()
    if token is not None and token.kind == "ident" and token.text == "disabled":
        enabled = False
        parser.index += 1
    parser.keyword("when")
    device, prop = parser.reference()
    token = parser.peek()
    if token is None:
        raise parser._error("expected a comparator")
    if token.kind == "ident" and token.text == "is":
        parser.index += 1
        flag = parser.take("ident", what="'true' or 'false'")
        if flag.text == "true":
            condition = Condition(device, prop, IS_TRUE)
        elif flag.text == "false":
            condition = Condition(device, prop, IS_FALSE)
        else:
            raise RuleSyntaxError(f"expected 'true' or 'false' after 'is', "
                                  f"found {flag.text!r}", line_no, flag.column)
    elif token.kind == "symbol" and token.text in ("=", "!=", ">=", "<"):
        parser.index += 1
        operand = parser.value()
        comparator = {"=": EQ, "!=": NEQ, ">=": GTE, "<": LT}[token.text]
        condition = Condition(device, prop, comparator, operand)
    else:
        raise RuleSyntaxError(f"expected a comparator, found {token.text!r}",
                              line_no, token.column)
    parser.keyword("then")
    actions: list[RuleAction] = []
    while True:
        parser.keyword("set")
        device, prop = parser.reference()
        parser.take("symbol", "=", what="'='")
        actions.append(RuleAction(device, prop, parser.value()))
        token = parser.peek()
        if token is None:
            break
        parser.take("symbol", ",", what="','")
    parser.done()
    return Rule(name, condition, tuple(actions), enabled)


def parse_ruleset(text: str) -> RuleSet:
    """Parse rule file text; raises RuleSyntaxError with line/column."""
    rules: list[Rule] = []
    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        rules.append(_parse_rule_line(raw.rstrip(), line_no))
    return RuleSet(rules)


def _format_value(value: Any) -> str:
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    return str(value)


def serialize_rule(rule: Rule) -> str:
    name = rule.name.replace("\\", "\\\\").replace('"', '\\"')
    parts = [f'rule "{name}"']
    if not rule.enabled:
        parts.append("disabled")
    cond = rule.condition
    subject = f"{cond.device_id}.{cond.property}"
    if cond.comparator == IS_TRUE:
        parts.append(f"when {subject} is true")
    elif cond.comparator == IS_FALSE:
        parts.append(f"when {subject} is false")
    else:
        op = {EQ: "=", NEQ: "!=", GTE: ">=", LT: "<"}[cond.comparator]
        parts.append(f"when {subject} {op} {_format_value(cond.operand)}")
    actions = ", ".join(
        f"set {a.device_id}.{a.property} = {_format_value(a.value)}"
        for a in rule.actions
    )
    parts.append(f"then {actions}")
    return " ".join(parts)


def serialize_ruleset(rules: RuleSet) -> str:
    return "".join(serialize_rule(rule) + "\n" for rule in rules)


def condition_text(cond: Condition) -> str:
    """The condition as it appears in the rule grammar."""
    subject = f"{cond.device_id}.{cond.property}"
    if cond.comparator == IS_TRUE:
        return f"{subject} is true"
    if cond.comparator == IS_FALSE:
        return f"{subject} is false"
    op = {EQ: "=", NEQ: "!=", GTE: ">=", LT: "<"}[cond.comparator]
    return f"{subject} {op} {_format_value(cond.operand)}"


def actions_text(actions: tuple[RuleAction, ...]) -> str:
    return ", ".join(
        f"set {a.device_id}.{a.property} = {_format_value(a.value)}"
        for a in actions
    )


# ---------------------------------------------------------------------------
# Static analysis
# ---------------------------------------------------------------------------

SEVERITY_ERROR = "error"
SEVERITY_WARNING = "warning"


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    code: str
    message: str
    rule_names: tuple[str, ...] = ()

    def __str__(self) -> str:
        return f"{self.severity}: [{self.code}] {self.message}"


def _check_reference(catalog: Catalog, device_id: str, prop: str) -> Optional[str]:
    if device_id not in catalog:
        return f"unknown device {device_id!r}"
    try:
        catalog.get(device_id).schema(prop)
    except Exception:
        return f"device {device_id!r} has no property {prop!r}"
    return None


def _condition_never_true(cond: Condition, catalog: Catalog) -> Optional[str]:
    schema = catalog.get(cond.device_id).schema(cond.property)
    comp, operand = cond.comparator, cond.operand
    if schema.kind == BOOLEAN:
        if comp in (GTE, LT):
            return f"ordered comparison on boolean {cond.device_id}.{cond.property}"
        if comp in (EQ, NEQ) and not isinstance(operand, bool):
            return f"non-boolean operand {operand!r} for boolean property"
        return None
    if schema.kind == ENUM:
        if comp in (IS_TRUE, IS_FALSE, GTE, LT):
            return f"comparator unsuited to enumeration {cond.device_id}.{cond.property}"
        if comp == EQ and operand not in schema.values:
            return f"operand {operand!r} not among {list(schema.values)}"
        return None
    if comp in (IS_TRUE, IS_FALSE):
        return f"boolean test on numeric {cond.device_id}.{cond.property}"
    if isinstance(operand, bool) or not isinstance(operand, (int, float)):
        return f"non-numeric operand {operand!r} for numeric property"
    if comp == EQ and not schema.minimum <= operand <= schema.maximum:
        return f"operand {operand} outside [{schema.minimum}, {schema.maximum}]"
    if comp == GTE and operand > schema.maximum:
        return f"threshold {operand} above maximum {schema.maximum}"
    if comp == LT and operand <= schema.minimum:
        return f"threshold {operand} at or below minimum {schema.minimum}"
    return None


def _jointly_satisfiable(a: Condition, b: Condition, catalog: Catalog) -> bool:
    """Conservative check: can both conditions hold in one world?"""
    if (a.device_id, a.property) != (b.device_id, b.property):
        return True
    schema = catalog.get(a.device_id).schema(a.property)
    if schema.kind == BOOLEAN:
        want_a = _boolean_demand(a)
        want_b = _boolean_demand(b)
        return want_a is None or want_b is None or want_a == want_b
    if schema.kind == ENUM:
        sat = [v for v in schema.values
               if _compare(v, a) and _compare(v, b)]
        return bool(sat)
    lo, hi = schema.minimum, schema.maximum
    # Sample the endpoint lattice of both constraints; numeric domains are
    # intervals, so a satisfying point exists at one of these probes.
    probes = {lo, hi}
    for cond in (a, b):
        if isinstance(cond.operand, (int, float)) and not isinstance(cond.operand, bool):
            for candidate in (cond.operand, cond.operand - 0.5, cond.operand + 0.5):
                if lo <= candidate <= hi:
                    probes.add(candidate)
    return any(_compare(v, a) and _compare(v, b) for v in probes)


def _boolean_demand(cond: Condition) -> Optional[bool]:
    if cond.comparator == IS_TRUE:
        return True
    if cond.comparator == IS_FALSE:
        return False
    if cond.comparator == EQ and isinstance(cond.operand, bool):
        return cond.operand
    if cond.comparator == NEQ and isinstance(cond.operand, bool):
        return not cond.operand
    return None


def _action_decides(action: RuleAction, cond: Condition) -> Optional[bool]:
    """What the action's write does to the condition: True/False/None(unrelated)."""
    if (action.device_id, action.property) != (cond.device_id, cond.property):
        return None
    return _compare(action.value, cond)


def validate(rules: RuleSet, catalog: Catalog) -> list[Diagnostic]:
    """Static diagnostics: dangling references, dead conditions, write
    conflicts (priority-resolved), and guaranteed two-rule oscillations."""
    diags: list[Diagnostic] = []
    resolvable: list[Rule] = []
    for rule in rules:
        broken = False
        problem = _check_reference(catalog, rule.condition.device_id,
                                   rule.condition.property)
        if problem:
            diags.append(Diagnostic(SEVERITY_ERROR, "dangling-reference",
                                    f"rule {rule.name!r}: condition: {problem}",
                                    (rule.name,)))
            broken = True
        for action in rule.actions:
            problem = _check_reference(catalog, action.device_id, action.property)
            if problem:
                diags.append(Diagnostic(SEVERITY_ERROR, "dangling-reference",
                                        f"rule {rule.name!r}: action: {problem}",
                                        (rule.name,)))
                broken = True
        if broken:
            continue
        resolvable.append(rule)
        dead = _condition_never_true(rule.condition, catalog)
        if dead:
            diags.append(Diagnostic(SEVERITY_WARNING, "never-true",
                                    f"rule {rule.name!r} can never fire: {dead}",
                                    (rule.name,)))
        for action in rule.actions:
            schema = catalog.get(action.device_id).schema(action.property)
            if not schema.contains(action.value):
                diags.append(Diagnostic(
                    SEVERITY_ERROR, "action-domain",
                    f"rule {rule.name!r}: value {action.value!r} outside domain "
                    f"of {action.device_id}.{action.property}", (rule.name,)))
            if schema.writable_by != COMMAND:
                diags.append(Diagnostic(
                    SEVERITY_ERROR, "sensor-write",
                    f"rule {rule.name!r} writes sensor-only property "
                    f"{action.device_id}.{action.property}", (rule.name,)))

    active = [r for r in resolvable if r.enabled]
    for i, first in enumerate(active):
        for second in active[i + 1:]:
            if not _jointly_satisfiable(first.condition, second.condition, catalog):
                continue
            clashes = [
                (a, b) for a in first.actions for b in second.actions
                if (a.device_id, a.property) == (b.device_id, b.property)
                and a.value != b.value
            ]
            for a, b in clashes:
                diags.append(Diagnostic(
                    SEVERITY_WARNING, "write-conflict",
                    f"rules {first.name!r} and {second.name!r} write different "
                    f"values to {a.device_id}.{a.property}; priority-resolved "
                    f"(later rule {second.name!r} wins)",
                    (first.name, second.name)))

    for i, first in enumerate(active):
        for second in active[i + 1:]:
            if _guaranteed_two_cycle(first, second):
                diags.append(Diagnostic(
                    SEVERITY_ERROR, "oscillation-cycle",
                    f"rules {first.name!r} and {second.name!r} retrigger each "
                    f"other and never stabilize", (first.name, second.name)))
    return diags


def _guaranteed_two_cycle(first: Rule, second: Rule) -> bool:
    forward = any(_action_decides(a, second.condition) is True and
                  _action_decides(a, first.condition) is False
                  for a in first.actions)
    backward = any(_action_decides(b, first.condition) is True and
                   _action_decides(b, second.condition) is False
                   for b in second.actions)
    return forward and backward


def default_ruleset() -> RuleSet:
    """The shipped office automation table."""
    text = resources.files("officetwin.data").joinpath("default.rules").read_text("utf-8")
    return parse_ruleset(text)


def default_ruleset_text() -> str:
    return resources.files("officetwin.data").joinpath("default.rules").read_text("utf-8")

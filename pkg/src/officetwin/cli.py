"""Command-line entry point.

Subcommands: ``run`` a scenario to a JSONL trace, ``validate`` a rule file,
``serve`` the gateway around a live simulation, ``report`` sustainability
indicators from a trace pair, and ``baseline`` to emit the always-on
counterfactual of a scenario.  Exit codes: 0 success, 1 domain error,
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

from .devices import Catalog, DeviceError, builtin_catalog
from .metrics import (
    MetricsError,
    accumulate,
    baseline_transform,
    default_profile,
    load_profile,
    sdg_report,
)
from .rules import (
    OscillationError,
    RuleError,
    default_ruleset,
    parse_ruleset,
    serialize_ruleset,
    validate,
)
from .simulation import (
    Scenario,
    ScenarioError,
    load_scenario,
    load_shipped_scenario,
    run_scenario,
    scenario_to_json,
)
from .trace import TraceError, load_trace, write_trace

STATE_ENV_VAR = "OFFICETWIN_STATE"
SHIPPED_SCENARIOS = ("fire-drill", "workday")


def _resolve_scenario(ref: str) -> Scenario:
    if os.path.exists(ref):
        return load_scenario(ref)
    if ref in SHIPPED_SCENARIOS:
        return load_shipped_scenario(ref)
    raise ScenarioError(
        f"no scenario file {ref!r} (shipped names: {', '.join(SHIPPED_SCENARIOS)})")


def _load_rules(path: Optional[str]):
    if path is None:
        return None
    with open(path, encoding="utf-8") as fh:
        return parse_ruleset(fh.read())


def cmd_run(args: argparse.Namespace) -> int:
    scenario = _resolve_scenario(args.scenario)
    rules = _load_rules(args.rules)
    if rules is not None:
        scenario.ruleset = rules
    if args.catalog:
        scenario.catalog = Catalog.load(args.catalog)
    if args.seed is not None:
        scenario.seed = args.seed
    from .simulation import Simulation

    sim = Simulation(scenario)
    records = sim.run()
    write_trace(records, args.out)
    print(f"ticks={sim.ticks} firings={sim.firings} oscillations=0 "
          f"records={len(records)} -> {args.out}")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    with open(args.rules, encoding="utf-8") as fh:
        ruleset = parse_ruleset(fh.read())
    catalog = Catalog.load(args.catalog) if args.catalog else builtin_catalog()
    diagnostics = validate(ruleset, catalog)
    print(f"{len(ruleset)} rules, {len(diagnostics)} diagnostics")
    for diagnostic in diagnostics:
        print(f"  {diagnostic}")
    fatal = [d for d in diagnostics if d.severity == "error"]
    return 1 if fatal else 0


def cmd_serve(args: argparse.Namespace) -> int:
    from .gateway import Gateway, GatewayServer, LiveSimulation

    scenario = _resolve_scenario(args.scenario) if args.scenario else None
    state_path = args.state or os.environ.get(STATE_ENV_VAR) or "officetwin-state.json"
    live = LiveSimulation(scenario, tick_interval=args.tick_interval)
    try:
        gateway = Gateway(live, state_path=state_path)
        server = GatewayServer(gateway, args.host, args.port)
    except (OSError, OverflowError, ValueError) as err:
        print(f"cannot bind {args.host}:{args.port}: {err}", file=sys.stderr)
        return 1
    live.start()
    host, port = server.address
    print(f"gateway listening on http://{host}:{port} "
          f"(state: {state_path}, tick every {args.tick_interval}s)",
          flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        live.stop()
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    profile = load_profile(args.profile) if args.profile else default_profile()
    automated = accumulate(load_trace(args.trace), profile)
    baseline = accumulate(load_trace(args.baseline_trace), profile)
    report = sdg_report(automated, baseline)
    if args.format == "json":
        print(json.dumps(report.to_json(), indent=2))
    else:
        print(report.to_text(), end="")
    return 0


def cmd_baseline(args: argparse.Namespace) -> int:
    scenario = _resolve_scenario(args.scenario)
    if scenario.ruleset is None:
        scenario.ruleset = default_ruleset()
    transformed = baseline_transform(scenario)
    rules_path = os.path.splitext(args.out)[0] + ".rules"
    with open(rules_path, "w", encoding="utf-8") as fh:
        fh.write(serialize_ruleset(transformed.ruleset))
    data = scenario_to_json(transformed, rules_path=os.path.basename(rules_path))
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")
    print(f"baseline scenario -> {args.out} (rules: {rules_path})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="officetwin",
        description="Deterministic smart-office digital twin")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write its trace")
    run.add_argument("--scenario", required=True,
                     help="scenario file or shipped name (fire-drill, workday)")
    run.add_argument("--rules", help="rule file overriding the scenario's rules")
    run.add_argument("--catalog", help="catalog file overriding the builtin")
    run.add_argument("--out", required=True, help="output trace (JSON lines)")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="static checks over a rule file")
    val.add_argument("--rules", required=True)
    val.add_argument("--catalog")
    val.set_defaults(func=cmd_validate)

    srv = sub.add_parser("serve", help="serve the gateway HTTP API")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8025)
    srv.add_argument("--state", help=f"state file (default ${STATE_ENV_VAR} "
                                     f"or officetwin-state.json)")
    srv.add_argument("--scenario", help="scenario driving scripted stimuli")
    srv.add_argument("--tick-interval", type=float, default=1.0,
                     help="wall-clock seconds per simulated tick")
    srv.set_defaults(func=cmd_serve)

    rep = sub.add_parser("report", help="sustainability indicators for a trace pair")
    rep.add_argument("--trace", required=True, help="automated-run trace")
    rep.add_argument("--baseline-trace", required=True, help="baseline trace")
    rep.add_argument("--profile", help="power profile file (default shipped)")
    rep.add_argument("--format", choices=("table", "json"), default="table")
    rep.set_defaults(func=cmd_report)

    base = sub.add_parser("baseline", help="emit the always-on counterfactual")
    base.add_argument("--scenario", required=True)
    base.add_argument("--out", required=True, help="output scenario file")
    base.set_defaults(func=cmd_baseline)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except OscillationError as err:
        print(f"oscillation: {err}", file=sys.stderr)
        return 1
    except (RuleError, ScenarioError, MetricsError, TraceError,
            DeviceError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as err:
        print(f"error: invalid JSON: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

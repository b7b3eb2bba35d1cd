"""Trace records and the JSON-lines trace file format.

A trace is an append-only sequence of records with non-decreasing times:

* ``catalog`` — one header mapping device ids to kinds, written first;
* ``change`` — one property write with its old/new values and cause;
* ``snapshot`` — the environment fields at a point in time.

Field order within each line is fixed so identical runs produce identical
bytes, which makes traces diffable and golden-file testable.
"""

from __future__ import annotations

import json
from typing import Any, Iterable

from .devices import StateChange


class TraceError(Exception):
    """A trace file is malformed or incomplete."""


def catalog_record(kinds: dict[str, str]) -> dict[str, Any]:
    return {"type": "catalog", "t": 0.0, "kinds": dict(kinds)}


def snapshot_record(sim_time: float, env_fields: dict[str, Any]) -> dict[str, Any]:
    return {"type": "snapshot", "t": sim_time, "env": env_fields}


def change_record(change: StateChange) -> dict[str, Any]:
    return change.to_json()


def dumps_record(record: dict[str, Any]) -> str:
    return json.dumps(record, separators=(",", ":"), ensure_ascii=True)


def write_trace(records: Iterable[dict[str, Any]], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(dumps_record(record) + "\n")


def load_trace(path: str) -> list[dict[str, Any]]:
    records: list[dict[str, Any]] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as err:
                raise TraceError(f"{path}:{line_no}: not valid JSON: {err}") from None
            if "type" not in record:
                raise TraceError(f"{path}:{line_no}: record has no type")
            records.append(record)
    if not records:
        raise TraceError(f"{path}: empty trace")
    return records


def trace_kinds(records: list[dict[str, Any]]) -> dict[str, str]:
    for record in records:
        if record["type"] == "catalog":
            return record["kinds"]
    raise TraceError("trace has no catalog header")


def final_values(records: list[dict[str, Any]]) -> dict[str, dict[str, Any]]:
    """Replay all change records to the last written value per property."""
    values: dict[str, dict[str, Any]] = {}
    for record in records:
        if record["type"] == "change":
            values.setdefault(record["device"], {})[record["property"]] = record["new"]
    return values


def slice_trace(records: list[dict[str, Any]], split_time: float
                ) -> tuple[list[dict[str, Any]], list[dict[str, Any]]]:
    """Split a trace at ``split_time`` into two self-contained traces.

    The first half ends with a synthetic snapshot at the split; the second
    starts with the header, synthetic initialization records carrying the
    state at the split, and every later record.
    """
    kinds = trace_kinds(records)
    first: list[dict[str, Any]] = []
    state: dict[str, dict[str, Any]] = {}
    last_env: dict[str, Any] = {}
    rest: list[dict[str, Any]] = []
    for record in records:
        if record["t"] <= split_time and not rest:
            first.append(record)
            if record["type"] == "change":
                state.setdefault(record["device"], {})[record["property"]] = record["new"]
            elif record["type"] == "snapshot":
                last_env = record["env"]
        else:
            rest.append(record)
    first.append(snapshot_record(split_time, dict(last_env)))
    second: list[dict[str, Any]] = [catalog_record(kinds)]
    for device, props in state.items():
        for prop, value in props.items():
            second.append({"type": "change", "t": split_time, "device": device,
                           "property": prop, "old": None, "new": value,
                           "cause": "initialization"})
    second.extend(rest)
    return first, second

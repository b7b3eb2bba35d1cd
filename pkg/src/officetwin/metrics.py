"""Resource accounting over traces and sustainability-target reporting.

The meter replays a trace, integrating power draw, sprinkler flow, and
solar generation over the interval each state was held.  Internally all
tallies are watt-seconds and flow-minutes-seconds so integer-valued inputs
stay exact; unit conversions happen only in the derived views.

Comparing an automated run against its always-on baseline yields one
indicator row per supported sustainability target.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Optional

from .simulation import PolicyActuator, Scenario, StaticPolicy
from .trace import trace_kinds

SDG_TARGETS = ("6.4", "7.1", "7.3", "7b", "8.4", "9.4", "9.5",
               "11.6", "12.2", "12.5", "13.b")

# Weight for folding water into the combined resource index: roughly the
# energy embedded in treating and pumping one liter, in kWh.
WATER_KWH_PER_LITER = 0.006

COMFORT_KINDS = ("Ceiling Fan", "Light", "AC", "Street Lamp")


class MetricsError(Exception):
    """Base class for metering failures."""


class ProfileError(MetricsError):
    """The power profile does not cover every device kind in the trace."""


class ComparabilityError(MetricsError):
    """Two ledgers cannot be compared (different durations)."""


def _state_key(value: Any) -> str:
    if value is True:
        return "true"
    if value is False:
        return "false"
    return str(value)


@dataclass
class DeviceUsage:
    watt_seconds: float = 0.0
    flow_lpm_seconds: float = 0.0
    generated_watt_seconds: float = 0.0

    @property
    def energy_wh(self) -> float:
        return self.watt_seconds / 3600.0

    @property
    def water_l(self) -> float:
        return self.flow_lpm_seconds / 60.0

    @property
    def generated_wh(self) -> float:
        return self.generated_watt_seconds / 3600.0

    def __add__(self, other: "DeviceUsage") -> "DeviceUsage":
        return DeviceUsage(
            self.watt_seconds + other.watt_seconds,
            self.flow_lpm_seconds + other.flow_lpm_seconds,
            self.generated_watt_seconds + other.generated_watt_seconds,
        )


@dataclass
class ResourceLedger:
    per_device: dict[str, DeviceUsage]
    kinds: dict[str, str]
    occupied_seconds: float = 0.0
    unoccupied_on_seconds: float = 0.0
    start_time: float = 0.0
    end_time: float = 0.0

    @property
    def duration(self) -> float:
        return self.end_time - self.start_time

    @property
    def total_energy_wh(self) -> float:
        return sum(u.watt_seconds for u in self.per_device.values()) / 3600.0

    @property
    def total_water_l(self) -> float:
        return sum(u.flow_lpm_seconds for u in self.per_device.values()) / 60.0

    @property
    def total_generated_wh(self) -> float:
        return sum(u.generated_watt_seconds
                   for u in self.per_device.values()) / 3600.0

    def energy_wh_for_kinds(self, kinds: tuple[str, ...]) -> float:
        return sum(u.watt_seconds for device, u in self.per_device.items()
                   if self.kinds.get(device) in kinds) / 3600.0

    def __add__(self, other: "ResourceLedger") -> "ResourceLedger":
        devices = sorted(set(self.per_device) | set(other.per_device))
        merged = {
            device: self.per_device.get(device, DeviceUsage())
            + other.per_device.get(device, DeviceUsage())
            for device in devices
        }
        kinds = dict(self.kinds)
        kinds.update(other.kinds)
        return ResourceLedger(
            merged, kinds,
            self.occupied_seconds + other.occupied_seconds,
            self.unoccupied_on_seconds + other.unoccupied_on_seconds,
            min(self.start_time, other.start_time),
            max(self.end_time, other.end_time),
        )

    def to_json(self) -> dict[str, Any]:
        return {
            "duration_s": self.duration,
            "total_energy_wh": self.total_energy_wh,
            "total_water_l": self.total_water_l,
            "total_generated_wh": self.total_generated_wh,
            "occupied_seconds": self.occupied_seconds,
            "unoccupied_on_seconds": self.unoccupied_on_seconds,
            "per_device": {
                device: {
                    "kind": self.kinds.get(device, ""),
                    "energy_wh": usage.energy_wh,
                    "water_l": usage.water_l,
                    "generated_wh": usage.generated_wh,
                }
                for device, usage in self.per_device.items()
            },
        }


def default_profile() -> dict[str, dict[str, Any]]:
    text = resources.files("officetwin.data").joinpath("profile.json").read_text("utf-8")
    return json.loads(text)


def profile_from_catalog(catalog) -> dict[str, dict[str, Any]]:
    return {descriptor.kind: dict(descriptor.ratings) for descriptor in catalog}


def load_profile(path: str) -> dict[str, dict[str, Any]]:
    with open(path, encoding="utf-8") as fh:
        profile = json.load(fh)
    if not isinstance(profile, dict):
        raise ProfileError("profile must be a JSON object keyed by device kind")
    return profile


def accumulate(records: list[dict[str, Any]],
               profile: dict[str, dict[str, Any]]) -> ResourceLedger:
    """Integrate a complete trace into a per-device resource ledger."""
    if not records or records[-1]["type"] != "snapshot":
        raise MetricsError("trace is incomplete: no terminal snapshot")
    kinds = trace_kinds(records)
    missing = sorted({kind for kind in kinds.values() if kind not in profile})
    if missing:
        raise ProfileError(
            f"power profile has no entry for kind(s): {', '.join(missing)}")

    body = [r for r in records if r["type"] != "catalog"]
    start_time = body[0]["t"]
    end_time = records[-1]["t"]

    per_device = {device: DeviceUsage() for device in kinds}
    values: dict[str, dict[str, Any]] = {}
    occupied = 0.0
    unoccupied_on = 0.0
    cursor = start_time

    def draw(device: str) -> float:
        rating = profile[kinds[device]]
        table = rating.get("draw_watts")
        if not table:
            return 0.0
        return float(table.get(_state_key(values[device].get(rating["property"])), 0.0))

    def flow(device: str) -> float:
        rating = profile[kinds[device]]
        table = rating.get("flow_lpm")
        if not table:
            return 0.0
        return float(table.get(_state_key(values[device].get(rating["property"])), 0.0))

    def generation(device: str) -> float:
        prop = profile[kinds[device]].get("generation_property")
        if not prop:
            return 0.0
        return float(values[device].get(prop, 0.0))

    for record in body:
        span = record["t"] - cursor
        if span > 0:
            occupancy = values.get("OccupancySensor", {}).get("Count", 0)
            for device in values:
                watts = draw(device)
                usage = per_device[device]
                usage.watt_seconds += watts * span
                usage.flow_lpm_seconds += flow(device) * span
                usage.generated_watt_seconds += generation(device) * span
                if watts > 0 and occupancy == 0:
                    unoccupied_on += span
            if occupancy > 0:
                occupied += span
            cursor = record["t"]
        if record["type"] == "change":
            device = record["device"]
            if device not in kinds:
                raise ProfileError(f"trace device {device!r} missing from header")
            values.setdefault(device, {})[record["property"]] = record["new"]

    return ResourceLedger(per_device, kinds, occupied, unoccupied_on,
                          start_time, end_time)


def baseline_transform(scenario: Scenario) -> Scenario:
    """The always-on counterfactual: same stimuli, occupancy-driven rules
    dropped, and comfort actuators held on across the work window."""
    scenario.validate()
    from .rules import RuleSet, default_ruleset

    ruleset = scenario.ruleset or default_ruleset()
    retained = RuleSet([
        rule for rule in ruleset
        if rule.condition.device_id != "OccupancySensor"
    ])
    window = scenario.work_window or (0.0, scenario.duration)
    policy = StaticPolicy(
        window=window,
        actuators=(
            PolicyActuator("Fan", "Status", "High", "Off"),
            PolicyActuator("Light", "On", True, False),
            PolicyActuator("AC", "On", True, False),
            PolicyActuator("StreetLamp", "On", True, False),
        ),
    )
    return Scenario(
        seed=scenario.seed,
        duration=scenario.duration,
        timestep=scenario.timestep,
        stimuli=list(scenario.stimuli),
        ruleset=retained,
        catalog=scenario.catalog,
        constants=scenario.constants,
        snapshot_every=scenario.snapshot_every,
        work_window=scenario.work_window,
        policy=policy,
        max_passes=scenario.max_passes,
    )


@dataclass(frozen=True)
class SDGRow:
    target: str
    indicator: str
    baseline: Any
    automated: Any
    relative_change: Optional[float]

    def to_json(self) -> dict[str, Any]:
        return {
            "target": self.target,
            "indicator": self.indicator,
            "baseline": self.baseline,
            "automated": self.automated,
            "relative_change": self.relative_change,
        }


@dataclass
class SDGReport:
    rows: list[SDGRow] = field(default_factory=list)

    def row(self, target: str, indicator: Optional[str] = None) -> SDGRow:
        for row in self.rows:
            if row.target == target and (indicator is None
                                         or row.indicator == indicator):
                return row
        raise KeyError(f"no report row for target {target}")

    def to_json(self) -> dict[str, Any]:
        return {"rows": [row.to_json() for row in self.rows]}

    def to_text(self) -> str:
        headers = ("target", "indicator", "baseline", "automated", "change")
        table = [headers]
        for row in self.rows:
            table.append((
                row.target,
                row.indicator,
                _cell(row.baseline),
                _cell(row.automated),
                "n/a" if row.relative_change is None
                else f"{row.relative_change * 100:+.1f}%",
            ))
        widths = [max(len(line[col]) for line in table)
                  for col in range(len(headers))]
        lines = []
        for index, line in enumerate(table):
            lines.append("  ".join(cell.ljust(width)
                                   for cell, width in zip(line, widths)).rstrip())
            if index == 0:
                lines.append("  ".join("-" * width for width in widths))
        return "\n".join(lines) + "\n"


def _cell(value: Any) -> str:
    if value is True:
        return "yes"
    if value is False:
        return "no"
    if isinstance(value, float):
        return f"{value:.3f}"
    return str(value)


def _relative(automated: float, baseline: float) -> Optional[float]:
    if baseline > 0:
        return (automated - baseline) / baseline
    return None


def sdg_report(automated: ResourceLedger, baseline: ResourceLedger) -> SDGReport:
    """Target-indexed indicators comparing a run against its baseline."""
    if automated.duration != baseline.duration:
        raise ComparabilityError(
            f"ledgers cover different durations: automated {automated.duration}s "
            f"vs baseline {baseline.duration}s")

    auto_energy = automated.total_energy_wh
    base_energy = baseline.total_energy_wh
    auto_water = automated.total_water_l
    base_water = baseline.total_water_l
    auto_share = (automated.total_generated_wh / auto_energy
                  if auto_energy > 0 else 0.0)
    base_share = (baseline.total_generated_wh / base_energy
                  if base_energy > 0 else 0.0)
    auto_import = max(auto_energy - automated.total_generated_wh, 0.0)
    base_import = max(base_energy - baseline.total_generated_wh, 0.0)
    auto_export = max(automated.total_generated_wh - auto_energy, 0.0)
    base_export = max(baseline.total_generated_wh - base_energy, 0.0)
    auto_index = auto_energy / 1000.0 + WATER_KWH_PER_LITER * auto_water
    base_index = base_energy / 1000.0 + WATER_KWH_PER_LITER * base_water
    auto_waste = automated.unoccupied_on_seconds / 3600.0
    base_waste = baseline.unoccupied_on_seconds / 3600.0

    rows = [
        SDGRow("6.4", "water_l", base_water, auto_water,
               _relative(auto_water, base_water)),
        SDGRow("7.1", "solar_share_of_consumption", base_share, auto_share,
               _relative(auto_share, base_share)),
        SDGRow("7.3", "energy_consumed_wh", base_energy, auto_energy,
               _relative(auto_energy, base_energy)),
        SDGRow("7b", "solar_share_of_consumption", base_share, auto_share,
               _relative(auto_share, base_share)),
        SDGRow("8.4", "energy_consumed_wh", base_energy, auto_energy,
               _relative(auto_energy, base_energy)),
        SDGRow("9.4", "automation_and_metering_active", False, True, None),
        SDGRow("9.5", "automation_and_metering_active", False, True, None),
        SDGRow("11.6", "net_grid_import_wh", base_import, auto_import,
               _relative(auto_import, base_import)),
        SDGRow("11.6", "energy_exported_wh", base_export, auto_export,
               _relative(auto_export, base_export)),
        SDGRow("12.2", "combined_resource_index_kwh_eq", base_index, auto_index,
               _relative(auto_index, base_index)),
        SDGRow("12.5", "waste_hours", base_waste, auto_waste,
               _relative(auto_waste, base_waste)),
        SDGRow("13.b", "automation_and_metering_active", False, True, None),
    ]
    return SDGReport(rows)

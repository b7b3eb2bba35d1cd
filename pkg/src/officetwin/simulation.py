"""Fixed-timestep office simulation: environment, sensors, and the run loop.

Each tick executes in a fixed order: apply due stimuli and queued commands,
sample sensors from the environment, evaluate the rules to a fixed point,
couple actuators back into the environment, then advance time.  The loop is
a pure function of the scenario, so identical inputs give byte-identical
traces.
"""

from __future__ import annotations

import json
import math
import os
import random
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from typing import Any, Callable, Optional

from . import trace as tracefile
from .devices import Catalog, StateChange, World, apply_change, builtin_catalog
from .rules import (
    OscillationError,
    RuleSet,
    default_ruleset,
    parse_ruleset,
    run_to_fixed_point,
)

STIMULUS_KINDS = (
    "motion_pulse",
    "card_scan",
    "fire_start",
    "fire_end",
    "wind_set",
    "occupancy_set",
    "smoke_inject",
    "daylight_set",
)


class ScenarioError(Exception):
    """A scenario file or stimulus is invalid."""


@dataclass
class EnvironmentState:
    """Physical state of the office at one instant."""

    sim_time: float = 0.0
    smoke_level: float = 0.0
    fire_present: bool = False
    wind_speed: float = 0.0
    humidity_pct: float = 50.0
    co2_ppm: float = 400.0
    occupancy: int = 0
    daylight: float = 0.0

    def check(self) -> None:
        assert 0.0 <= self.smoke_level <= 1.0
        assert self.wind_speed >= 0.0
        assert 0.0 <= self.humidity_pct <= 100.0
        assert self.co2_ppm >= 0.0
        assert self.occupancy >= 0
        assert 0.0 <= self.daylight <= 1.0

    def to_json(self) -> dict[str, Any]:
        return {
            "smoke_level": self.smoke_level,
            "fire_present": self.fire_present,
            "wind_speed": self.wind_speed,
            "humidity_pct": self.humidity_pct,
            "co2_ppm": self.co2_ppm,
            "occupancy": self.occupancy,
            "daylight": self.daylight,
        }


@dataclass(frozen=True)
class Stimulus:
    """A timed external event driving the environment."""

    at: float
    kind: str
    card_id: int = 0
    speed: float = 0.0
    count: int = 0
    rate: float = 0.0
    duration: float = 0.0
    fraction: float = 0.0

    def validate(self) -> None:
        if self.at < 0:
            raise ScenarioError(f"stimulus at {self.at} is before time zero")
        if self.kind not in STIMULUS_KINDS:
            raise ScenarioError(f"unknown stimulus kind {self.kind!r}")
        if self.kind == "card_scan" and self.card_id < 0:
            raise ScenarioError("card_scan needs a non-negative card_id")
        if self.kind == "wind_set" and self.speed < 0:
            raise ScenarioError("wind_set needs a non-negative speed")
        if self.kind == "occupancy_set" and self.count < 0:
            raise ScenarioError("occupancy_set needs a non-negative count")
        if self.kind == "smoke_inject" and (self.rate < 0 or self.duration < 0):
            raise ScenarioError("smoke_inject needs non-negative rate and duration")
        if self.kind == "daylight_set" and not 0.0 <= self.fraction <= 1.0:
            raise ScenarioError("daylight_set fraction must be within [0, 1]")

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"at": self.at, "kind": self.kind}
        if self.kind == "card_scan":
            out["card_id"] = self.card_id
        elif self.kind == "wind_set":
            out["speed"] = self.speed
        elif self.kind == "occupancy_set":
            out["count"] = self.count
        elif self.kind == "smoke_inject":
            out["rate"] = self.rate
            out["duration"] = self.duration
        elif self.kind == "daylight_set":
            out["fraction"] = self.fraction
        return out

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Stimulus":
        stimulus = cls(
            at=float(data.get("at", 0.0)),
            kind=data.get("kind", ""),
            card_id=int(data.get("card_id", 0)),
            speed=float(data.get("speed", 0.0)),
            count=int(data.get("count", 0)),
            rate=float(data.get("rate", 0.0)),
            duration=float(data.get("duration", 0.0)),
            fraction=float(data.get("fraction", 0.0)),
        )
        stimulus.validate()
        return stimulus


@dataclass(frozen=True)
class SimConstants:
    """Tunable dynamics; every field can be overridden from a scenario file."""

    motion_hold_s: float = 30.0
    card_hold_s: float = 5.0
    extinguish_s: float = 30.0
    k_decay: float = 0.01
    k_blower: float = 0.10
    k_window: float = 0.05
    humidifier_pct_per_s: float = 0.05
    solar_rated_watts: float = 300.0
    sensor_noise_std: float = 0.0

    @classmethod
    def from_overrides(cls, overrides: dict[str, Any]) -> "SimConstants":
        known = {f.name for f in fields(cls)}
        unknown = set(overrides) - known
        if unknown:
            raise ScenarioError(f"unknown constants: {', '.join(sorted(unknown))}")
        return cls(**{k: float(v) for k, v in overrides.items()})


@dataclass(frozen=True)
class PolicyActuator:
    device_id: str
    property: str
    on_value: Any
    off_value: Any


@dataclass(frozen=True)
class StaticPolicy:
    """Standing commands that hold actuators on inside a time window."""

    window: tuple[float, float]
    actuators: tuple[PolicyActuator, ...]

    def active(self) -> bool:
        return self.window[1] > self.window[0]

    def desired(self, sim_time: float) -> list[tuple[str, str, Any]]:
        if not self.active():
            return []
        inside = self.window[0] <= sim_time < self.window[1]
        return [(a.device_id, a.property, a.on_value if inside else a.off_value)
                for a in self.actuators]

    def to_json(self) -> dict[str, Any]:
        return {
            "window": list(self.window),
            "actuators": [[a.device_id, a.property, a.on_value, a.off_value]
                          for a in self.actuators],
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "StaticPolicy":
        window = data.get("window", [0.0, 0.0])
        return cls(
            (float(window[0]), float(window[1])),
            tuple(PolicyActuator(a[0], a[1], a[2], a[3])
                  for a in data.get("actuators", ())),
        )


@dataclass
class Scenario:
    """Everything needed for one reproducible run."""

    seed: int = 0
    duration: float = 60.0
    timestep: float = 1.0
    stimuli: list[Stimulus] = field(default_factory=list)
    ruleset: Optional[RuleSet] = None
    catalog: Optional[Catalog] = None
    constants: SimConstants = field(default_factory=SimConstants)
    snapshot_every: int = 60
    work_window: Optional[tuple[float, float]] = None
    policy: Optional[StaticPolicy] = None
    max_passes: int = 16

    def validate(self) -> None:
        if self.timestep <= 0:
            raise ScenarioError("timestep must be positive")
        if self.duration < 0:
            raise ScenarioError("duration must not be negative")
        if self.snapshot_every < 1:
            raise ScenarioError("snapshot_every must be at least 1")
        ordered = all(a.at <= b.at for a, b in zip(self.stimuli, self.stimuli[1:]))
        if not ordered:
            raise ScenarioError("stimuli must be sorted by time")
        for stimulus in self.stimuli:
            stimulus.validate()


def scenario_from_json(data: dict[str, Any], base_dir: str = ".") -> Scenario:
    """Build a scenario from its JSON form; rule/catalog entries name files
    relative to ``base_dir``."""
    ruleset = None
    if data.get("rules"):
        path = os.path.join(base_dir, data["rules"])
        with open(path, encoding="utf-8") as fh:
            ruleset = parse_ruleset(fh.read())
    catalog = None
    if data.get("catalog"):
        catalog = Catalog.load(os.path.join(base_dir, data["catalog"]))
    window = data.get("work_window")
    policy = StaticPolicy.from_json(data["policy"]) if data.get("policy") else None
    scenario = Scenario(
        seed=int(data.get("seed", 0)),
        duration=float(data.get("duration", 60.0)),
        timestep=float(data.get("timestep", 1.0)),
        stimuli=[Stimulus.from_json(s) for s in data.get("stimuli", ())],
        ruleset=ruleset,
        catalog=catalog,
        constants=SimConstants.from_overrides(data.get("constants", {})),
        snapshot_every=int(data.get("snapshot_every", 60)),
        work_window=(float(window[0]), float(window[1])) if window else None,
        policy=policy,
        max_passes=int(data.get("max_passes", 16)),
    )
    scenario.validate()
    return scenario


def scenario_to_json(scenario: Scenario, rules_path: Optional[str] = None,
                     catalog_path: Optional[str] = None) -> dict[str, Any]:
    out: dict[str, Any] = {
        "seed": scenario.seed,
        "duration": scenario.duration,
        "timestep": scenario.timestep,
        "snapshot_every": scenario.snapshot_every,
    }
    if scenario.work_window:
        out["work_window"] = list(scenario.work_window)
    overrides = {}
    base = SimConstants()
    for spec_field in fields(SimConstants):
        value = getattr(scenario.constants, spec_field.name)
        if value != getattr(base, spec_field.name):
            overrides[spec_field.name] = value
    if overrides:
        out["constants"] = overrides
    if rules_path:
        out["rules"] = rules_path
    if catalog_path:
        out["catalog"] = catalog_path
    if scenario.policy:
        out["policy"] = scenario.policy.to_json()
    out["stimuli"] = [s.to_json() for s in scenario.stimuli]
    return out


def load_scenario(path: str) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return scenario_from_json(data, os.path.dirname(os.path.abspath(path)))


def load_shipped_scenario(name: str) -> Scenario:
    text = (resources.files("officetwin.data") / "scenarios" / f"{name}.json"
            ).read_text("utf-8")
    return scenario_from_json(json.loads(text))


def _clamp(value: float, lo: float, hi: float) -> float:
    return lo if value < lo else hi if value > hi else value


def couple_actuators(env: EnvironmentState, world: World, dt: float,
                     constants: SimConstants, inject_rate: float = 0.0,
                     sprinkler_seconds: float = 0.0
                     ) -> tuple[EnvironmentState, float]:
    """One first-order environment step under the current actuator states.

    Smoke decays naturally and faster with the blower on High or the window
    open; the fire clears after the sprinkler has run through the
    extinguish time; a running humidifier raises humidity.  Returns the new
    environment and the updated consecutive-sprinkler-seconds counter.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    k = constants.k_decay
    blower = world.get("Blower")
    if blower is not None and blower.values.get("Status") == "High":
        k += constants.k_blower
    window = world.get("Window")
    if window is not None and window.values.get("On") is True:
        k += constants.k_window
    smoke = _clamp(env.smoke_level + dt * (inject_rate - k * env.smoke_level),
                   0.0, 1.0)

    fire = env.fire_present
    sprinkler = world.get("FireSprinkler")
    sprinkling = sprinkler is not None and sprinkler.values.get("Status") is True
    if fire and sprinkling:
        sprinkler_seconds += dt
        if sprinkler_seconds >= constants.extinguish_s:
            fire = False
            sprinkler_seconds = 0.0
    else:
        sprinkler_seconds = 0.0

    humidity = env.humidity_pct
    humidifier = world.get("Humidifier")
    if humidifier is not None and humidifier.values.get("On") is True:
        humidity = _clamp(humidity + constants.humidifier_pct_per_s * dt,
                          0.0, 100.0)

    new_env = replace(env, smoke_level=smoke, fire_present=fire,
                      humidity_pct=humidity)
    new_env.check()
    return new_env, sprinkler_seconds


class Simulation:
    """Owns all mutable run state; drive with tick() or run()."""

    def __init__(self, scenario: Scenario):
        scenario.validate()
        self.scenario = scenario
        self.catalog = scenario.catalog or builtin_catalog()
        self.ruleset = scenario.ruleset or default_ruleset()
        self.constants = scenario.constants
        self.world: World = self.catalog.instantiate_all()
        self.env = EnvironmentState()
        self.records: list[dict[str, Any]] = []
        self.rng = random.Random(scenario.seed)
        self.ticks = 0
        self.firings = 0
        self.applied_stimuli: list[Stimulus] = []
        self.pending_commands: list[tuple[str, str, Any, str,
                                          Optional[Callable[[Any], None]]]] = []
        self.pending_stimuli: list[Stimulus] = []
        self._stimulus_index = 0
        self._inject_rate = 0.0
        self._inject_until = -math.inf
        self._motion_until = -math.inf
        self._card_value = 0
        self._card_until = -math.inf
        self._sprinkler_seconds = 0.0
        self._emit_initialization()

    # -- trace helpers ------------------------------------------------------

    def _emit_initialization(self) -> None:
        self.records.append(tracefile.catalog_record(self.catalog.kinds()))
        for state in self.world.values():
            for schema in state.descriptor.properties:
                self.records.append({
                    "type": "change", "t": 0.0, "device": state.device_id,
                    "property": schema.name, "old": None,
                    "new": state.values[schema.name], "cause": "initialization",
                })

    def _record(self, changes: list[StateChange]) -> None:
        for change in changes:
            self.records.append(tracefile.change_record(change))

    def snapshot(self) -> None:
        self.records.append(
            tracefile.snapshot_record(self.env.sim_time, self.env.to_json()))

    # -- command/stimulus entry points (drained at the top of each tick) ----

    def enqueue_command(self, device_id: str, prop: str, value: Any, cause: str,
                        on_done: Optional[Callable[[Any], None]] = None) -> None:
        self.pending_commands.append((device_id, prop, value, cause, on_done))

    def enqueue_stimulus(self, stimulus: Stimulus) -> None:
        stimulus.validate()
        self.pending_stimuli.append(stimulus)

    # -- stimulus application ------------------------------------------------

    def _apply_stimulus(self, stimulus: Stimulus) -> None:
        t = self.env.sim_time
        if stimulus.kind == "motion_pulse":
            self._motion_until = t + self.constants.motion_hold_s
        elif stimulus.kind == "card_scan":
            self._card_value = stimulus.card_id
            self._card_until = t + self.constants.card_hold_s
        elif stimulus.kind == "fire_start":
            self.env.fire_present = True
        elif stimulus.kind == "fire_end":
            self.env.fire_present = False
        elif stimulus.kind == "wind_set":
            self.env.wind_speed = stimulus.speed
        elif stimulus.kind == "occupancy_set":
            self.env.occupancy = stimulus.count
        elif stimulus.kind == "smoke_inject":
            self._inject_rate = stimulus.rate
            self._inject_until = t + stimulus.duration
        elif stimulus.kind == "daylight_set":
            self.env.daylight = stimulus.fraction
        self.applied_stimuli.append(replace(stimulus, at=t))

    def _apply_due_stimuli(self) -> None:
        t = self.env.sim_time
        while (self._stimulus_index < len(self.scenario.stimuli)
               and self.scenario.stimuli[self._stimulus_index].at <= t):
            self._apply_stimulus(self.scenario.stimuli[self._stimulus_index])
            self._stimulus_index += 1
        injected, self.pending_stimuli = self.pending_stimuli, []
        for stimulus in injected:
            self._apply_stimulus(stimulus)

    def _apply_commands(self) -> None:
        t = self.env.sim_time
        drained, self.pending_commands = self.pending_commands, []
        for device_id, prop, value, cause, on_done in drained:
            try:
                state = self.world.get(device_id)
                if state is None:
                    raise KeyError(f"no device {device_id!r}")
                change = apply_change(state, prop, value, cause, t)
                if change is not None:
                    self.records.append(tracefile.change_record(change))
                if on_done is not None:
                    on_done(change)
            except Exception as err:
                if on_done is not None:
                    on_done(err)
                else:
                    raise

    def _apply_policy(self) -> None:
        policy = self.scenario.policy
        if policy is None:
            return
        t = self.env.sim_time
        for device_id, prop, value in policy.desired(t):
            state = self.world.get(device_id)
            if state is None:
                continue
            change = apply_change(state, prop, value, "command:baseline-policy", t)
            if change is not None:
                self.records.append(tracefile.change_record(change))

    # -- sensing -------------------------------------------------------------

    def _noise(self, value: float, lo: float, hi: float) -> float:
        std = self.constants.sensor_noise_std
        if std <= 0:
            return value
        return _clamp(value + self.rng.gauss(0.0, std), lo, hi)

    def sense(self) -> list[StateChange]:
        """Copy the environment into sensor properties; returns the changes."""
        t = self.env.sim_time
        readings: list[tuple[str, str, Any]] = [
            ("SmokeDetector", "Level", self._noise(self.env.smoke_level, 0.0, 1.0)),
            ("FireMonitor", "FireDetected", self.env.fire_present),
            ("HumidityMonitor", "Level",
             self._noise(self.env.humidity_pct, 0.0, 100.0)),
            ("CO2Monitor", "Level", self._noise(self.env.co2_ppm, 0.0, 5000.0)),
            ("MotionDetector", "On", t < self._motion_until),
            ("WindDetector", "Speed", self._noise(self.env.wind_speed, 0.0, 100.0)),
            ("SolarPanel", "Output",
             self.env.daylight * self.constants.solar_rated_watts),
            ("RFIDReader", "CardID",
             self._card_value if t < self._card_until else 0),
            ("OccupancySensor", "Count", self.env.occupancy),
        ]
        changes: list[StateChange] = []
        for device_id, prop, value in readings:
            state = self.world.get(device_id)
            if state is None:
                continue
            change = apply_change(state, prop, value, "environment", t)
            if change is not None:
                changes.append(change)
        return changes

    # -- the loop ------------------------------------------------------------

    def tick(self) -> None:
        t = self.env.sim_time
        self._apply_due_stimuli()
        self._apply_commands()
        self._apply_policy()
        self._record(self.sense())
        try:
            self.world, evaluation = run_to_fixed_point(
                self.ruleset, self.world,
                max_passes=self.scenario.max_passes, sim_time=t)
        except OscillationError as err:
            raise err.at_time(t) from None
        committed = evaluation.committed_changes()
        if committed:
            self.firings += sum(
                1 for f in evaluation.firings if f.changes
                and not (evaluation.final_pass_cancelled
                         and f.pass_number == evaluation.passes))
            self._record(committed)
        inject = self._inject_rate if t < self._inject_until else 0.0
        self.env, self._sprinkler_seconds = couple_actuators(
            self.env, self.world, self.scenario.timestep, self.constants,
            inject_rate=inject, sprinkler_seconds=self._sprinkler_seconds)
        self.env.sim_time = t + self.scenario.timestep
        self.ticks += 1
        if self.ticks % self.scenario.snapshot_every == 0:
            self.snapshot()

    def run(self) -> list[dict[str, Any]]:
        while self.env.sim_time < self.scenario.duration:
            self.tick()
        last = self.records[-1]
        if last["type"] != "snapshot" or last["t"] != self.scenario.duration:
            self.env.sim_time = self.scenario.duration
            self.snapshot()
        return self.records


def run_scenario(scenario: Scenario) -> list[dict[str, Any]]:
    """Run to completion and return the full trace record list."""
    return Simulation(scenario).run()

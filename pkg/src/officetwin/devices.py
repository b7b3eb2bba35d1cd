"""Device catalog, property schemas, and validated device state.

Every device in the office exposes a small set of typed properties.
Properties are either written by the environment (``sensor``) or by rules
and operators (``command``); the split keeps automation from forging
sensor readings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Iterator, Optional

BOOLEAN = "boolean"
ENUM = "enum"
NUMBER = "number"

SENSOR = "sensor"
COMMAND = "command"

CAUSE_INIT = "initialization"
CAUSE_ENVIRONMENT = "environment"


class DeviceError(Exception):
    """Base class for device-model failures."""


class SchemaError(DeviceError):
    """A descriptor or property schema is internally inconsistent."""


class UnknownDeviceError(DeviceError):
    """A device id does not exist in the catalog or world."""


class UnknownPropertyError(DeviceError):
    """A property name is not declared by the device's schema."""


class DomainError(DeviceError):
    """A value lies outside the property's declared domain."""


class WritePermissionError(DeviceError):
    """The write's cause is not permitted for this property."""


@dataclass(frozen=True)
class PropertySchema:
    """Typed schema for one device property.

    ``kind`` is one of ``boolean``, ``enum`` (with ``values``), or
    ``number`` (with ``minimum``/``maximum`` and optional ``unit``).
    """

    name: str
    kind: str
    writable_by: str = COMMAND
    values: tuple[str, ...] = ()
    minimum: float = 0.0
    maximum: float = 1.0
    unit: str = ""
    integer: bool = False

    def validate(self) -> None:
        if not self.name or not self.name.replace("_", "").isalnum():
            raise SchemaError(f"invalid property name {self.name!r}")
        if self.kind not in (BOOLEAN, ENUM, NUMBER):
            raise SchemaError(f"property {self.name}: unknown kind {self.kind!r}")
        if self.writable_by not in (SENSOR, COMMAND):
            raise SchemaError(
                f"property {self.name}: writable_by must be sensor or command"
            )
        if self.kind == ENUM:
            if not self.values:
                raise SchemaError(f"property {self.name}: empty enum value list")
            if len(set(self.values)) != len(self.values):
                raise SchemaError(f"property {self.name}: duplicate enum values")
        if self.kind == NUMBER and not self.minimum < self.maximum:
            raise SchemaError(
                f"property {self.name}: minimum {self.minimum} must be below "
                f"maximum {self.maximum}"
            )

    def contains(self, value: Any) -> bool:
        """True when ``value`` lies in this property's domain."""
        if self.kind == BOOLEAN:
            return isinstance(value, bool)
        if self.kind == ENUM:
            return isinstance(value, str) and value in self.values
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return False
        if self.integer and not isinstance(value, int):
            return False
        return self.minimum <= value <= self.maximum

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"name": self.name, "kind": self.kind,
                               "writable_by": self.writable_by}
        if self.kind == ENUM:
            out["values"] = list(self.values)
        if self.kind == NUMBER:
            out["minimum"] = self.minimum
            out["maximum"] = self.maximum
            if self.unit:
                out["unit"] = self.unit
            if self.integer:
                out["integer"] = True
        return out

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "PropertySchema":
        return cls(
            name=data["name"],
            kind=data["kind"],
            writable_by=data.get("writable_by", COMMAND),
            values=tuple(data.get("values", ())),
            minimum=float(data.get("minimum", 0.0)),
            maximum=float(data.get("maximum", 1.0)),
            unit=data.get("unit", ""),
            integer=bool(data.get("integer", False)),
        )


@dataclass(frozen=True)
class DeviceDescriptor:
    """Static description of one device: identity, schema, defaults."""

    device_id: str
    kind: str
    display_name: str
    properties: tuple[PropertySchema, ...]
    defaults: dict[str, Any] = field(default_factory=dict)
    serial: str = ""
    segment: str = "office"
    ratings: dict[str, Any] = field(default_factory=dict)

    def schema(self, name: str) -> PropertySchema:
        for prop in self.properties:
            if prop.name == name:
                return prop
        raise UnknownPropertyError(f"{self.device_id} has no property {name!r}")

    def validate(self) -> None:
        if not self.device_id or " " in self.device_id or "." in self.device_id:
            raise SchemaError(f"invalid device id {self.device_id!r}")
        names = [p.name for p in self.properties]
        if len(set(names)) != len(names):
            raise SchemaError(f"{self.device_id}: duplicate property names")
        for prop in self.properties:
            prop.validate()
        for key in self.defaults:
            if key not in names:
                raise SchemaError(f"{self.device_id}: default for undeclared "
                                  f"property {key!r}")
        for prop in self.properties:
            if prop.name not in self.defaults:
                raise SchemaError(f"{self.device_id}: missing default for "
                                  f"property {prop.name!r}")
            if not prop.contains(self.defaults[prop.name]):
                raise SchemaError(
                    f"{self.device_id}: default {self.defaults[prop.name]!r} "
                    f"outside domain of {prop.name}"
                )

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "id": self.device_id,
            "kind": self.kind,
            "display_name": self.display_name,
            "serial": self.serial,
            "segment": self.segment,
            "properties": [p.to_json() for p in self.properties],
            "defaults": dict(self.defaults),
        }
        if self.ratings:
            out["ratings"] = self.ratings
        return out

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "DeviceDescriptor":
        return cls(
            device_id=data["id"],
            kind=data["kind"],
            display_name=data.get("display_name", data["id"]),
            properties=tuple(PropertySchema.from_json(p)
                             for p in data.get("properties", ())),
            defaults=dict(data.get("defaults", {})),
            serial=data.get("serial", ""),
            segment=data.get("segment", "office"),
            ratings=dict(data.get("ratings", {})),
        )


@dataclass(frozen=True)
class StateChange:
    """One observed write: who changed what, from what, to what, and when."""

    sim_time: float
    device_id: str
    property: str
    old_value: Any
    new_value: Any
    cause: str

    def to_json(self) -> dict[str, Any]:
        return {
            "type": "change",
            "t": self.sim_time,
            "device": self.device_id,
            "property": self.property,
            "old": self.old_value,
            "new": self.new_value,
            "cause": self.cause,
        }


@dataclass
class DeviceState:
    """Live values for one device; mutated only through apply_change."""

    device_id: str
    descriptor: DeviceDescriptor
    values: dict[str, Any]
    last_changed: dict[str, float]

    def clone(self) -> "DeviceState":
        return DeviceState(self.device_id, self.descriptor,
                           dict(self.values), dict(self.last_changed))


# A world is the full set of device states, keyed by device id.
World = dict[str, DeviceState]


def _cause_kind(cause: str) -> str:
    return cause.split(":", 1)[0]


def apply_change(state: DeviceState, prop: str, value: Any, cause: str,
                 sim_time: float) -> Optional[StateChange]:
    """Write ``value`` to ``prop``, returning the change or None for a no-op.

    Raises UnknownPropertyError, DomainError, or WritePermissionError when
    the write is not allowed; no-op writes (equal value) return None and
    leave the state untouched.
    """
    schema = state.descriptor.schema(prop)
    kind = _cause_kind(cause)
    if kind in ("rule", "command"):
        if schema.writable_by != COMMAND:
            raise WritePermissionError(
                f"{state.device_id}.{prop} is sensor-only; cannot be set by {kind}"
            )
    elif kind == CAUSE_ENVIRONMENT:
        if schema.writable_by != SENSOR:
            raise WritePermissionError(
                f"{state.device_id}.{prop} is operator-facing; the environment "
                f"cannot set it"
            )
    elif kind != CAUSE_INIT:
        raise ValueError(f"unknown cause {cause!r}")
    if not schema.contains(value):
        raise DomainError(
            f"{state.device_id}.{prop}: value {value!r} outside domain"
        )
    current = state.values[prop]
    if current == value and type(current) is type(value):
        return None
    change = StateChange(sim_time, state.device_id, prop, current, value, cause)
    state.values[prop] = value
    state.last_changed[prop] = sim_time
    return change


def instantiate(descriptor: DeviceDescriptor, sim_time: float = 0.0) -> DeviceState:
    """Create a fresh DeviceState with every property at its default."""
    descriptor.validate()
    values = {p.name: descriptor.defaults[p.name] for p in descriptor.properties}
    stamps = {p.name: sim_time for p in descriptor.properties}
    return DeviceState(descriptor.device_id, descriptor, values, stamps)


class Catalog:
    """An ordered, id-unique collection of device descriptors."""

    def __init__(self, descriptors: list[DeviceDescriptor]):
        seen: set[str] = set()
        for d in descriptors:
            d.validate()
            if d.device_id in seen:
                raise SchemaError(f"duplicate device id {d.device_id!r}")
            seen.add(d.device_id)
        self.descriptors = list(descriptors)
        self._by_id = {d.device_id: d for d in descriptors}

    def __iter__(self) -> Iterator[DeviceDescriptor]:
        return iter(self.descriptors)

    def __len__(self) -> int:
        return len(self.descriptors)

    def __contains__(self, device_id: str) -> bool:
        return device_id in self._by_id

    def get(self, device_id: str) -> DeviceDescriptor:
        try:
            return self._by_id[device_id]
        except KeyError:
            raise UnknownDeviceError(f"no device {device_id!r} in catalog") from None

    def kinds(self) -> dict[str, str]:
        return {d.device_id: d.kind for d in self.descriptors}

    def instantiate_all(self, sim_time: float = 0.0) -> World:
        return {d.device_id: instantiate(d, sim_time) for d in self.descriptors}

    def to_json(self) -> dict[str, Any]:
        return {"devices": [d.to_json() for d in self.descriptors]}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Catalog":
        return cls([DeviceDescriptor.from_json(d) for d in data.get("devices", ())])

    @classmethod
    def load(cls, path: str) -> "Catalog":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def _bool(name: str, writable: str = COMMAND) -> PropertySchema:
    return PropertySchema(name, BOOLEAN, writable)


def _enum(name: str, values: tuple[str, ...], writable: str = COMMAND) -> PropertySchema:
    return PropertySchema(name, ENUM, writable, values=values)


def _num(name: str, lo: float, hi: float, unit: str = "", writable: str = SENSOR,
         integer: bool = False) -> PropertySchema:
    return PropertySchema(name, NUMBER, writable, minimum=lo, maximum=hi,
                          unit=unit, integer=integer)


def _device(device_id: str, kind: str, serial: str, props: tuple[PropertySchema, ...],
            defaults: dict[str, Any], segment: str = "office",
            ratings: Optional[dict[str, Any]] = None) -> DeviceDescriptor:
    display = f"{device_id} ({serial}-)" if serial else device_id
    return DeviceDescriptor(device_id, kind, display, props, defaults,
                            serial=serial, segment=segment, ratings=ratings or {})


def builtin_catalog() -> Catalog:
    """The shipped office: display-list devices plus the automation targets."""
    watts = lambda prop, mapping: {"property": prop, "draw_watts": mapping}
    devices = [
        _device("Fan", "Ceiling Fan", "PTT0810921C",
                (_enum("Status", ("Off", "Low", "High")),),
                {"Status": "Off"},
                ratings=watts("Status", {"Low": 60.0, "High": 60.0})),
        _device("AC", "AC", "PTT0810NGX2",
                (_bool("On"),), {"On": False},
                ratings=watts("On", {"true": 1500.0})),
        _device("Window", "Window", "PTT08109JCO",
                (_bool("On"),), {"On": False}),
        _device("MotionDetector", "Motion Detector", "PTT0810N260",
                (_bool("On", SENSOR),), {"On": False}),
        _device("Siren", "Siren", "PTT08107G8Q",
                (_bool("On"),), {"On": False},
                ratings=watts("On", {"true": 5.0})),
        _device("SmokeDetector", "Smoke Detector", "PTT08109WB5",
                (_num("Level", 0.0, 1.0),), {"Level": 0.0}),
        _device("RFIDReader", "RFID Reader", "PTT08101516",
                (_num("CardID", 0, 999999, writable=SENSOR, integer=True),
                 _enum("Status", ("Valid", "Invalid"))),
                {"CardID": 0, "Status": "Invalid"}),
        _device("Door", "Door", "PTT0810S959",
                (_enum("Lock", ("Lock", "Unlock")),), {"Lock": "Lock"}),
        _device("Light", "Light", "PTT08102ZTN",
                (_bool("On"),), {"On": False},
                ratings=watts("On", {"true": 10.0})),
        _device("GarageDoor", "Garage Door", "PTT0810DL02",
                (_bool("On"),), {"On": False}, segment="exterior"),
        _device("Humidifier", "Humidifier", "PTT08103T95",
                (_bool("On"),), {"On": False},
                ratings=watts("On", {"true": 30.0})),
        _device("CO2Monitor", "Carbon Monoxide Detector", "PTT08104648",
                (_num("Level", 0.0, 5000.0, "ppm"),), {"Level": 400.0}),
        _device("HumidityMonitor", "Humidity Sensor", "PTT0810K6SJ",
                (_num("Level", 0.0, 100.0, "%"),), {"Level": 50.0}),
        _device("Speaker", "Home Speaker", "PTT0810NK46",
                (_bool("On"),), {"On": False},
                ratings=watts("On", {"true": 15.0})),
        _device("SolarPanel", "Solar", "PTT08102UU3",
                (_num("Output", 0.0, 100000.0, "W"),), {"Output": 0.0},
                segment="exterior",
                ratings={"generation_property": "Output", "rated_watts": 300.0}),
        _device("StreetLamp", "Street Lamp", "PTT0810L33P",
                (_bool("On"),), {"On": False}, segment="exterior",
                ratings=watts("On", {"true": 50.0})),
        _device("Webcam", "Webcam", "PTT0810WC01",
                (_bool("On"),), {"On": False},
                ratings=watts("On", {"true": 4.0})),
        _device("FireMonitor", "Fire Monitor", "PTT0810FM02",
                (_bool("FireDetected", SENSOR),), {"FireDetected": False}),
        _device("FireSprinkler", "Fire Sprinkler", "PTT0810FS03",
                (_bool("Status"),), {"Status": False},
                ratings={"property": "Status", "draw_watts": {"true": 20.0},
                         "flow_lpm": {"true": 20.0}}),
        _device("Blower", "Blower", "PTT0810BL04",
                (_enum("Status", ("Off", "Low", "High")),), {"Status": "Off"},
                ratings=watts("Status", {"Low": 200.0, "High": 200.0})),
        _device("WindDetector", "Wind Detector", "PTT0810WD05",
                (_num("Speed", 0.0, 100.0, "m/s"),), {"Speed": 0.0},
                segment="exterior"),
        _device("WaterDrain", "Water Drain", "PTT0810DR06",
                (_bool("Status"),), {"Status": False}),
        _device("OccupancySensor", "Occupancy Sensor", "PTT0810OC07",
                (_num("Count", 0, 1000, writable=SENSOR, integer=True),),
                {"Count": 0}),
    ]
    return Catalog(devices)


def load_default_catalog() -> Catalog:
    """Catalog from the packaged data file; identical to builtin_catalog()."""
    text = resources.files("officetwin.data").joinpath("catalog.json").read_text("utf-8")
    return Catalog.from_json(json.loads(text))

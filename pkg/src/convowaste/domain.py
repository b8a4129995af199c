"""Waste taxonomy, servo routing, bin model and machine configuration.

Everything in here is a plain value type: safe to share read-only, no
interior mutation.  Units are part of the field names (feet for belt
geometry, meters for bin geometry) and are never converted implicitly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping


class ConfigError(ValueError):
    """Raised for invalid machine configuration or config files."""


class WasteClass(Enum):
    """The six waste categories, in wire-code order (0x01..0x06)."""

    PLASTIC = 1
    METAL = 2
    GLASS = 3
    ORGANIC = 4
    MEDICAL = 5
    EWASTE = 6

    @property
    def code(self) -> int:
        """Stable one-byte wire code."""
        return self.value

    @property
    def key(self) -> str:
        """Lowercase identifier used in config, scenario and trace files."""
        return self.name.lower()

    @property
    def label(self) -> str:
        """Human-readable name used in reports."""
        return _LABELS[self]

    @classmethod
    def from_code(cls, code: int) -> "WasteClass":
        return cls(code)

    @classmethod
    def from_key(cls, key: str) -> "WasteClass":
        try:
            return cls[key.upper()]
        except KeyError:
            raise ValueError(f"unknown waste class {key!r}") from None


_LABELS = {
    WasteClass.PLASTIC: "Plastic",
    WasteClass.METAL: "Metal",
    WasteClass.GLASS: "Glass",
    WasteClass.ORGANIC: "Organic",
    WasteClass.MEDICAL: "Medical waste",
    WasteClass.EWASTE: "E-waste",
}

ALL_CLASSES: tuple[WasteClass, ...] = tuple(WasteClass)


class Direction(Enum):
    """Servo swing direction."""

    CW = "CW"
    CCW = "CCW"


@dataclass(frozen=True)
class ClassProfile:
    """Behavioral parameters of one waste class: how often the machine
    classifies it correctly and how long detection takes."""

    waste_class: WasteClass
    accuracy: float
    detection_latency_s: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy must be in [0,1], got {self.accuracy}")
        if self.detection_latency_s <= 0:
            raise ValueError("detection latency must be positive")


# Measured behavior of the production model on 50 test images per class:
# (correctly classified out of 50, detection seconds).  Accuracy is stored
# as classified/50 exactly, never re-rounded.
_MEASURED = {
    WasteClass.PLASTIC: (47, 3.0),
    WasteClass.METAL: (47, 5.0),
    WasteClass.GLASS: (45, 6.0),
    WasteClass.ORGANIC: (48, 6.0),
    WasteClass.MEDICAL: (46, 4.0),
    WasteClass.EWASTE: (44, 9.0),
}


def default_class_profiles() -> list[ClassProfile]:
    """Per-class accuracy and detection latency of the reference model,
    one entry per class in wire-code order."""
    return [
        ClassProfile(c, classified / 50, latency)
        for c, (classified, latency) in _MEASURED.items()
    ]


def profiles_by_class(
    profiles: Iterable[ClassProfile] | None = None,
) -> dict[WasteClass, ClassProfile]:
    """Index profiles by class, validating totality."""
    table = {p.waste_class: p for p in (profiles or default_class_profiles())}
    missing = [c.key for c in ALL_CLASSES if c not in table]
    if missing:
        raise ValueError(f"profiles missing classes: {missing}")
    return table


@dataclass(frozen=True)
class ServoCommand:
    """One of the six (servo, direction) gate actions."""

    servo_id: int
    direction: Direction

    def __post_init__(self) -> None:
        if self.servo_id not in (1, 2, 3):
            raise ValueError(f"servo_id must be 1..3, got {self.servo_id}")


@dataclass(frozen=True)
class RoutingTable:
    """Bijection from waste class through (servo, direction) to bin index.

    The plastic and metal rows are fixed by the machine design (servo 1
    clockwise / anticlockwise); the remaining rows default to the same
    servo-pair pattern in class order but are configurable.
    """

    to_command: Mapping[WasteClass, ServoCommand]
    to_bin: Mapping[ServoCommand, int]

    def command_for(self, waste_class: WasteClass) -> ServoCommand:
        return self.to_command[waste_class]

    def bin_for(self, waste_class: WasteClass) -> int:
        return self.to_bin[self.to_command[waste_class]]

    def class_to_bin(self) -> dict[WasteClass, int]:
        return {c: self.bin_for(c) for c in self.to_command}


def default_routing_table() -> RoutingTable:
    """Servo 1 handles plastic/metal, servo 2 glass/organic, servo 3
    medical/e-waste; clockwise swing goes to the odd bin of each pair."""
    to_command = {}
    to_bin = {}
    for i, waste_class in enumerate(ALL_CLASSES):
        cmd = ServoCommand(i // 2 + 1, Direction.CW if i % 2 == 0 else Direction.CCW)
        to_command[waste_class] = cmd
        to_bin[cmd] = i + 1
    return RoutingTable(to_command, to_bin)


def route_for(
    waste_class: WasteClass, table: RoutingTable | None = None
) -> tuple[ServoCommand, int]:
    """The servo command that deflects `waste_class` and the bin it lands in."""
    table = table or default_routing_table()
    cmd = table.command_for(waste_class)
    return cmd, table.to_bin[cmd]


def validate_routing_table(table: RoutingTable) -> list[str]:
    """Check both mappings are total bijections and the fixed plastic/metal
    anchors hold.  Returns a list of violations; empty means the table is ok.
    """
    violations = []
    missing = [c.key for c in ALL_CLASSES if c not in table.to_command]
    if missing:
        violations.append(f"missing class: {', '.join(missing)}")
    commands = list(table.to_command.values())
    if len(set(commands)) != len(commands):
        violations.append("duplicate command: two classes share a (servo, direction)")
    unmapped = [cmd for cmd in commands if cmd not in table.to_bin]
    if unmapped:
        violations.append(f"command without bin: {unmapped}")
    bins = [table.to_bin[c] for c in commands if c in table.to_bin]
    if len(set(bins)) != len(bins):
        violations.append("duplicate bin: two commands deflect into the same bin")
    bad = [b for b in bins if not 1 <= b <= 6]
    if bad:
        violations.append(f"bin index out of range 1..6: {bad}")
    for anchor, expect in (
        (WasteClass.PLASTIC, ServoCommand(1, Direction.CW)),
        (WasteClass.METAL, ServoCommand(1, Direction.CCW)),
    ):
        got = table.to_command.get(anchor)
        if got is not None and got != expect:
            violations.append(
                f"anchor mismatch: {anchor.key} must map to "
                f"(servo {expect.servo_id}, {expect.direction.value}), got "
                f"(servo {got.servo_id}, {got.direction.value})"
            )
    return violations


@dataclass
class BinState:
    """One collection bin, with its simulated ultrasonic fill reading.

    The sensor sits at the rim and measures down to the waste surface, so
    measured distance shrinks as items stack up:
    ``measured_distance = max(0, depth - item_count * fill_per_item)``.
    """

    bin_index: int
    item_count: int = 0
    depth_m: float = 0.5
    fill_per_item_m: float = 0.05
    threshold_percent: float = 80.0

    def __post_init__(self) -> None:
        if not 1 <= self.bin_index <= 6:
            raise ValueError(f"bin_index must be 1..6, got {self.bin_index}")
        if self.item_count < 0:
            raise ValueError("item_count must be non-negative")

    @property
    def measured_distance_m(self) -> float:
        return max(0.0, self.depth_m - self.item_count * self.fill_per_item_m)

    @property
    def measured_distance_mm(self) -> int:
        return round(self.measured_distance_m * 1000)


def bin_level_percent(bin_state: BinState) -> float:
    """Fill level as a percentage of bin depth, clamped to [0, 100]."""
    if bin_state.depth_m <= 0:
        raise ConfigError(f"invalid-geometry: bin depth must be positive, got {bin_state.depth_m}")
    level = 100.0 * (1.0 - bin_state.measured_distance_m / bin_state.depth_m)
    return min(100.0, max(0.0, level))


def level_percent_from_distance(distance_m: float, depth_m: float) -> float:
    """Same formula applied to a raw ultrasonic reading."""
    if depth_m <= 0:
        raise ConfigError("invalid-geometry: bin depth must be positive")
    return min(100.0, max(0.0, 100.0 * (1.0 - distance_m / depth_m)))


@dataclass(frozen=True)
class MachineConfig:
    """Simulation geometry, timing constants and channel parameters.

    Belt geometry is in feet, bin geometry in meters (the two never mix).
    Every field is overridable through the JSON config file and through
    ``--set key=value`` CLI flags; `load_config` documents the schema.
    """

    belt_length_ft: float = 10.0
    belt_speed_ftps: float = 0.5
    capture_delay_s: float = 10.0
    camera_station_ft: float = 2.0
    servo_stations_ft: tuple[float, float, float] = (4.0, 6.0, 8.0)
    servo_actuation_s: float = 1.0
    item_arrival_spacing_s: float = 1.0
    bin_depth_m: float = 0.5
    bin_fill_per_item_m: float = 0.05
    threshold_percent: float = 80.0
    level_sample_period_s: float = 1.0
    machine_id: str = "M1"
    epoch_unix_s: int = 0
    latency_includes_pause: bool = False
    adapter_timeout_s: float = 2.0
    confidence_peak: float = 0.9
    gsm_success_probability: float = 1.0
    gsm_max_attempts: int = 3
    gsm_retry_backoff_s: float = 5.0
    routing: RoutingTable = field(default_factory=default_routing_table)
    confusion: Mapping[str, Mapping[str, float]] | None = None

    def validate(self) -> None:
        """Raise ConfigError on any geometry or parameter violation."""
        s1, s2, s3 = self.servo_stations_ft
        if not 0 < self.camera_station_ft < s1 < s2 < s3 < self.belt_length_ft:
            raise ConfigError(
                "invalid-config: require 0 < camera < servo1 < servo2 < servo3 "
                f"< belt length, got camera={self.camera_station_ft}, "
                f"servos={self.servo_stations_ft}, length={self.belt_length_ft}"
            )
        if self.belt_speed_ftps <= 0:
            raise ConfigError("invalid-config: belt_speed_ftps must be positive")
        if self.capture_delay_s < 0:
            raise ConfigError("invalid-config: capture_delay_s must be >= 0")
        if self.servo_actuation_s < 0:
            raise ConfigError("invalid-config: servo_actuation_s must be >= 0")
        if self.bin_depth_m <= 0 or self.bin_fill_per_item_m <= 0:
            raise ConfigError("invalid-config: bin geometry must be positive")
        if not 0 <= self.threshold_percent <= 100:
            raise ConfigError("invalid-config: threshold_percent must be in [0,100]")
        if self.level_sample_period_s <= 0:
            raise ConfigError("invalid-config: level_sample_period_s must be positive")
        if not 0 <= self.gsm_success_probability <= 1:
            raise ConfigError("invalid-config: gsm_success_probability must be in [0,1]")
        if self.gsm_max_attempts < 1:
            raise ConfigError("invalid-config: gsm_max_attempts must be >= 1")
        violations = validate_routing_table(self.routing)
        if violations:
            raise ConfigError("invalid-config: routing: " + "; ".join(violations))

    def make_bin(self, bin_index: int, item_count: int = 0) -> BinState:
        return BinState(
            bin_index,
            item_count,
            depth_m=self.bin_depth_m,
            fill_per_item_m=self.bin_fill_per_item_m,
            threshold_percent=self.threshold_percent,
        )

    def to_canonical_dict(self) -> dict:
        """Stable plain-data form used for fingerprinting and file output."""
        out: dict = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "routing":
                out["routing"] = {
                    c.key: {
                        "servo": value.to_command[c].servo_id,
                        "direction": value.to_command[c].direction.value,
                        "bin": value.bin_for(c),
                    }
                    for c in ALL_CLASSES
                }
            elif f.name == "servo_stations_ft":
                out[f.name] = list(value)
            elif f.name == "confusion":
                out[f.name] = None if value is None else {k: dict(v) for k, v in value.items()}
            else:
                out[f.name] = value
        return out

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_canonical_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _routing_rows(spec: Mapping[str, Mapping]) -> dict[WasteClass, tuple[ServoCommand, int]]:
    rows: dict[WasteClass, tuple[ServoCommand, int]] = {}
    for key, row in spec.items():
        waste_class = WasteClass.from_key(key)
        try:
            cmd = ServoCommand(int(row["servo"]), Direction(row["direction"]))
            bin_index = int(row["bin"])
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"invalid-config: routing[{key}]: {exc}") from exc
        rows[waste_class] = (cmd, bin_index)
    return rows


def config_from_dict(raw: Mapping) -> MachineConfig:
    """Build and validate a MachineConfig from decoded JSON."""
    known = {f.name for f in fields(MachineConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"invalid-config: unknown keys {sorted(unknown)}")
    kwargs = dict(raw)
    if "servo_stations_ft" in kwargs:
        stations = kwargs["servo_stations_ft"]
        if len(stations) != 3:
            raise ConfigError("invalid-config: servo_stations_ft needs exactly 3 entries")
        kwargs["servo_stations_ft"] = tuple(float(x) for x in stations)
    if "routing" in kwargs:
        base = default_routing_table()
        commands = dict(base.to_command)
        class_bins = {c: base.bin_for(c) for c in ALL_CLASSES}
        for c, (cmd, bin_index) in _routing_rows(kwargs["routing"]).items():
            commands[c] = cmd
            class_bins[c] = bin_index
        # Rebuilding command->bin per class keeps swaps consistent; genuine
        # conflicts collapse here and validate() reports them.
        kwargs["routing"] = RoutingTable(
            commands, {commands[c]: class_bins[c] for c in commands}
        )
    config = MachineConfig(**kwargs)
    config.validate()
    return config


def load_config(path: str | Path) -> MachineConfig:
    """Load the machine config file (JSON object, keys = MachineConfig fields).

    Example::

        {
          "belt_speed_ftps": 0.5,
          "servo_stations_ft": [4, 6, 8],
          "threshold_percent": 80,
          "routing": {"glass": {"servo": 2, "direction": "CW", "bin": 3}},
          "confusion": {"plastic": {"plastic": 0.94, "metal": 0.02, ...}}
        }

    Missing keys fall back to the built-in defaults.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must contain a JSON object")
    return config_from_dict(raw)


def apply_overrides(config: MachineConfig, overrides: Iterable[str]) -> MachineConfig:
    """Apply ``key=value`` overrides (the CLI `--set` flag).  Values are
    parsed as JSON where possible, else taken as strings."""
    updates: dict = {}
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"invalid override {item!r}, expected key=value")
        try:
            updates[key] = json.loads(value)
        except json.JSONDecodeError:
            updates[key] = value
    merged = config.to_canonical_dict()
    for key, value in updates.items():
        if key not in merged:
            raise ConfigError(f"invalid-config: unknown key {key!r}")
        merged[key] = value
    return config_from_dict(merged)

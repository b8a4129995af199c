"""Event trace format, metrics, and trace replay.

A trace is newline-delimited JSON.  The first record is a header::

    {"v": 1, "kind": "TraceHeader", "rng": "mt19937", "seed": 7,
     "machine_id": "M1", "classifier": "stochastic",
     "routing": {"plastic": 1, ...}, "config_sha256": "..."}

Every following record is one simulation event with a canonical field
order (`t` in integer microseconds, then `seq`, then `kind`, then the
kind-specific attributes in a fixed order).  Serialization is compact
(no spaces) so identical runs produce byte-identical files.

`replay` recomputes the run metrics from a trace alone; by construction
it must agree exactly with the metrics the live engine reported, which
is the cross-check the test suite leans on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator

from .domain import ALL_CLASSES, WasteClass

TRACE_VERSION = 1

# Event kinds, in lifecycle order for reference.
ITEM_ARRIVED = "ItemArrived"
PRESENCE_DETECTED = "PresenceDetected"
BELT_PAUSED = "BeltPaused"
IMAGE_CAPTURED = "ImageCaptured"
CLASSIFIED = "Classified"
BELT_RESUMED = "BeltResumed"
SERVO_FIRED = "ServoFired"
ITEM_BINNED = "ItemBinned"
ITEM_REJECTED = "ItemRejected"
LEVEL_SAMPLE = "LevelSample"
NOTIFICATION_SENT = "NotificationSent"
OPERATOR_COMMAND = "OperatorCommand"

# Canonical attribute order per kind.  Fields marked optional may be
# absent (e.g. an operator pause has no item), but present fields always
# appear in this order.
ATTR_ORDER: dict[str, tuple[str, ...]] = {
    ITEM_ARRIVED: ("item", "true"),
    PRESENCE_DETECTED: ("item",),
    BELT_PAUSED: ("reason", "item"),
    IMAGE_CAPTURED: ("item", "image"),
    CLASSIFIED: ("item", "predicted", "true", "latency_us", "conf"),
    BELT_RESUMED: ("reason",),
    SERVO_FIRED: ("item", "servo", "direction"),
    ITEM_BINNED: ("item", "bin", "predicted", "true"),
    ITEM_REJECTED: ("item", "true", "reason"),
    LEVEL_SAMPLE: ("bin", "distance_mm", "count"),
    NOTIFICATION_SENT: ("notif", "bin", "level_pct", "attempt", "outcome"),
    OPERATOR_COMMAND: ("command", "bin", "client"),
}


class MalformedTrace(ValueError):
    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


@dataclass(frozen=True)
class SimEvent:
    t_us: int
    seq: int
    kind: str
    attrs: dict

    def to_record(self) -> dict:
        record = {"t": self.t_us, "seq": self.seq, "kind": self.kind}
        order = ATTR_ORDER.get(self.kind, tuple(sorted(self.attrs)))
        for name in order:
            if name in self.attrs:
                record[name] = self.attrs[name]
        return record

    def to_json_line(self) -> str:
        return json.dumps(self.to_record(), separators=(",", ":"))


def event_from_record(record: dict, line_no: int = 0) -> SimEvent:
    try:
        t_us, seq, kind = record["t"], record["seq"], record["kind"]
    except KeyError as missing:
        raise MalformedTrace(line_no, f"event record missing {missing}") from None
    if not isinstance(t_us, int) or not isinstance(seq, int):
        raise MalformedTrace(line_no, "t and seq must be integers")
    if kind not in ATTR_ORDER:
        raise MalformedTrace(line_no, f"unknown event kind {kind!r}")
    attrs = {k: v for k, v in record.items() if k not in ("t", "seq", "kind")}
    return SimEvent(t_us, seq, kind, attrs)


def write_trace(fp: IO[str], header: dict, events: Iterable[SimEvent]) -> None:
    fp.write(json.dumps(header, separators=(",", ":")) + "\n")
    for event in events:
        fp.write(event.to_json_line() + "\n")


def write_trace_file(path: str | Path, header: dict, events: Iterable[SimEvent]) -> None:
    with open(path, "w", encoding="ascii") as fp:
        write_trace(fp, header, events)


def read_trace(fp: IO[str]) -> tuple[dict, list[SimEvent]]:
    """Parse and validate a trace stream; raises MalformedTrace."""
    header: dict | None = None
    events: list[SimEvent] = []
    prev_t = -1
    prev_seq = -1
    for line_no, line in enumerate(fp, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as err:
            raise MalformedTrace(line_no, f"invalid JSON ({err.msg})") from None
        if not isinstance(record, dict):
            raise MalformedTrace(line_no, "record is not an object")
        if header is None:
            if record.get("kind") != "TraceHeader":
                raise MalformedTrace(line_no, "first record must be a TraceHeader")
            if record.get("v") != TRACE_VERSION:
                raise MalformedTrace(line_no, f"unsupported trace version {record.get('v')!r}")
            header = record
            continue
        event = event_from_record(record, line_no)
        if event.t_us < prev_t:
            raise MalformedTrace(line_no, f"time went backwards ({event.t_us} < {prev_t})")
        if event.seq != prev_seq + 1:
            raise MalformedTrace(line_no, f"seq {event.seq} not contiguous after {prev_seq}")
        prev_t, prev_seq = event.t_us, event.seq
        events.append(event)
    if header is None:
        raise MalformedTrace(0, "empty trace")
    return header, events


def read_trace_file(path: str | Path) -> tuple[dict, list[SimEvent]]:
    with open(path, "r", encoding="ascii") as fp:
        return read_trace(fp)


# -- metrics -------------------------------------------------------------


@dataclass(frozen=True)
class ClassMetrics:
    presented: int
    correctly_binned: int
    mean_latency_s: float

    @property
    def accuracy_percent(self) -> float:
        if self.presented == 0:
            return 0.0
        return 100.0 * self.correctly_binned / self.presented


@dataclass(frozen=True)
class SimMetrics:
    per_class: dict[WasteClass, ClassMetrics]
    binned_total: int
    rejected_total: int
    presented_total: int
    mean_cycle_time_s: float
    throughput_per_hour: float
    duration_s: float

    def to_dict(self) -> dict:
        return {
            "per_class": {
                c.key: {
                    "presented": m.presented,
                    "correctly_binned": m.correctly_binned,
                    "accuracy_percent": round(m.accuracy_percent, 4),
                    "mean_latency_s": round(m.mean_latency_s, 6),
                }
                for c, m in self.per_class.items()
            },
            "binned_total": self.binned_total,
            "rejected_total": self.rejected_total,
            "presented_total": self.presented_total,
            "mean_cycle_time_s": round(self.mean_cycle_time_s, 6),
            "throughput_per_hour": round(self.throughput_per_hour, 4),
            "duration_s": round(self.duration_s, 6),
        }

    def format_table(self) -> str:
        rows = [
            f"{'Categories':<14s} {'Test Images':>11s} {'Classified':>10s} "
            f"{'Accuracy (%)':>12s} {'Time (Sec)':>10s}"
        ]
        for c in ALL_CLASSES:
            m = self.per_class[c]
            rows.append(
                f"{c.label:<14s} {m.presented:>11d} {m.correctly_binned:>10d} "
                f"{m.accuracy_percent:>12.2f} {m.mean_latency_s:>10.2f}"
            )
        rows.append(
            f"total binned {self.binned_total}, rejected {self.rejected_total}, "
            f"mean cycle {self.mean_cycle_time_s:.2f} s, "
            f"throughput {self.throughput_per_hour:.1f} items/h"
        )
        return "\n".join(rows)


@dataclass
class MetricsBuilder:
    """Incremental aggregation used identically by the live engine and by
    trace replay, so both report the same numbers down to the bit."""

    presented: dict[WasteClass, int] = field(
        default_factory=lambda: {c: 0 for c in ALL_CLASSES}
    )
    correct: dict[WasteClass, int] = field(default_factory=lambda: {c: 0 for c in ALL_CLASSES})
    latency_sum_us: dict[WasteClass, int] = field(
        default_factory=lambda: {c: 0 for c in ALL_CLASSES}
    )
    latency_n: dict[WasteClass, int] = field(default_factory=lambda: {c: 0 for c in ALL_CLASSES})
    binned: int = 0
    rejected: int = 0
    cycle_sum_us: int = 0
    arrivals_us: dict[int, int] = field(default_factory=dict)

    def add_arrival(self, item: int, true_class: WasteClass, t_us: int) -> None:
        self.presented[true_class] += 1
        self.arrivals_us[item] = t_us

    def add_classified(self, true_class: WasteClass, latency_us: int) -> None:
        self.latency_sum_us[true_class] += latency_us
        self.latency_n[true_class] += 1

    def add_binned(self, item: int, true_class: WasteClass, predicted: WasteClass, t_us: int) -> None:
        self.binned += 1
        if predicted is true_class:
            self.correct[true_class] += 1
        self.cycle_sum_us += t_us - self.arrivals_us[item]

    def add_rejected(self) -> None:
        self.rejected += 1

    def finalize(self, duration_us: int) -> SimMetrics:
        per_class = {}
        for c in ALL_CLASSES:
            n = self.latency_n[c]
            mean_latency = (self.latency_sum_us[c] / n) / 1e6 if n else 0.0
            per_class[c] = ClassMetrics(self.presented[c], self.correct[c], mean_latency)
        duration_s = duration_us / 1e6
        mean_cycle = (self.cycle_sum_us / self.binned) / 1e6 if self.binned else 0.0
        throughput = self.binned / duration_s * 3600.0 if duration_s > 0 else 0.0
        return SimMetrics(
            per_class=per_class,
            binned_total=self.binned,
            rejected_total=self.rejected,
            presented_total=sum(self.presented.values()),
            mean_cycle_time_s=mean_cycle,
            throughput_per_hour=throughput,
            duration_s=duration_s,
        )


def _routing_from_header(header: dict, line_no: int = 1) -> dict[str, int]:
    routing = header.get("routing")
    if not isinstance(routing, dict):
        raise MalformedTrace(line_no, "header routing table missing")
    return routing


def replay(header: dict, events: Iterable[SimEvent]) -> SimMetrics:
    """Recompute metrics from trace records, validating consistency.

    An ItemBinned whose bin disagrees with the header routing table for
    its predicted class marks the trace as malformed.
    """
    routing = _routing_from_header(header)
    builder = MetricsBuilder()
    last_t = 0
    for event in events:
        last_t = event.t_us
        a = event.attrs
        try:
            if event.kind == ITEM_ARRIVED:
                builder.add_arrival(a["item"], WasteClass.from_key(a["true"]), event.t_us)
            elif event.kind == CLASSIFIED:
                builder.add_classified(WasteClass.from_key(a["true"]), a["latency_us"])
            elif event.kind == ITEM_BINNED:
                predicted = WasteClass.from_key(a["predicted"])
                expected_bin = routing.get(predicted.key)
                if a["bin"] != expected_bin:
                    raise MalformedTrace(
                        0,
                        f"item {a['item']} binned to {a['bin']} but routing sends "
                        f"{predicted.key} to {expected_bin}",
                    )
                builder.add_binned(a["item"], WasteClass.from_key(a["true"]), predicted, event.t_us)
            elif event.kind == ITEM_REJECTED:
                builder.add_rejected()
        except (KeyError, ValueError) as err:
            if isinstance(err, MalformedTrace):
                raise
            raise MalformedTrace(0, f"bad {event.kind} record at seq {event.seq}: {err}") from None
    return builder.finalize(last_t)


def replay_file(path: str | Path) -> SimMetrics:
    header, events = read_trace_file(path)
    return replay(header, events)


def iter_trace_records(path: str | Path) -> Iterator[dict]:
    """Raw record iterator for tools that stream a trace without
    validating the whole file first."""
    with open(path, "r", encoding="ascii") as fp:
        for line in fp:
            line = line.strip()
            if line:
                yield json.loads(line)

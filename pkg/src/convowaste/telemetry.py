"""Bin fill monitoring, SMS-style notifications, and the front display.

Threshold detection is edge triggered: a notification fires when a bin's
level crosses the threshold from below, then stays quiet until the level
drops back under the threshold (a dump) and crosses again.  Delivery
goes through a modeled GSM channel that fails with a configurable
probability; failures retry with a fixed backoff up to a maximum number
of attempts.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Mapping, Sequence

from .domain import BinState, WasteClass, bin_level_percent

SMS_MAX_LEN = 160

_SMS_RE = re.compile(
    r"^CONVOWASTE (?P<machine>\S+) BIN (?P<bin>[1-6]) FULL (?P<level>\d{1,3})% "
    r"AT (?P<time>\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z)$"
)


class DeliveryState(Enum):
    QUEUED = "queued"
    SENT = "sent"
    RETRYING = "retrying"
    FAILED = "failed"


@dataclass
class Notification:
    notif_id: int
    bin_index: int
    level_percent: float
    sim_time_us: int
    delivery_state: DeliveryState = DeliveryState.QUEUED
    attempts: int = 0


def crossings(
    previous: Mapping[int, float], current: Mapping[int, float], threshold: float
) -> list[int]:
    """Bins whose level moved from below the threshold to at-or-above it."""
    hit = []
    for bin_index in sorted(current):
        prev = previous.get(bin_index, 0.0)
        if prev < threshold <= current[bin_index]:
            hit.append(bin_index)
    return hit


def check_thresholds(
    bins: Sequence[BinState],
    previous_levels: Mapping[int, float],
    sim_time_us: int = 0,
    next_id: int = 1,
) -> tuple[list[Notification], dict[int, float]]:
    """One monitoring pass over bin states.

    Returns the notifications triggered by this pass and the new level
    map to carry into the next pass.  Already-over-threshold bins stay
    silent until their level falls below the threshold and rises again.
    """
    levels = {b.bin_index: bin_level_percent(b) for b in bins}
    notifications = []
    for bin_index in crossings(previous_levels, levels, bins[0].threshold_percent if bins else 0):
        notifications.append(
            Notification(next_id, bin_index, levels[bin_index], sim_time_us)
        )
        next_id += 1
    return notifications, levels


class ThresholdMonitor:
    """Stateful wrapper around `crossings` that assigns notification ids."""

    def __init__(self, threshold_percent: float):
        self.threshold_percent = threshold_percent
        self.levels: dict[int, float] = {}
        self._next_id = 1

    def observe(self, levels: Mapping[int, float], sim_time_us: int) -> list[Notification]:
        out = []
        for bin_index in crossings(self.levels, levels, self.threshold_percent):
            out.append(Notification(self._next_id, bin_index, levels[bin_index], sim_time_us))
            self._next_id += 1
        self.levels = dict(levels)
        return out


def sim_time_iso(sim_time_us: int, epoch_unix_s: int = 0) -> str:
    ts = epoch_unix_s + sim_time_us // 1_000_000
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def format_sms(notification: Notification, machine_id: str, epoch_unix_s: int = 0) -> str:
    """Render the alert text.  Always ASCII and at most 160 characters."""
    text = (
        f"CONVOWASTE {machine_id} BIN {notification.bin_index} "
        f"FULL {round(notification.level_percent)}% "
        f"AT {sim_time_iso(notification.sim_time_us, epoch_unix_s)}"
    )
    text.encode("ascii")
    if len(text) > SMS_MAX_LEN:
        raise ValueError(f"sms exceeds {SMS_MAX_LEN} chars (machine id too long?)")
    return text


def parse_sms(text: str) -> tuple[str, int, int, str]:
    """Inverse of `format_sms`: (machine_id, bin_index, level_percent, iso_time)."""
    match = _SMS_RE.match(text)
    if not match:
        raise ValueError(f"not a bin-full alert: {text!r}")
    return (
        match.group("machine"),
        int(match.group("bin")),
        int(match.group("level")),
        match.group("time"),
    )


class ChannelClosed(RuntimeError):
    pass


class GsmChannel:
    """Fake modem link: each send succeeds with probability p.

    With p == 1.0 the RNG is never consulted, so fully reliable runs do
    not burn random draws.
    """

    def __init__(self, success_probability: float = 1.0, seed: int = 0):
        if not 0 <= success_probability <= 1:
            raise ValueError("success probability must be in [0, 1]")
        self.success_probability = success_probability
        self._rng = random.Random(seed)
        self.closed = False
        self.sends = 0

    def send(self) -> bool:
        if self.closed:
            raise ChannelClosed("gsm channel is closed")
        self.sends += 1
        if self.success_probability >= 1.0:
            return True
        return self._rng.random() < self.success_probability

    def close(self) -> None:
        self.closed = True


def gsm_send(
    notification: Notification, channel: GsmChannel, max_attempts: int = 3
) -> Notification:
    """Synchronous delivery loop: try up to `max_attempts` times.

    Mutates and returns the notification with its final delivery state
    and the number of attempts actually made.
    """
    for attempt in range(1, max_attempts + 1):
        notification.attempts = attempt
        if channel.send():
            notification.delivery_state = DeliveryState.SENT
            return notification
        notification.delivery_state = (
            DeliveryState.FAILED if attempt == max_attempts else DeliveryState.RETRYING
        )
    return notification


def at_command_trace(sms_text: str, msisdn: str = "+10000000000") -> list[str]:
    """The modem conversation a real send would produce, for debug output."""
    return [
        "AT",
        "AT+CMGF=1",
        f'AT+CMGS="{msisdn}"',
        sms_text + "\x1a",
    ]


@dataclass
class DisplayState:
    """Operator-facing LCD model: last detected class plus per-bin counts."""

    last_detected: WasteClass | None = None
    counters: dict[int, int] = field(default_factory=lambda: {b: 0 for b in range(1, 7)})

    def lines(self) -> list[str]:
        top = f"DETECTED: {self.last_detected.label if self.last_detected else '-'}"
        bottom = " ".join(f"B{b}:{self.counters[b]}" for b in range(1, 7))
        return [top, bottom]


def display_update(state: DisplayState, kind: str, attrs: Mapping) -> DisplayState:
    """Advance the display for one simulation event.

    Classified updates the detected-class line, ItemBinned bumps the
    matching counter, and an operator dump clears it; everything else
    leaves the display alone.  Counters therefore always equal the MCU's
    reported BIN_COUNT values.
    """
    if kind == "Classified":
        state.last_detected = WasteClass.from_key(attrs["predicted"])
    elif kind == "ItemBinned":
        state.counters[attrs["bin"]] += 1
    elif kind == "OperatorCommand" and attrs.get("command") == "dump_bin":
        state.counters[attrs["bin"]] = 0
    return state

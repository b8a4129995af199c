"""Microcontroller emulator: servo swings, bin counters, level telemetry.

The emulator speaks :mod:`convowaste.link` messages.  Time is supplied by
the caller as integer microseconds; the emulator never sleeps.  Contract
for each inbound message:

* DETECTED(c): schedule the routed servo swing; after the actuation time
  elapses the emulator emits SERVO_DONE followed by BIN_COUNT with the
  incremented count.  Replies ACK immediately.
* STOP_ALL: cancel all pending swings.  Replies ACK.
* DUMP(b): reset bin b's counter and report BIN_COUNT(b, 0).  Replies ACK.
* BELT(run): track belt state.  Replies ACK.
* Anything else (messages only the MCU itself would send) is ignored and
  recorded as a diagnostic so a misbehaving peer cannot wedge the loop.

Bin counters are non-negative and change only through swing completion
(+1) or a dump (reset to zero).  LEVEL telemetry frames, one per bin,
are produced every `level_period_us` from the fill geometry: measured
echo distance shrinks by `fill_per_item_m` per counted item.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .domain import Direction, MachineConfig, RoutingTable, default_routing_table
from .link import (
    Ack,
    Belt,
    BinCount,
    Detected,
    Dump,
    Level,
    LinkMessage,
    StopAll,
    ServoDone,
    MSG_TYPES,
)


@dataclass(frozen=True)
class _Swing:
    due_us: int
    seq: int
    servo_id: int
    direction_code: str
    bin_index: int

    def __lt__(self, other: "_Swing") -> bool:
        return (self.due_us, self.seq) < (other.due_us, other.seq)


@dataclass
class McuEmulator:
    routing: RoutingTable = field(default_factory=default_routing_table)
    actuation_us: int = 1_000_000
    level_period_us: int = 1_000_000
    bin_depth_m: float = 0.5
    fill_per_item_m: float = 0.05
    telemetry_enabled: bool = True

    def __post_init__(self) -> None:
        self.counts: dict[int, int] = {b: 0 for b in range(1, 7)}
        self.belt_running = True
        self._swings: list[_Swing] = []
        self._seq = 0
        self._next_level_us = self.level_period_us
        self.diagnostics: list[str] = []

    @classmethod
    def from_config(cls, config: MachineConfig, telemetry: bool = True) -> "McuEmulator":
        return cls(
            routing=config.routing,
            actuation_us=round(config.servo_actuation_s * 1_000_000),
            level_period_us=round(config.level_sample_period_s * 1_000_000),
            bin_depth_m=config.bin_depth_m,
            fill_per_item_m=config.bin_fill_per_item_m,
            telemetry_enabled=telemetry,
        )

    # -- queries ---------------------------------------------------------

    def distance_mm(self, bin_index: int) -> int:
        free = self.bin_depth_m - self.counts[bin_index] * self.fill_per_item_m
        return max(0, round(free * 1000))

    def next_swing_due_us(self) -> int | None:
        return self._swings[0].due_us if self._swings else None

    def next_level_due_us(self) -> int | None:
        return self._next_level_us if self.telemetry_enabled else None

    def next_due_us(self) -> int | None:
        dues = [d for d in (self.next_swing_due_us(), self.next_level_due_us()) if d is not None]
        return min(dues) if dues else None

    # -- time-driven outputs ---------------------------------------------

    def advance_swings(self, now_us: int) -> list[LinkMessage]:
        """Complete every swing due at or before `now_us`."""
        out: list[LinkMessage] = []
        while self._swings and self._swings[0].due_us <= now_us:
            swing = heapq.heappop(self._swings)
            self.counts[swing.bin_index] += 1
            out.append(ServoDone(swing.servo_id, Direction(swing.direction_code)))
            out.append(BinCount(swing.bin_index, self.counts[swing.bin_index]))
        return out

    def level_frames(self, now_us: int) -> list[LinkMessage]:
        """Emit one LEVEL frame per bin for every period boundary reached."""
        out: list[LinkMessage] = []
        if not self.telemetry_enabled:
            return out
        while self._next_level_us <= now_us:
            for b in range(1, 7):
                out.append(Level(b, self.distance_mm(b)))
            self._next_level_us += self.level_period_us
        return out

    # -- message handling ------------------------------------------------

    def handle(self, msg: LinkMessage, now_us: int) -> list[LinkMessage]:
        """React to one inbound frame; returns the immediate replies."""
        if isinstance(msg, Detected):
            cmd = self.routing.command_for(msg.waste_class)
            self._seq += 1
            heapq.heappush(
                self._swings,
                _Swing(
                    due_us=now_us + self.actuation_us,
                    seq=self._seq,
                    servo_id=cmd.servo_id,
                    direction_code=cmd.direction.value,
                    bin_index=self.routing.bin_for(msg.waste_class),
                ),
            )
            return [Ack(MSG_TYPES[Detected])]
        if isinstance(msg, StopAll):
            self._swings.clear()
            return [Ack(MSG_TYPES[StopAll])]
        if isinstance(msg, Dump):
            self.counts[msg.bin_index] = 0
            return [Ack(MSG_TYPES[Dump]), BinCount(msg.bin_index, 0)]
        if isinstance(msg, Belt):
            self.belt_running = msg.run
            return [Ack(MSG_TYPES[Belt])]
        self.diagnostics.append(f"ignored unexpected {type(msg).__name__} at t={now_us}")
        return []

    def step(self, incoming: LinkMessage | None, now_us: int) -> list[LinkMessage]:
        """Advance time to `now_us`, then process `incoming` if given.

        Outputs come back oldest first: due swing completions and level
        telemetry, then replies to the inbound frame.
        """
        out = self.advance_swings(now_us)
        out.extend(self.level_frames(now_us))
        if incoming is not None:
            out.extend(self.handle(incoming, now_us))
        return out

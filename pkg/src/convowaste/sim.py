"""Deterministic discrete-event simulation of the sorting machine.

The master clock is integer microseconds; all scheduling arithmetic is
integer, so runs with the same config, scenario, classifier and seed
produce byte-identical traces.

Belt motion uses a cumulative-runtime model: ``R(t)`` is the total time
the belt has been moving up to ``t``.  An item entering at ``t0`` sits
at position ``speed * (R(t) - R(t0))``, so pausing the belt costs
nothing per item; only the single scheduled waypoint event for the
front-most traveling item must be invalidated, which a generation
counter handles.

Machine cycle for one item (defaults in parentheses):

* item enters at the belt head, travels to the camera station (2 ft at
  0.5 ft/s = 4 s),
* presence detected, belt pauses, image capture holds it for the
  capture delay (10 s),
* the classifier answers after its per-class latency (e.g. 3 s for
  plastic), the belt resumes,
* the item travels on to its routed servo station, a DETECTED frame
  starts the swing, and the MCU reports completion after the actuation
  time (1 s), which is when the item counts as binned.

A classification-unavailable outcome instead issues STOP_ALL and the
item rides to the belt end where it is rejected.

RNG layout: the classifier owns the run seed; the GSM channel derives
its own stream from ``seed ^ 0x47534D`` so notification retries never
perturb classification draws.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

from . import link, trace
from .classifiers import PerfectClassifier, Prediction, StochasticClassifier
from .domain import (
    ALL_CLASSES,
    ConfigError,
    MachineConfig,
    WasteClass,
    level_percent_from_distance,
    route_for,
)
from .mcu import McuEmulator
from .telemetry import (
    DeliveryState,
    DisplayState,
    GsmChannel,
    Notification,
    ThresholdMonitor,
    display_update,
    format_sms,
)
from .trace import MetricsBuilder, SimEvent, SimMetrics

US = 1_000_000
GSM_SEED_SALT = 0x47534D


def to_us(seconds: float) -> int:
    return round(seconds * US)


# -- scenarios -----------------------------------------------------------


@dataclass(frozen=True)
class ScenarioItem:
    t_s: float
    waste_class: WasteClass


@dataclass(frozen=True)
class ScenarioCommand:
    t_s: float
    command: str  # dump_bin | pause | resume
    bin_index: int | None = None
    client: str = "script"


@dataclass(frozen=True)
class Scenario:
    """Arrival schedule plus optional scripted operator commands.

    `duration_s` extends the run past the last activity so level
    telemetry keeps sampling (an empty scenario with a duration produces
    a telemetry-only trace).
    """

    items: tuple[ScenarioItem, ...]
    commands: tuple[ScenarioCommand, ...] = ()
    duration_s: float | None = None
    name: str = ""


_COMMAND_KINDS = ("dump_bin", "pause", "resume")


def scenario_from_dict(data: Mapping) -> Scenario:
    try:
        raw_items = data.get("items", [])
        items = []
        prev = float("-inf")
        for entry in raw_items:
            t_s = float(entry["t"])
            if t_s < prev:
                raise ConfigError(
                    f"scenario-out-of-order: item at t={t_s} after t={prev}"
                )
            if t_s < 0:
                raise ConfigError(f"scenario-out-of-order: negative item time {t_s}")
            prev = t_s
            items.append(ScenarioItem(t_s, WasteClass.from_key(str(entry["class"]).lower())))
        commands = []
        prev = float("-inf")
        for entry in data.get("commands", []):
            t_s = float(entry["t"])
            if t_s < prev or t_s < 0:
                raise ConfigError(f"scenario-out-of-order: command at t={t_s}")
            prev = t_s
            kind = entry["kind"]
            if kind not in _COMMAND_KINDS:
                raise ConfigError(f"unknown scenario command {kind!r}")
            bin_index = entry.get("bin")
            if kind == "dump_bin":
                if not isinstance(bin_index, int) or not 1 <= bin_index <= 6:
                    raise ConfigError(f"dump_bin needs a bin in 1..6, got {bin_index!r}")
            elif bin_index is not None:
                raise ConfigError(f"{kind} takes no bin argument")
            commands.append(
                ScenarioCommand(t_s, kind, bin_index, str(entry.get("client", "script")))
            )
        duration = data.get("duration_s")
        return Scenario(
            items=tuple(items),
            commands=tuple(commands),
            duration_s=None if duration is None else float(duration),
            name=str(data.get("name", "")),
        )
    except (KeyError, TypeError, ValueError) as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(f"bad scenario: {err}") from None


def scenario_to_dict(scenario: Scenario) -> dict:
    out: dict = {"name": scenario.name, "items": [], "commands": []}
    if scenario.duration_s is not None:
        out["duration_s"] = scenario.duration_s
    for item in scenario.items:
        out["items"].append({"t": item.t_s, "class": item.waste_class.key})
    for cmd in scenario.commands:
        entry: dict = {"t": cmd.t_s, "kind": cmd.command}
        if cmd.bin_index is not None:
            entry["bin"] = cmd.bin_index
        if cmd.client != "script":
            entry["client"] = cmd.client
        out["commands"].append(entry)
    if not out["commands"]:
        del out["commands"]
    return out


def load_scenario(path: str | Path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fp:
        try:
            data = json.load(fp)
        except json.JSONDecodeError as err:
            raise ConfigError(f"bad scenario file {path}: {err}") from None
    return scenario_from_dict(data)


def save_scenario(path: str | Path, scenario: Scenario) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        json.dump(scenario_to_dict(scenario), fp, indent=2)
        fp.write("\n")


def round_robin_scenario(
    per_class: int = 50,
    spacing_s: float = 1.0,
    classes: Sequence[WasteClass] = ALL_CLASSES,
    name: str = "round-robin",
) -> Scenario:
    """Items cycle through the classes, one arrival per spacing interval."""
    items = tuple(
        ScenarioItem(i * spacing_s, classes[i % len(classes)])
        for i in range(per_class * len(classes))
    )
    return Scenario(items=items, name=name)


def single_item_scenario(waste_class: WasteClass = WasteClass.PLASTIC) -> Scenario:
    return Scenario(
        items=(ScenarioItem(0.0, waste_class),), name=f"single-{waste_class.key}"
    )


# -- engine --------------------------------------------------------------

# Scheduled event codes.
_ARRIVAL = 0
_MOTION = 1
_CAPTURE_DONE = 2
_CLASSIFIED = 3
_CLASSIFY_FAILED = 4
_MCU_DUE = 5
_TELEMETRY = 6
_GSM_RETRY = 7
_COMMAND = 8

_WAY_CAMERA = 0
_WAY_STATION = 1
_WAY_END = 2


class _Item:
    __slots__ = (
        "item_id",
        "true_class",
        "arrival_us",
        "enter_r",
        "phase",
        "prediction",
        "bin_index",
        "servo_id",
        "direction",
        "waypoint",
    )

    def __init__(self, item_id: int, true_class: WasteClass, arrival_us: int):
        self.item_id = item_id
        self.true_class = true_class
        self.arrival_us = arrival_us
        self.enter_r = 0
        self.phase = "pending"
        self.prediction: Prediction | None = None
        self.bin_index: int | None = None
        self.servo_id: int | None = None
        self.direction: str | None = None
        self.waypoint: int | None = None


@dataclass
class SimResult:
    header: dict
    events: list[SimEvent]
    metrics: SimMetrics
    notifications: list[dict]
    display: DisplayState
    bin_counts: dict[int, int]
    link_frames: int


class SimEngine:
    """Step-able event loop.  `run` drives it to completion; the gateway
    instead steps it one event at a time so it can pace against wall
    time and inject operator commands between events."""

    def __init__(
        self,
        config: MachineConfig,
        scenario: Scenario,
        classifier=None,
        seed: int = 1,
        collect_trace: bool = True,
    ):
        config.validate()
        self.config = config
        self.scenario = scenario
        self.seed = seed
        self.classifier = classifier if classifier is not None else StochasticClassifier(
            seed, confusion=config.confusion, confidence_peak=config.confidence_peak
        )
        self.collect = collect_trace

        self.clock = 0
        self.events: list[SimEvent] = []
        self.on_event: Callable[[SimEvent], None] | None = None
        self.on_command_event: Callable[[ScenarioCommand, int], None] | None = None
        self.metrics_builder = MetricsBuilder()
        self.display = DisplayState()
        self.mcu = McuEmulator.from_config(config, telemetry=collect_trace)
        self.monitor = ThresholdMonitor(config.threshold_percent)
        self.gsm = GsmChannel(config.gsm_success_probability, seed ^ GSM_SEED_SALT)
        self.notifications: list[dict] = []
        self.link_frames = 0
        self.link_log: list[tuple[str, link.LinkMessage]] = []

        speed = config.belt_speed_ftps
        self._t_camera = to_us(config.camera_station_ft / speed)
        self._t_station = {
            i + 1: to_us(pos / speed) for i, pos in enumerate(config.servo_stations_ft)
        }
        self._t_end = to_us(config.belt_length_ft / speed)
        self._capture_us = to_us(config.capture_delay_s)
        self._timeout_us = to_us(config.adapter_timeout_s)
        self._backoff_us = to_us(config.gsm_retry_backoff_s)
        self._telemetry_us = to_us(config.level_sample_period_s)
        self._min_duration_us = (
            to_us(scenario.duration_s) if scenario.duration_s is not None else 0
        )

        # Belt runtime model.
        self._r0 = 0
        self._t_mark = 0
        self._running = True
        self._capture_hold: int | None = None
        self._operator_hold = False
        self._motion_gen = 0

        self._items: dict[int, _Item] = {}
        self._transit: list[tuple[int, int]] = []
        self._deflecting: dict[int, list[int]] = {b: [] for b in range(1, 7)}
        self._terminal = 0
        self._arrived = 0
        self._retries_pending = 0
        self._last_activity_us = 0
        self._event_seq = 0
        self._sched_seq = 0
        self._queue: list[tuple[int, int, int, object]] = []
        self._live_notifications: list[Notification] = []

        for item_id, spec_item in enumerate(scenario.items, start=1):
            self._items[item_id] = _Item(item_id, spec_item.waste_class, to_us(spec_item.t_s))
            self._schedule(to_us(spec_item.t_s), _ARRIVAL, item_id)
        for command in scenario.commands:
            self._schedule(to_us(command.t_s), _COMMAND, command)
        self._telemetry_live = False
        if self.collect and (self._items or self._min_duration_us > 0):
            self._telemetry_live = True
            self._schedule(self._telemetry_us, _TELEMETRY, None)

    # -- plumbing --------------------------------------------------------

    def _schedule(self, t_us: int, code: int, payload) -> None:
        self._sched_seq += 1
        heapq.heappush(self._queue, (t_us, self._sched_seq, code, payload))

    def _emit(self, kind: str, **attrs) -> int:
        seq = self._event_seq
        self._event_seq += 1
        if kind != trace.LEVEL_SAMPLE:
            self._last_activity_us = self.clock
        if self.collect:
            event = SimEvent(self.clock, seq, kind, attrs)
            self.events.append(event)
            display_update(self.display, kind, attrs)
            if self.on_event is not None:
                self.on_event(event)
        return seq

    def _frame(self, direction: str, message: link.LinkMessage) -> link.LinkMessage:
        """Round-trip one message through the codec and keep a wire log."""
        decoded = link.decode_frame(link.encode_frame(message))
        self.link_frames += 1
        self.link_log.append((direction, decoded))
        return decoded

    def _send_link(self, message: link.LinkMessage) -> list[link.LinkMessage]:
        """Controller -> MCU, through the real codec when tracing."""
        if self.collect:
            decoded = self._frame("tx", message)
            replies = self.mcu.handle(decoded, self.clock)
            for reply in replies:
                self._frame("rx", reply)
            return replies
        return self.mcu.handle(message, self.clock)

    def belt_runtime(self, t_us: int) -> int:
        return self._r0 + (t_us - self._t_mark if self._running else 0)

    def _refresh_motion(self) -> None:
        self._motion_gen += 1
        if self._running and self._transit:
            target_r, _ = self._transit[0]
            t_hit = self.clock + (target_r - self.belt_runtime(self.clock))
            self._schedule(t_hit, _MOTION, self._motion_gen)

    def _update_belt(self, reason: str, item_id: int | None = None) -> None:
        should_run = self._capture_hold is None and not self._operator_hold
        if should_run == self._running:
            return
        if self._running:
            self._r0 += self.clock - self._t_mark
            self._running = False
            self._t_mark = self.clock
            self._motion_gen += 1
            attrs = {"reason": reason}
            if item_id is not None:
                attrs["item"] = item_id
            self._emit(trace.BELT_PAUSED, **attrs)
            self._send_link(link.Belt(False))
        else:
            self._running = True
            self._t_mark = self.clock
            self._emit(trace.BELT_RESUMED, reason=reason)
            self._send_link(link.Belt(True))
            self._refresh_motion()

    # -- handlers --------------------------------------------------------

    def _on_arrival(self, item_id: int) -> None:
        item = self._items[item_id]
        item.phase = "arriving"
        item.enter_r = self.belt_runtime(self.clock)
        item.waypoint = _WAY_CAMERA
        self._arrived += 1
        self._emit(trace.ITEM_ARRIVED, item=item_id, true=item.true_class.key)
        self.metrics_builder.add_arrival(item_id, item.true_class, self.clock)
        heapq.heappush(self._transit, (item.enter_r + self._t_camera, item_id))
        self._refresh_motion()

    def _on_motion(self, gen: int) -> None:
        if gen != self._motion_gen or not self._running or not self._transit:
            return
        target_r, item_id = heapq.heappop(self._transit)
        item = self._items[item_id]
        if item.waypoint == _WAY_CAMERA:
            item.phase = "at_camera"
            self._emit(trace.PRESENCE_DETECTED, item=item_id)
            self._capture_hold = item_id
            self._update_belt("capture", item_id)
            self._schedule(self.clock + self._capture_us, _CAPTURE_DONE, item_id)
        elif item.waypoint == _WAY_STATION:
            item.waypoint = None
            self._emit(
                trace.SERVO_FIRED,
                item=item_id,
                servo=item.servo_id,
                direction=item.direction,
            )
            self._send_link(link.Detected(item.prediction.predicted))
            self._deflecting[item.bin_index].append(item_id)
            self._schedule(self.clock + self.mcu.actuation_us, _MCU_DUE, None)
            self._refresh_motion()
        else:
            item.phase = "rejected"
            item.waypoint = None
            self._terminal += 1
            self._emit(
                trace.ITEM_REJECTED, item=item_id, true=item.true_class.key, reason="unavailable"
            )
            self.metrics_builder.add_rejected()
            self._refresh_motion()

    def _on_capture_done(self, item_id: int) -> None:
        item = self._items[item_id]
        item.phase = "classifying"
        image_ref = f"img-{item_id:04d}"
        self._emit(trace.IMAGE_CAPTURED, item=item_id, image=image_ref)
        prediction = self.classifier.classify(item_id, item.true_class, image_ref)
        if prediction is None:
            self._schedule(self.clock + self._timeout_us, _CLASSIFY_FAILED, item_id)
            return
        item.prediction = prediction
        latency_us = to_us(prediction.latency_s)
        if self.config.latency_includes_pause:
            delay = max(0, latency_us - self._capture_us)
        else:
            delay = latency_us
        self._schedule(self.clock + delay, _CLASSIFIED, item_id)

    def _on_classified(self, item_id: int) -> None:
        item = self._items[item_id]
        prediction = item.prediction
        latency_us = to_us(prediction.latency_s)
        item.phase = "routed"
        self._emit(
            trace.CLASSIFIED,
            item=item_id,
            predicted=prediction.predicted.key,
            true=item.true_class.key,
            latency_us=latency_us,
            conf=[round(p, 6) for p in prediction.confidence],
        )
        self.metrics_builder.add_classified(item.true_class, latency_us)
        command, bin_index = route_for(prediction.predicted, self.config.routing)
        item.bin_index = bin_index
        item.servo_id = command.servo_id
        item.direction = command.direction.value
        item.waypoint = _WAY_STATION
        heapq.heappush(self._transit, (item.enter_r + self._t_station[command.servo_id], item_id))
        self._capture_hold = None
        self._update_belt("capture")

    def _on_classify_failed(self, item_id: int) -> None:
        item = self._items[item_id]
        self._send_link(link.StopAll())
        for bin_index in range(1, 7):
            for stranded_id in self._deflecting[bin_index]:
                stranded = self._items[stranded_id]
                stranded.phase = "rejected"
                self._terminal += 1
                self._emit(
                    trace.ITEM_REJECTED,
                    item=stranded_id,
                    true=stranded.true_class.key,
                    reason="servo-stopped",
                )
                self.metrics_builder.add_rejected()
            self._deflecting[bin_index].clear()
        item.waypoint = _WAY_END
        heapq.heappush(self._transit, (item.enter_r + self._t_end, item_id))
        self._capture_hold = None
        self._update_belt("capture")

    def _on_mcu_due(self, _payload) -> None:
        for message in self.mcu.advance_swings(self.clock):
            if isinstance(message, link.BinCount):
                if self.collect:
                    self._frame("rx", message)
                item_id = self._deflecting[message.bin_index].pop(0)
                item = self._items[item_id]
                item.phase = "binned"
                self._terminal += 1
                self._emit(
                    trace.ITEM_BINNED,
                    item=item_id,
                    bin=message.bin_index,
                    predicted=item.prediction.predicted.key,
                    true=item.true_class.key,
                )
                self.metrics_builder.add_binned(
                    item_id, item.true_class, item.prediction.predicted, self.clock
                )
            elif self.collect and isinstance(message, link.ServoDone):
                self._frame("rx", message)

    def _on_telemetry(self, _payload) -> None:
        done = (
            self._terminal == len(self._items)
            and self._retries_pending == 0
            and self.clock > max(self._last_activity_us, self._min_duration_us)
        )
        if done:
            self._telemetry_live = False
            return
        levels: dict[int, float] = {}
        for message in self.mcu.level_frames(self.clock):
            assert isinstance(message, link.Level)
            self._frame("rx", message)
            self._emit(
                trace.LEVEL_SAMPLE,
                bin=message.bin_index,
                distance_mm=message.distance_mm,
                count=self.mcu.counts[message.bin_index],
            )
            levels[message.bin_index] = level_percent_from_distance(
                message.distance_mm / 1000.0, self.config.bin_depth_m
            )
        for notification in self.monitor.observe(levels, self.clock):
            self._live_notifications.append(notification)
            sms = format_sms(notification, self.config.machine_id, self.config.epoch_unix_s)
            self.notifications.append(
                {
                    "notif": notification.notif_id,
                    "bin": notification.bin_index,
                    "level_pct": round(notification.level_percent),
                    "sim_time_us": notification.sim_time_us,
                    "sms": sms,
                    "state": notification.delivery_state.value,
                    "attempts": 0,
                }
            )
            self._attempt_notification(notification, 1)
        self._schedule(self.clock + self._telemetry_us, _TELEMETRY, None)

    def _attempt_notification(self, notification: Notification, attempt: int) -> None:
        success = self.gsm.send()
        notification.attempts = attempt
        if success:
            notification.delivery_state = DeliveryState.SENT
            outcome = "sent"
        elif attempt >= self.config.gsm_max_attempts:
            notification.delivery_state = DeliveryState.FAILED
            outcome = "failed"
        else:
            notification.delivery_state = DeliveryState.RETRYING
            outcome = "retry"
            self._retries_pending += 1
            self._schedule(
                self.clock + self._backoff_us, _GSM_RETRY, (notification.notif_id, attempt + 1)
            )
        record = self.notifications[notification.notif_id - 1]
        record["state"] = notification.delivery_state.value
        record["attempts"] = attempt
        self._emit(
            trace.NOTIFICATION_SENT,
            notif=notification.notif_id,
            bin=notification.bin_index,
            level_pct=round(notification.level_percent),
            attempt=attempt,
            outcome=outcome,
        )

    def _on_gsm_retry(self, payload) -> None:
        notif_id, attempt = payload
        self._retries_pending -= 1
        self._attempt_notification(self._live_notifications[notif_id - 1], attempt)

    def _on_command(self, command: ScenarioCommand) -> None:
        attrs: dict = {"command": command.command}
        if command.bin_index is not None:
            attrs["bin"] = command.bin_index
        attrs["client"] = command.client
        event_id = self._emit(trace.OPERATOR_COMMAND, **attrs)
        if self.on_command_event is not None:
            self.on_command_event(command, event_id)
        if self.collect and not self._telemetry_live:
            # A command after the last item woke the run back up; resume
            # level sampling on the next period boundary.
            self._telemetry_live = True
            next_tick = (self.clock // self._telemetry_us + 1) * self._telemetry_us
            self._schedule(next_tick, _TELEMETRY, None)
        if command.command == "dump_bin":
            self._send_link(link.Dump(command.bin_index))
        elif command.command == "pause":
            if not self._operator_hold:
                self._operator_hold = True
                self._update_belt("operator")
        elif command.command == "resume":
            if self._operator_hold:
                self._operator_hold = False
                self._update_belt("operator")

    # -- public surface --------------------------------------------------

    def inject_command(
        self, command: str, bin_index: int | None, client: str, at_us: int
    ) -> ScenarioCommand:
        """Queue a live operator command; `at_us` must not be in the past.

        Returns the queued command object; when it is applied,
        `on_command_event` fires with that same object and the id of the
        OperatorCommand trace event, which is how the gateway correlates
        acks.
        """
        if command not in _COMMAND_KINDS:
            raise ValueError(f"unknown command {command!r}")
        if command == "dump_bin" and (bin_index is None or not 1 <= bin_index <= 6):
            raise ValueError(f"dump_bin needs a bin in 1..6, got {bin_index!r}")
        if at_us < self.clock:
            raise ValueError("cannot schedule a command in the past")
        queued = ScenarioCommand(at_us / US, command, bin_index, client)
        self._schedule(at_us, _COMMAND, queued)
        return queued

    def peek_time(self) -> int | None:
        return self._queue[0][0] if self._queue else None

    def step(self) -> bool:
        """Process one scheduled entry; False once the queue is empty."""
        if not self._queue:
            return False
        t_us, _, code, payload = heapq.heappop(self._queue)
        self.clock = t_us
        if code == _ARRIVAL:
            self._on_arrival(payload)
        elif code == _MOTION:
            self._on_motion(payload)
        elif code == _CAPTURE_DONE:
            self._on_capture_done(payload)
        elif code == _CLASSIFIED:
            self._on_classified(payload)
        elif code == _CLASSIFY_FAILED:
            self._on_classify_failed(payload)
        elif code == _MCU_DUE:
            self._on_mcu_due(payload)
        elif code == _TELEMETRY:
            self._on_telemetry(payload)
        elif code == _GSM_RETRY:
            self._on_gsm_retry(payload)
        elif code == _COMMAND:
            self._on_command(payload)
        return True

    def header(self) -> dict:
        return {
            "v": trace.TRACE_VERSION,
            "kind": "TraceHeader",
            "rng": "mt19937",
            "seed": self.seed,
            "machine_id": self.config.machine_id,
            "classifier": self.classifier.kind,
            "routing": {c.key: self.config.routing.bin_for(c) for c in ALL_CLASSES},
            "bin_depth_mm": round(self.config.bin_depth_m * 1000),
            "threshold_percent": self.config.threshold_percent,
            "config_sha256": self.config.fingerprint(),
        }

    def snapshot(self) -> dict:
        """Point-in-time machine state for the operator console."""
        paused = []
        if self._capture_hold is not None:
            paused.append("capture")
        if self._operator_hold:
            paused.append("operator")
        bins = []
        for b in range(1, 7):
            level = level_percent_from_distance(
                self.mcu.distance_mm(b) / 1000.0, self.config.bin_depth_m
            )
            bins.append({"bin": b, "count": self.mcu.counts[b], "level_pct": round(level, 2)})
        return {
            "t_us": self.clock,
            "machine_id": self.config.machine_id,
            "belt_running": self._running,
            "paused_reasons": paused,
            "last_detected": self.display.last_detected.key if self.display.last_detected else None,
            "bins": bins,
            "items_in_flight": self._arrived - self._terminal,
            "binned_total": self.metrics_builder.binned,
            "rejected_total": self.metrics_builder.rejected,
        }

    def result(self) -> SimResult:
        if self.events:
            duration = self.events[-1].t_us
        else:
            duration = max(self._last_activity_us, self._min_duration_us)
        return SimResult(
            header=self.header(),
            events=self.events,
            metrics=self.metrics_builder.finalize(duration),
            notifications=self.notifications,
            display=self.display,
            bin_counts=dict(self.mcu.counts),
            link_frames=self.link_frames,
        )

    def run(self) -> SimResult:
        while self.step():
            pass
        return self.result()


def run_simulation(
    config: MachineConfig,
    scenario: Scenario,
    classifier=None,
    seed: int = 1,
    collect_trace: bool = True,
) -> SimResult:
    """Build an engine, run it to completion, and return the results."""
    return SimEngine(config, scenario, classifier, seed, collect_trace).run()

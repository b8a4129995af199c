"""Trace serialization, validation, and live/replay metric agreement."""

import io
import json

import pytest
from hypothesis import given, strategies as st

from convowaste import trace
from convowaste.domain import MachineConfig, WasteClass
from convowaste.sim import round_robin_scenario, run_simulation, single_item_scenario
from convowaste.trace import (
    MalformedTrace,
    MetricsBuilder,
    SimEvent,
    event_from_record,
    read_trace,
    read_trace_file,
    replay,
    replay_file,
    write_trace,
    write_trace_file,
)

HEADER = {
    "v": 1,
    "kind": "TraceHeader",
    "rng": "mt19937",
    "seed": 1,
    "machine_id": "M1",
    "classifier": "perfect",
    "routing": {"plastic": 1, "metal": 2, "glass": 3, "organic": 4, "medical": 5, "ewaste": 6},
    "bin_depth_mm": 500,
    "config_sha256": "0" * 64,
}


def _trace_text(*event_lines: str) -> io.StringIO:
    return io.StringIO(
        "\n".join([json.dumps(HEADER, separators=(",", ":")), *event_lines]) + "\n"
    )


class TestSerialization:
    def test_json_line_is_compact_and_ordered(self):
        event = SimEvent(
            5_000_000,
            3,
            trace.CLASSIFIED,
            {
                "conf": [0.9, 0.02, 0.02, 0.02, 0.02, 0.02],
                "true": "plastic",
                "item": 1,
                "predicted": "plastic",
                "latency_us": 3000000,
            },
        )
        line = event.to_json_line()
        assert " " not in line
        assert line.startswith(
            '{"t":5000000,"seq":3,"kind":"Classified","item":1,"predicted":"plastic"'
        )

    def test_round_trip_through_stream(self):
        events = [
            SimEvent(0, 0, trace.ITEM_ARRIVED, {"item": 1, "true": "glass"}),
            SimEvent(4_000_000, 1, trace.PRESENCE_DETECTED, {"item": 1}),
        ]
        buf = io.StringIO()
        write_trace(buf, HEADER, events)
        buf.seek(0)
        header, parsed = read_trace(buf)
        assert header == HEADER
        assert parsed == events

    def test_round_trip_through_file(self, tmp_path):
        path = tmp_path / "t.ndjson"
        events = [SimEvent(0, 0, trace.ITEM_ARRIVED, {"item": 1, "true": "metal"})]
        write_trace_file(path, HEADER, events)
        header, parsed = read_trace_file(path)
        assert (header, parsed) == (HEADER, events)


class TestValidation:
    def test_empty_trace(self):
        with pytest.raises(MalformedTrace, match="empty trace"):
            read_trace(io.StringIO(""))

    def test_first_record_must_be_header(self):
        with pytest.raises(MalformedTrace) as err:
            read_trace(io.StringIO('{"t":0,"seq":0,"kind":"ItemArrived"}\n'))
        assert err.value.line_no == 1
        assert "TraceHeader" in err.value.reason

    def test_unsupported_version(self):
        bad = dict(HEADER, v=2)
        with pytest.raises(MalformedTrace, match="version"):
            read_trace(io.StringIO(json.dumps(bad) + "\n"))

    def test_invalid_json_names_line(self):
        stream = _trace_text('{"t":0,"seq":0,"kind":"ItemArrived","item":1,"true":"glass"}', "{oops")
        with pytest.raises(MalformedTrace) as err:
            read_trace(stream)
        assert err.value.line_no == 3

    def test_time_must_not_go_backwards(self):
        stream = _trace_text(
            '{"t":5,"seq":0,"kind":"PresenceDetected","item":1}',
            '{"t":4,"seq":1,"kind":"PresenceDetected","item":2}',
        )
        with pytest.raises(MalformedTrace, match="time went backwards"):
            read_trace(stream)

    def test_seq_must_be_contiguous(self):
        stream = _trace_text(
            '{"t":0,"seq":0,"kind":"PresenceDetected","item":1}',
            '{"t":1,"seq":2,"kind":"PresenceDetected","item":2}',
        )
        with pytest.raises(MalformedTrace, match="not contiguous"):
            read_trace(stream)

    def test_unknown_kind_rejected(self):
        with pytest.raises(MalformedTrace, match="unknown event kind"):
            event_from_record({"t": 0, "seq": 0, "kind": "Teleported"}, line_no=9)

    def test_missing_field_rejected(self):
        with pytest.raises(MalformedTrace, match="missing"):
            event_from_record({"t": 0, "kind": "ItemArrived"})

    def test_non_integer_time_rejected(self):
        with pytest.raises(MalformedTrace, match="integers"):
            event_from_record({"t": 0.5, "seq": 0, "kind": "ItemArrived"})


class TestReplay:
    def test_replay_equals_live_metrics_exactly(self, tmp_path):
        scenario = round_robin_scenario(per_class=6, spacing_s=2.0)
        result = run_simulation(MachineConfig(), scenario, seed=42)
        path = tmp_path / "live.ndjson"
        write_trace_file(path, result.header, result.events)
        replayed = replay_file(path)
        assert replayed.to_dict() == result.metrics.to_dict()

    def test_bin_contradicting_routing_is_malformed(self):
        events = [
            SimEvent(0, 0, trace.ITEM_ARRIVED, {"item": 1, "true": "plastic"}),
            SimEvent(
                9_000_000,
                1,
                trace.ITEM_BINNED,
                {"item": 1, "bin": 4, "predicted": "plastic", "true": "plastic"},
            ),
        ]
        with pytest.raises(MalformedTrace, match="routing sends"):
            replay(HEADER, events)

    def test_replay_without_routing_header_fails(self):
        with pytest.raises(MalformedTrace, match="routing"):
            replay({"v": 1}, [])

    def test_rejected_items_counted(self):
        events = [
            SimEvent(0, 0, trace.ITEM_ARRIVED, {"item": 1, "true": "metal"}),
            SimEvent(1, 1, trace.ITEM_REJECTED, {"item": 1, "true": "metal", "reason": "unavailable"}),
        ]
        metrics = replay(HEADER, events)
        assert metrics.rejected_total == 1
        assert metrics.binned_total == 0

    def test_golden_trace_replays(self):
        metrics = replay_file("tests/data/golden_single_plastic.ndjson")
        assert metrics.binned_total == 1
        assert metrics.per_class[WasteClass.PLASTIC].accuracy_percent == 100.0
        assert metrics.mean_cycle_time_s == pytest.approx(22.0)


class TestMetrics:
    def test_builder_accuracy_and_cycle_math(self):
        b = MetricsBuilder()
        b.add_arrival(1, WasteClass.GLASS, 0)
        b.add_arrival(2, WasteClass.GLASS, 1_000_000)
        b.add_classified(WasteClass.GLASS, 6_000_000)
        b.add_classified(WasteClass.GLASS, 6_000_000)
        b.add_binned(1, WasteClass.GLASS, WasteClass.GLASS, 20_000_000)
        b.add_binned(2, WasteClass.GLASS, WasteClass.METAL, 30_000_000)
        metrics = b.finalize(30_000_000)
        glass = metrics.per_class[WasteClass.GLASS]
        assert glass.presented == 2
        assert glass.correctly_binned == 1
        assert glass.accuracy_percent == 50.0
        assert glass.mean_latency_s == 6.0
        assert metrics.mean_cycle_time_s == pytest.approx(24.5)
        assert metrics.throughput_per_hour == pytest.approx(2 / 30 * 3600)

    def test_empty_class_rows_are_zero(self):
        metrics = MetricsBuilder().finalize(0)
        assert metrics.per_class[WasteClass.EWASTE].accuracy_percent == 0.0
        assert metrics.mean_cycle_time_s == 0.0
        assert metrics.throughput_per_hour == 0.0

    def test_table_layout(self):
        result = run_simulation(
            MachineConfig(), single_item_scenario(), seed=1
        )
        table = result.metrics.format_table()
        lines = table.splitlines()
        assert lines[0].split() == [
            "Categories", "Test", "Images", "Classified", "Accuracy", "(%)", "Time", "(Sec)"
        ]
        assert len(lines) == 8  # header, six classes, totals
        assert lines[1].startswith("Plastic")
        assert "Medical waste" in table and "E-waste" in table
        assert lines[-1].startswith("total binned 1, rejected 0")


@given(
    st.lists(
        st.tuples(st.integers(0, 10**9), st.sampled_from(list(trace.ATTR_ORDER))),
        max_size=20,
    )
)
def test_written_traces_always_read_back(pairs):
    """Any monotonically written event stream survives the round trip."""
    pairs.sort(key=lambda p: p[0])
    events = [SimEvent(t, i, kind, {}) for i, (t, kind) in enumerate(pairs)]
    buf = io.StringIO()
    write_trace(buf, HEADER, events)
    buf.seek(0)
    _, parsed = read_trace(buf)
    assert parsed == events

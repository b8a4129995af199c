"""Gateway protocol: session semantics, TCP and WebSocket transport."""

import json
import queue
import socket
import threading
import time

import pytest

from convowaste.classifiers import PerfectClassifier
from convowaste.domain import MachineConfig, WasteClass
from convowaste.gateway import Gateway, GatewaySession
from convowaste.sim import (
    Scenario,
    ScenarioItem,
    SimEngine,
    run_simulation,
    single_item_scenario,
)

FAST = 1000.0  # sim seconds per wall second; whole runs finish in tens of ms


def make_engine(scenario=None) -> SimEngine:
    scenario = scenario or single_item_scenario()
    return SimEngine(MachineConfig(), scenario, PerfectClassifier(), seed=1)


def drain(client, timeout=5.0):
    """Pull messages off a client outbox until the end marker or timeout."""
    out = []
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        try:
            message = client.outbox.get(timeout=deadline - time.monotonic())
        except queue.Empty:
            break
        if message is None:
            break
        out.append(message)
        if message.get("kind") == "end":
            break
    return out

def wait_for(client, kind, timeout=5.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        message = client.outbox.get(timeout=max(0.01, deadline - time.monotonic()))
        if message is not None and message.get("kind") == kind:
            return message
    raise AssertionError(f"no {kind!r} message within {timeout}s")


class TestSessionLive:
    def test_subscribe_hello_events_end(self):
        session = GatewaySession(engine=make_engine(), pace=FAST)
        client = session.attach()
        session.handle_message(client, json.dumps({"v": 1, "kind": "subscribe", "client_id": "t"}))
        session.start()
        assert session.ended.wait(10)
        messages = drain(client)
        kinds = [m["kind"] for m in messages]
        assert kinds[0] == "hello"
        assert messages[0]["mode"] == "live"
        assert messages[0]["header"]["machine_id"] == "M1"
        assert "snapshot" in kinds
        assert kinds[-1] == "end"
        assert messages[-1]["metrics"]["binned_total"] == 1
        events = [m["event"]["kind"] for m in messages if m["kind"] == "event"]
        assert events[0] == "ItemArrived"
        assert "ItemBinned" in events

    def test_unsubscribed_client_gets_no_broadcasts(self):
        session = GatewaySession(engine=make_engine(), pace=FAST)
        client = session.attach()  # never subscribes
        session.start()
        assert session.ended.wait(10)
        assert drain(client, timeout=0.2) == []

    def test_dump_command_acked_with_event_id(self):
        # Long scenario so the command arrives while the run is still live.
        scenario = Scenario(
            items=tuple(ScenarioItem(float(i), WasteClass.PLASTIC) for i in range(40))
        )
        session = GatewaySession(engine=make_engine(scenario), pace=FAST)
        client = session.attach()
        session.handle_message(client, json.dumps({"v": 1, "kind": "subscribe", "client_id": "op"}))
        session.start()
        session.handle_message(
            client, json.dumps({"v": 1, "kind": "dump_bin", "bin": 1, "cmd_id": "k1"})
        )
        ack = wait_for(client, "ack")
        assert ack["cmd_id"] == "k1"
        assert isinstance(ack["event_id"], int)
        assert session.ended.wait(10)
        # The dump shows up in the trace as an operator command from us.
        result = session.engine.result()
        ops = [e for e in result.events if e.kind == "OperatorCommand"]
        assert any(e.attrs["client"] == "op" and e.attrs["command"] == "dump_bin" for e in ops)

    def test_bad_bin_rejected_without_queueing(self):
        session = GatewaySession(engine=make_engine(), pace=FAST)
        client = session.attach()
        session.handle_message(
            client, json.dumps({"v": 1, "kind": "dump_bin", "bin": 9, "cmd_id": "x"})
        )
        err = client.outbox.get(timeout=1)
        assert err["kind"] == "error"
        assert err["code"] == "unknown-bin"
        assert err["cmd_id"] == "x"

    def test_unknown_kind_and_bad_json_and_bad_version(self):
        session = GatewaySession(engine=make_engine(), pace=FAST)
        client = session.attach()
        session.handle_message(client, "not json at all")
        session.handle_message(client, json.dumps({"v": 99, "kind": "subscribe"}))
        session.handle_message(client, json.dumps({"v": 1, "kind": "launch"}))
        codes = [client.outbox.get(timeout=1)["code"] for _ in range(3)]
        assert codes == ["bad-command", "bad-command", "bad-command"]

    def test_command_after_end_is_not_running(self):
        session = GatewaySession(engine=make_engine(), pace=FAST)
        session.start()
        assert session.ended.wait(10)
        client = session.attach()
        session.handle_message(client, json.dumps({"v": 1, "kind": "pause", "cmd_id": "late"}))
        err = client.outbox.get(timeout=1)
        assert err["code"] == "not-running"

    def test_status_after_end_still_answers(self):
        session = GatewaySession(engine=make_engine(), pace=FAST)
        session.start()
        assert session.ended.wait(10)
        client = session.attach()
        session.handle_message(client, json.dumps({"v": 1, "kind": "status"}))
        snap = client.outbox.get(timeout=1)
        assert snap["kind"] == "snapshot"
        assert snap["state"]["bins"][0]["count"] == 1

    def test_notification_broadcast_carries_sms(self):
        scenario = Scenario(
            items=tuple(ScenarioItem(i * 30.0, WasteClass.PLASTIC) for i in range(9))
        )
        session = GatewaySession(engine=make_engine(scenario), pace=10000.0)
        client = session.attach()
        session.handle_message(client, json.dumps({"v": 1, "kind": "subscribe"}))
        session.start()
        assert session.ended.wait(15)
        messages = drain(client)
        notifs = [m for m in messages if m["kind"] == "notification"]
        assert len(notifs) == 1
        assert notifs[0]["bin"] == 1
        assert notifs[0]["sms"].startswith("CONVOWASTE M1 BIN 1 FULL")


@pytest.fixture(scope="module")
def recorded():
    result = run_simulation(
        MachineConfig(), single_item_scenario(), classifier=PerfectClassifier()
    )
    return result.header, result.events


class TestSessionReplay:

    def test_replays_trace_and_rejects_commands(self, recorded):
        session = GatewaySession(replay=recorded, pace=FAST)
        client = session.attach()
        session.handle_message(client, json.dumps({"v": 1, "kind": "subscribe"}))
        assert client.outbox.get(timeout=1)["mode"] == "replay"
        session.handle_message(client, json.dumps({"v": 1, "kind": "dump_bin", "bin": 1}))
        session.start()
        assert session.ended.wait(10)
        messages = drain(client)
        codes = [m.get("code") for m in messages if m["kind"] == "error"]
        assert codes == ["not-running"]
        events = [m["event"]["kind"] for m in messages if m["kind"] == "event"]
        assert events.count("ItemBinned") == 1
        end = [m for m in messages if m["kind"] == "end"]
        assert end and end[0]["metrics"] is None

    def test_replay_snapshot_tracks_counts(self, recorded):
        session = GatewaySession(replay=recorded, pace=FAST)
        session.start()
        assert session.ended.wait(10)
        client = session.attach()
        session.handle_message(client, json.dumps({"v": 1, "kind": "status"}))
        snap = client.outbox.get(timeout=1)
        # LevelSample is authoritative: final reading has one item in bin 1.
        assert snap["state"]["bins"][0]["count"] == 1
        assert snap["state"]["binned_total"] == 1

    def test_needs_exactly_one_source(self, recorded):
        with pytest.raises(ValueError):
            GatewaySession()
        with pytest.raises(ValueError):
            GatewaySession(engine=make_engine(), replay=recorded)
        with pytest.raises(ValueError):
            GatewaySession(engine=make_engine(), pace=0)


class TestTcpTransport:
    def test_full_conversation_over_socket(self):
        gateway = Gateway(
            GatewaySession(engine=make_engine(), pace=FAST), tcp_port=0, ws_port=None
        )
        gateway.start()
        try:
            with socket.create_connection(("127.0.0.1", gateway.tcp_port), timeout=5) as conn:
                conn.sendall(b'{"v":1,"kind":"subscribe","client_id":"tcp-test"}\n')
                reader = conn.makefile("r", encoding="utf-8")
                messages = []
                deadline = time.monotonic() + 10
                while time.monotonic() < deadline:
                    line = reader.readline()
                    if not line:
                        break
                    messages.append(json.loads(line))
                    if messages[-1]["kind"] == "end":
                        break
                kinds = [m["kind"] for m in messages]
                assert kinds[0] == "hello"
                assert "snapshot" in kinds
                assert kinds[-1] == "end"
        finally:
            gateway.stop()

    def test_two_clients_both_see_events(self):
        scenario = Scenario(
            items=tuple(ScenarioItem(float(i * 3), WasteClass.METAL) for i in range(5))
        )
        gateway = Gateway(
            GatewaySession(engine=make_engine(scenario), pace=FAST), tcp_port=0, ws_port=None
        )
        gateway.start()

        def consume(results, index):
            with socket.create_connection(("127.0.0.1", gateway.tcp_port), timeout=5) as conn:
                conn.sendall(b'{"v":1,"kind":"subscribe"}\n')
                reader = conn.makefile("r", encoding="utf-8")
                binned = 0
                deadline = time.monotonic() + 10
                while time.monotonic() < deadline:
                    line = reader.readline()
                    if not line:
                        break
                    message = json.loads(line)
                    if message["kind"] == "event" and message["event"]["kind"] == "ItemBinned":
                        binned += 1
                    if message["kind"] == "end":
                        break
                results[index] = binned

        results = [None, None]
        threads = [
            threading.Thread(target=consume, args=(results, i), daemon=True) for i in range(2)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join(timeout=15)
        gateway.stop()
        assert results == [5, 5]


class TestWebSocketTransport:
    def test_ws_client_round_trip(self):
        from websockets.sync.client import connect

        gateway = Gateway(
            GatewaySession(engine=make_engine(), pace=FAST), tcp_port=0, ws_port=0
        )
        gateway.start()
        try:
            with connect(f"ws://127.0.0.1:{gateway.ws_port}", open_timeout=5) as ws:
                ws.send(json.dumps({"v": 1, "kind": "subscribe", "client_id": "browser"}))
                kinds = []
                deadline = time.monotonic() + 10
                while time.monotonic() < deadline:
                    message = json.loads(ws.recv(timeout=5))
                    kinds.append(message["kind"])
                    if message["kind"] == "end":
                        break
                assert kinds[0] == "hello"
                assert "event" in kinds
                assert kinds[-1] == "end"
        finally:
            gateway.stop()

"""Record a live gateway conversation for the browser-console tests.

Plays the part of the operator console against a real gateway: subscribe,
poll status once per wall tick, and once every item has landed run the
pause -> dump bin 1 -> resume sequence.  Both directions go to an NDJSON
transcript ({"dir": "tx"|"rx", "msg": ...} per line) that the frontend
test suite replays against its view model, so the console is exercised
with genuine wire traffic instead of hand-written samples.

Command ids count up as c1, c2, ... to match the view model's own
generator; the transcript stays replayable as long as that scheme holds.
"""

from __future__ import annotations

import argparse
import json
import socket
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from convowaste.classifiers import PerfectClassifier
from convowaste.domain import MachineConfig, WasteClass
from convowaste.gateway import Gateway, GatewaySession
from convowaste.sim import Scenario, ScenarioItem, SimEngine

CLIENT_ID = "rec1"
PACE = 200.0
POLL_WALL_S = 0.05
ITEMS = 9


def build_session() -> GatewaySession:
    config = MachineConfig(level_sample_period_s=2.0, gsm_success_probability=1.0)
    scenario = Scenario(
        items=tuple(ScenarioItem(t_s=float(i), waste_class=WasteClass.PLASTIC) for i in range(ITEMS)),
        duration_s=170.0,
        name="console-fixture",
    )
    engine = SimEngine(config, scenario, classifier=PerfectClassifier(), seed=7)
    return GatewaySession(engine=engine, pace=PACE)


class Recorder:
    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.buf = bytearray()
        self.lines: list[dict] = []
        self.next_cmd = 1

    def send(self, msg: dict) -> None:
        self.lines.append({"dir": "tx", "msg": msg})
        self.sock.sendall((json.dumps(msg) + "\n").encode())

    def send_command(self, kind: str, bin_index: int | None = None) -> str:
        cmd_id = f"c{self.next_cmd}"
        self.next_cmd += 1
        msg = {"v": 1, "kind": kind, "cmd_id": cmd_id, "client_id": CLIENT_ID}
        if bin_index is not None:
            msg["bin"] = bin_index
        self.send(msg)
        return cmd_id

    def poll(self) -> list[dict]:
        """Receive whatever is queued, recording each message."""
        got = []
        try:
            chunk = self.sock.recv(65536)
        except TimeoutError:
            return got
        if not chunk:
            raise ConnectionError("gateway closed the connection")
        self.buf.extend(chunk)
        while True:
            nl = self.buf.find(b"\n")
            if nl < 0:
                break
            line = self.buf[:nl].decode()
            del self.buf[: nl + 1]
            if not line.strip():
                continue
            msg = json.loads(line)
            self.lines.append({"dir": "rx", "msg": msg})
            got.append(msg)
        return got

    def wait_for(self, kind: str, timeout_s: float = 5.0, **fields) -> dict:
        deadline = time.monotonic() + timeout_s
        while time.monotonic() < deadline:
            for msg in self.poll():
                if msg.get("kind") == kind and all(msg.get(k) == v for k, v in fields.items()):
                    return msg
        raise TimeoutError(f"no {kind} within {timeout_s}s")


def record(out_path: Path) -> None:
    gateway = Gateway(build_session(), tcp_port=0, ws_port=None)
    gateway.start()
    sock = socket.create_connection(("127.0.0.1", gateway.tcp_port))
    sock.settimeout(POLL_WALL_S)
    rec = Recorder(sock)
    try:
        rec.send({"v": 1, "kind": "subscribe", "client_id": CLIENT_ID})
        rec.wait_for("hello")
        dumped = False
        latest: dict | None = None
        ended = False
        last_status = 0.0
        while not ended:
            now = time.monotonic()
            if now - last_status >= POLL_WALL_S:
                last_status = now
                rec.send({"v": 1, "kind": "status"})
            for msg in rec.poll():
                if msg.get("kind") == "snapshot":
                    latest = msg["state"]
                elif msg.get("kind") == "end":
                    ended = True
            # act once the last item has landed so the dump result cannot
            # race a late binning between two of our status polls
            if not dumped and latest is not None and latest["binned_total"] >= ITEMS:
                dumped = True
                cmd = rec.send_command("pause")
                rec.wait_for("ack", cmd_id=cmd)
                rec.send({"v": 1, "kind": "status"})
                rec.wait_for("snapshot")
                cmd = rec.send_command("dump_bin", 1)
                rec.wait_for("ack", cmd_id=cmd)
                rec.send({"v": 1, "kind": "status"})
                rec.wait_for("snapshot")
                cmd = rec.send_command("resume")
                rec.wait_for("ack", cmd_id=cmd)
        if not dumped:
            raise RuntimeError("run ended before all items landed; nothing recorded")
    finally:
        sock.close()
        gateway.stop()

    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w") as fh:
        for line in rec.lines:
            fh.write(json.dumps(line, separators=(",", ":")) + "\n")
    kinds: dict[str, int] = {}
    for line in rec.lines:
        kinds[line["msg"].get("kind", "?")] = kinds.get(line["msg"].get("kind", "?"), 0) + 1
    print(f"wrote {out_path} ({len(rec.lines)} lines): {kinds}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--out",
        default=str(Path(__file__).resolve().parent.parent / "frontend/test/fixtures/gateway_session.ndjson"),
    )
    args = parser.parse_args()
    record(Path(args.out))


if __name__ == "__main__":
    main()

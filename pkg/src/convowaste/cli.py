"""Command-line entry point.

Subcommands:

* ``simulate`` — run a scenario, print a Table-II-style summary, and
  optionally write the trace, metrics and notification log to a
  directory.
* ``report`` — recompute metrics from a saved trace (text or JSON).
* ``serve`` — live simulation session behind the operator gateway.
* ``replay`` — stream a finished trace through the gateway at a
  wall-clock multiple.
* ``frame-dump`` — annotate raw protocol bytes.
* ``gen-scenario`` — write arrival schedules (round-robin or single
  item).

Exit codes: 0 success, 1 simulation or protocol error, 2 bad input or
configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import trace as trace_mod
from .classifiers import PerfectClassifier, ScriptExhausted, StochasticClassifier
from .domain import (
    ALL_CLASSES,
    ConfigError,
    MachineConfig,
    WasteClass,
    apply_overrides,
    load_config,
)
from .gateway import DEFAULT_TCP_PORT, DEFAULT_WS_PORT, Gateway, GatewaySession
from .link import format_frame_dump
from .sim import (
    Scenario,
    SimEngine,
    load_scenario,
    round_robin_scenario,
    run_simulation,
    save_scenario,
    single_item_scenario,
)

EXIT_OK = 0
EXIT_SIM_ERROR = 1
EXIT_USAGE = 2


def _load_machine_config(args: argparse.Namespace) -> MachineConfig:
    config = load_config(args.config) if args.config else MachineConfig()
    if getattr(args, "set", None):
        config = apply_overrides(config, args.set)
    config.validate()
    return config


def _load_scenario_arg(path: str) -> Scenario:
    if not Path(path).exists():
        raise ConfigError(f"scenario file not found: {path}")
    return load_scenario(path)


def _build_classifier(name: str, seed: int, config: MachineConfig):
    if name == "perfect":
        return PerfectClassifier()
    if name == "stochastic":
        return StochasticClassifier(
            seed, confusion=config.confusion, confidence_peak=config.confidence_peak
        )
    raise ConfigError(f"unknown classifier {name!r}")


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = _load_machine_config(args)
    scenario = _load_scenario_arg(args.scenario)
    classifier = _build_classifier(args.classifier, args.seed, config)
    collect = args.out is not None
    result = run_simulation(config, scenario, classifier, seed=args.seed, collect_trace=collect)
    if not args.quiet:
        print(result.metrics.format_table())
        if result.notifications:
            sent = sum(1 for n in result.notifications if n["state"] == "sent")
            print(f"notifications: {len(result.notifications)} ({sent} delivered)")
    if args.out is not None:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        trace_path = out_dir / "trace.ndjson"
        trace_mod.write_trace_file(trace_path, result.header, result.events)
        with open(out_dir / "metrics.json", "w", encoding="utf-8") as fp:
            json.dump(result.metrics.to_dict(), fp, indent=2)
            fp.write("\n")
        with open(out_dir / "notifications.ndjson", "w", encoding="utf-8") as fp:
            for record in result.notifications:
                fp.write(json.dumps(record, separators=(",", ":")) + "\n")
        if not args.quiet:
            print(f"artifacts written to {out_dir}")
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    if not Path(args.trace).exists():
        raise ConfigError(f"trace file not found: {args.trace}")
    metrics = trace_mod.replay_file(args.trace)
    if args.json:
        print(json.dumps(metrics.to_dict(), indent=2))
    else:
        print(metrics.format_table())
    return EXIT_OK


def _serve_gateway(session: GatewaySession, args: argparse.Namespace) -> int:
    gateway = Gateway(session, host=args.host, tcp_port=args.port, ws_port=args.ws_port)
    gateway.start()
    print(f"gateway listening: tcp {args.host}:{gateway.tcp_port}, ws {args.host}:{gateway.ws_port}")
    print(f"mode {session.mode}, pace x{session.pace:g}; Ctrl-C to stop")
    try:
        while True:
            if gateway.wait(0.5) and args.exit_when_done:
                break
    except KeyboardInterrupt:
        pass
    finally:
        gateway.stop()
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    config = _load_machine_config(args)
    scenario = _load_scenario_arg(args.scenario)
    classifier = _build_classifier(args.classifier, args.seed, config)
    engine = SimEngine(config, scenario, classifier, seed=args.seed, collect_trace=True)
    session = GatewaySession(engine=engine, pace=args.pace)
    return _serve_gateway(session, args)


def _cmd_replay(args: argparse.Namespace) -> int:
    if not Path(args.trace).exists():
        raise ConfigError(f"trace file not found: {args.trace}")
    header, events = trace_mod.read_trace_file(args.trace)
    session = GatewaySession(replay=(header, events), pace=args.pace)
    return _serve_gateway(session, args)


def _cmd_frame_dump(args: argparse.Namespace) -> int:
    if args.hex is not None:
        try:
            data = bytes.fromhex(args.hex.replace(" ", ""))
        except ValueError as err:
            raise ConfigError(f"bad hex string: {err}") from None
    else:
        path = Path(args.file)
        if not path.exists():
            raise ConfigError(f"frame file not found: {path}")
        data = path.read_bytes()
    output = format_frame_dump(data)
    if output:
        print(output)
    return EXIT_OK


def _cmd_gen_scenario(args: argparse.Namespace) -> int:
    if args.preset == "round-robin":
        scenario = round_robin_scenario(per_class=args.per_class, spacing_s=args.spacing)
    else:
        waste_class = WasteClass.from_key(args.preset.removeprefix("single-"))
        scenario = single_item_scenario(waste_class)
    if args.duration is not None:
        scenario = Scenario(scenario.items, scenario.commands, args.duration, scenario.name)
    if args.out:
        save_scenario(args.out, scenario)
        print(f"wrote {args.out} ({len(scenario.items)} items)")
    else:
        from .sim import scenario_to_dict

        print(json.dumps(scenario_to_dict(scenario), indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convowaste",
        description="Waste-segregation machine simulator and operator gateway.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="machine config JSON file")
        p.add_argument(
            "--set",
            action="append",
            metavar="KEY=VALUE",
            help="override a config field (repeatable)",
        )
        p.add_argument("--seed", type=int, default=1, help="run seed (default 1)")
        p.add_argument(
            "--classifier",
            choices=("stochastic", "perfect"),
            default="stochastic",
            help="classifier model (default stochastic)",
        )

    p = sub.add_parser("simulate", help="run a scenario and print the summary report")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    add_config_args(p)
    p.add_argument("--out", help="directory for trace.ndjson, metrics.json, notifications.ndjson")
    p.add_argument("--quiet", action="store_true", help="suppress the summary report")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("report", help="recompute metrics from a saved trace")
    p.add_argument("--trace", required=True, help="trace file (.ndjson)")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=_cmd_report)

    def add_gateway_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("--host", default="127.0.0.1")
        p.add_argument("--port", type=int, default=DEFAULT_TCP_PORT, help="TCP command port")
        p.add_argument("--ws-port", type=int, default=DEFAULT_WS_PORT, help="WebSocket port")
        p.add_argument(
            "--pace",
            type=float,
            default=1.0,
            choices=(1.0, 10.0, 100.0),
            help="sim seconds per wall second",
        )
        p.add_argument(
            "--exit-when-done",
            action="store_true",
            help="exit when the session ends instead of waiting for Ctrl-C",
        )

    p = sub.add_parser("serve", help="live simulation behind the operator gateway")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    add_config_args(p)
    add_gateway_args(p)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("replay", help="stream a recorded trace through the gateway")
    p.add_argument("--trace", required=True, help="trace file (.ndjson)")
    add_gateway_args(p)
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("frame-dump", help="annotate raw protocol bytes")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--hex", help="hex string, spaces allowed (e.g. 'AA 06 00 06')")
    source.add_argument("--file", help="binary file of frames")
    p.set_defaults(func=_cmd_frame_dump)

    p = sub.add_parser("gen-scenario", help="write an arrival schedule")
    p.add_argument(
        "--preset",
        default="round-robin",
        choices=["round-robin"] + [f"single-{c.key}" for c in ALL_CLASSES],
        help="schedule shape (default round-robin)",
    )
    p.add_argument("--per-class", type=int, default=50, help="items per class (round-robin)")
    p.add_argument("--spacing", type=float, default=1.0, help="seconds between arrivals")
    p.add_argument("--duration", type=float, help="minimum run duration in seconds")
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=_cmd_gen_scenario)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except trace_mod.MalformedTrace as err:
        print(f"error: malformed trace: {err}", file=sys.stderr)
        return EXIT_SIM_ERROR
    except ScriptExhausted as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_SIM_ERROR


if __name__ == "__main__":
    sys.exit(main())

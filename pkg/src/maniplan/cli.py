"""Headless entry point: run scenarios (optionally with a scripted command
stream), replay recorded live sessions, or launch the live server.

Exit codes: 0 when the task is reached, 2 when the tick budget runs out,
1 on any error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Callable, Optional, Sequence

from .blackboard import (
    IN_PROGRESS,
    REACHED,
    CommandError,
    WorldState,
    compute_metrics,
    configure,
    step,
    target_attained,
)
from .geometry import MeshError
from .scenario_io import (
    Scenario,
    ScenarioError,
    build_world,
    load_scenario,
    summarize,
    trace_record,
    write_trace,
)

log = logging.getLogger(__name__)

DEFAULT_TICK_BUDGET = 10_000


class CliError(Exception):
    """Flag/usage error; reported and mapped to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); the contract wants 1
        raise CliError(message)


class CommandScript:
    """Tick-stamped command stream parsed from a JSON-lines file.

    Each line is {"tick": t, "command": ..., ...}; a line {"tick": n,
    "end": true} marks the recorded session length for replays.
    """

    def __init__(self, by_tick: dict[int, list[dict]], end_tick: Optional[int]):
        self.by_tick = by_tick
        self.end_tick = end_tick

    @staticmethod
    def load(path) -> "CommandScript":
        by_tick: dict[int, list[dict]] = {}
        end_tick: Optional[int] = None
        path = Path(path)
        try:
            lines = path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise CliError(f"cannot read script {path}: {exc}") from exc
        for lineno, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CliError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
            if not isinstance(entry, dict) or not isinstance(entry.get("tick"), int):
                raise CliError(f"{path}:{lineno}: script entries need an integer 'tick'")
            if entry.get("end"):
                end_tick = entry["tick"]
                continue
            if "command" not in entry:
                raise CliError(f"{path}:{lineno}: script entries need a 'command'")
            command = {k: v for k, v in entry.items() if k != "tick"}
            by_tick.setdefault(entry["tick"], []).append(command)
        return CommandScript(by_tick, end_tick)

    @staticmethod
    def empty() -> "CommandScript":
        return CommandScript({}, None)


def run_world(
    world: WorldState,
    max_ticks: int,
    script: Optional[CommandScript] = None,
    on_record: Optional[Callable[[dict], None]] = None,
) -> str:
    """Drive the world for up to max_ticks, applying scripted commands at their
    stamped ticks and recording one trace line per executed tick.

    Mirrors the live session exactly so replays reproduce recorded traces:
    steps on a reached world are no-ops that record nothing, commands applied
    there stay attached to the next advancing tick (a retarget revives the
    run), and the loop ends once the task is reached with no commands left.
    """
    script = script or CommandScript.empty()
    remaining = {tick: list(commands) for tick, commands in script.by_tick.items()}
    pending: list[dict] = []
    while world.tick < max_ticks:
        commands = remaining.pop(world.tick, None)
        if commands:
            for command in commands:
                configure(world, command)  # operator inputs stamp themselves with this tick
            pending.extend(commands)
        elif world.status != IN_PROGRESS:
            break
        before = world.tick
        step(world)
        if world.tick > before:
            if on_record is not None:
                on_record(trace_record(world, pending))
            pending = []
    return world.status


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    world = build_world(scenario)
    script = CommandScript.load(args.script) if args.script else CommandScript.empty()
    records: list[dict] = []
    if args.ticks == 0 and target_attained(compute_metrics(world), world.tolerances) and len(world.target_stack) == 1:
        print("reached after 0 ticks")
        return 0
    status = run_world(world, args.ticks, script, records.append)
    if args.trace:
        write_trace(records, args.trace)
    if args.report and records:
        print(json.dumps(summarize(records), indent=2))
    else:
        print(f"{status} after {world.tick} ticks")
    return 0 if status == REACHED else 2


def _cmd_replay(args) -> int:
    scenario = load_scenario(args.scenario)
    script = CommandScript.load(args.script)
    if script.end_tick is None:
        raise CliError("replay script has no end-of-session marker ({'tick': n, 'end': true})")
    world = build_world(scenario)
    records: list[dict] = []
    run_world(world, script.end_tick, script, records.append)
    write_trace(records, args.trace)
    print(f"replayed {world.tick} ticks -> {args.trace}")
    return 0


def _cmd_serve(args) -> int:
    from . import server  # deferred: pulls in fastapi/uvicorn

    scenario = load_scenario(args.scenario)
    ui_dir = Path(args.ui) if args.ui else None
    if ui_dir is not None and not ui_dir.is_dir():
        raise CliError(f"--ui directory not found: {ui_dir}")
    if args.record:
        record_dir = Path(args.record)
    else:
        # every live session records its trace and command script so it can be
        # replayed headlessly
        import time

        record_dir = Path(f"maniplan-session-{time.strftime('%Y%m%d-%H%M%S')}")
    log.info("recording session to %s", record_dir)
    server.serve(
        scenario,
        host=args.host,
        port=args.port,
        record_dir=record_dir,
        ui_dir=ui_dir,
        broadcast_divisor=args.broadcast_divisor,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="maniplan", description=__doc__)
    sub = parser.add_subparsers(dest="mode", required=True)

    run = sub.add_parser("run", help="run a scenario headlessly")
    run.add_argument("--scenario", required=True, help="scenario JSON file")
    run.add_argument("--ticks", type=int, default=DEFAULT_TICK_BUDGET, help="tick budget")
    run.add_argument("--script", help="JSON-lines command script")
    run.add_argument("--trace", help="trace output path (JSON lines)")
    run.add_argument("--report", action="store_true", help="print a summary report")

    serve = sub.add_parser("serve", help="start the live session server")
    serve.add_argument("--scenario", required=True)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument(
        "--port", type=int, default=int(os.environ.get("MANIPLAN_PORT", "8750"))
    )
    serve.add_argument("--record", help="session recording directory (default: timestamped)")
    serve.add_argument("--ui", help="operator console directory (index.html + dist/)")
    serve.add_argument(
        "--broadcast-divisor", type=int, default=1, help="send every k-th snapshot"
    )

    replay = sub.add_parser("replay", help="reproduce a recorded live session")
    replay.add_argument("--scenario", required=True)
    replay.add_argument("--script", required=True, help="recorded command script")
    replay.add_argument("--trace", required=True, help="where to write the reproduced trace")

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.mode == "run":
            return _cmd_run(args)
        if args.mode == "replay":
            return _cmd_replay(args)
        return _cmd_serve(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except (ScenarioError, MeshError, CommandError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

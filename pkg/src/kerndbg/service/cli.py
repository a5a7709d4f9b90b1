"""kerndbg command line: run, analyze, replay, explore, serve, protocol.

Exit codes: 0 success / no symptoms, 1 no witness (explore), 2 bad input
(parse errors, missing or malformed files), 3 stuck run or symptoms found,
4 budget exhausted, 5 replay divergence or stuck receive.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .. import analysis, rdebug, runtime
from ..lang.parser import KernSyntaxError, parse
from ..trace import (
    TraceFormatError, log_of, log_to_json, pid_name, read_log, read_trace,
    tag_name, write_log, write_trace,
)


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _load_program(path: str):
    p = Path(path)
    if not p.is_file():
        raise CliError(2, f"no such file: {path}")
    try:
        return parse(p.read_text(encoding="utf-8"))
    except KernSyntaxError as exc:
        raise CliError(2, f"{path}:{exc}")


def _sched_from_args(args) -> runtime.SchedulerConfig:
    delivery = runtime.EAGER if args.delivery == "eager" else runtime.LAZY
    if args.sched == "rr":
        return runtime.SchedulerConfig(runtime.RoundRobin(args.fuel), delivery)
    if args.sched == "random":
        return runtime.SchedulerConfig(runtime.RandomPolicy(args.seed), delivery)
    if args.sched == "scripted":
        if not args.script:
            raise CliError(2, "--sched scripted needs --script")
        try:
            choices = read_schedule(args.script)
        except (OSError, json.JSONDecodeError, ValueError) as exc:
            raise CliError(2, f"bad schedule file: {exc}")
        return runtime.SchedulerConfig(runtime.Scripted(choices), delivery)
    raise CliError(2, f"unknown scheduler {args.sched}")


def read_schedule(path) -> tuple[runtime.TransitionChoice, ...]:
    """Schedule file: JSON list of {"proc": "p1"} / {"deliver": ["p1","p2"]}."""
    from ..trace import parse_pid

    with open(path, "r", encoding="utf-8") as fp:
        raw = json.load(fp)
    if not isinstance(raw, list):
        raise ValueError("schedule must be a JSON list")
    out = []
    for entry in raw:
        if "proc" in entry:
            out.append(runtime.ProcChoice(parse_pid(entry["proc"])))
        elif "deliver" in entry:
            sender, target = entry["deliver"]
            out.append(runtime.DeliverChoice(parse_pid(sender), parse_pid(target)))
        else:
            raise ValueError(f"bad schedule entry: {entry!r}")
    return tuple(out)


def write_schedule(path, choices) -> None:
    out = []
    for c in choices:
        if isinstance(c, runtime.ProcChoice):
            out.append({"proc": pid_name(c.pid)})
        else:
            out.append({"deliver": [pid_name(c.sender), pid_name(c.target)]})
    with open(path, "w", encoding="utf-8") as fp:
        json.dump(out, fp, indent=2)
        fp.write("\n")


def cmd_run(args) -> int:
    program = _load_program(args.program)
    if (args.entry, 0) not in program.fundefs:
        raise CliError(2, f"entry function {args.entry}/0 not defined")
    sched = _sched_from_args(args)
    try:
        result = runtime.run(program, args.entry, sched, budget=args.budget)
    except runtime.ScriptError as exc:
        raise CliError(2, str(exc))
    write_trace(args.out, result.events)
    if args.log_out:
        write_log(args.log_out, log_of(result.trace))
    if result.stop_reason == "stuck":
        s = analysis.symptoms(result.trace)
        blocked = ", ".join(pid_name(p) for p in sorted(s.blocked))
        print(f"stuck: blocked processes: {blocked}", file=sys.stderr)
        return 3
    if result.stop_reason == "budget":
        print("budget exhausted", file=sys.stderr)
        return 4
    return 0


def cmd_analyze(args) -> int:
    try:
        loaded = read_trace(args.trace, lenient=args.lenient)
    except (TraceFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    s = analysis.symptoms(loaded.trace)
    sets = analysis.all_race_sets(loaded.trace)
    ordered = [sets[ref] for ref in sorted(sets, key=lambda r: (r.pid, r.index))]
    if args.json:
        payload = {
            "symptoms": s.to_json(),
            "race_sets": [rs.to_json() for rs in ordered],
        }
        if loaded.violations:
            payload["violations"] = [v.message for v in loaded.violations]
        print(json.dumps(payload, indent=2))
    else:
        for v in loaded.violations:
            print(f"warning: {v.message}")
        if not s.any():
            print("no symptoms")
        else:
            if s.blocked:
                print("blocked:", " ".join(pid_name(p) for p in sorted(s.blocked)))
            if s.lost:
                print("lost:", " ".join(tag_name(t) for t in sorted(s.lost)))
            if s.orphan:
                print("orphan:", " ".join(tag_name(t) for t in sorted(s.orphan)))
        for rs in ordered:
            races = "; ".join(
                f"{pid_name(p)}: " + " ".join(tag_name(t) for t in rs.per_sender[p])
                for p in sorted(rs.per_sender)
            )
            print(
                f"race for rec({tag_name(rs.consumed)}) at "
                f"{pid_name(rs.receive.pid)}[{rs.receive.index}]: {races}"
            )
    return 3 if s.any() else 0


def cmd_replay(args) -> int:
    program = _load_program(args.program)
    try:
        log = read_log(args.log)
    except (TraceFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        result = rdebug.replay(program, log, budget=args.budget, entry=args.entry)
    except rdebug.ReplayDivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    if args.out:
        write_trace(args.out, result.session.recorded)
    if result.stuck is not None:
        print(
            f"stuck at receive: {pid_name(result.stuck.pid)} "
            f"cannot consume {tag_name(result.stuck.tag)}",
            file=sys.stderr,
        )
        return 5
    print(f"replayed {result.steps} steps")
    return 0


def cmd_explore(args) -> int:
    program = _load_program(args.program)
    config = analysis.ExploreConfig(
        max_depth=args.depth,
        budget=args.budget,
        seed=args.seed,
        targets=frozenset([args.find]) if args.find else frozenset(),
    )
    report = analysis.explore(program, args.entry, config)
    if args.json:
        print(json.dumps(analysis.report_to_json(report), indent=2))
    else:
        print(f"explored {len(report.explored)} runs, "
              f"{len(report.infeasible)} infeasible variants")
        for kind, lg in sorted(report.witnesses.items()):
            print(f"witness for {kind}:")
            print(json.dumps(log_to_json(lg), indent=2))
    if args.find:
        return 0 if args.find in report.witnesses else 1
    return 0


def cmd_serve(args) -> int:
    from .server import serve

    serve(port=args.port, host=args.host)
    return 0


def cmd_protocol(args) -> int:
    """Line-delimited JSON protocol on stdio, for headless scripting."""
    from .sessions import SessionManager, handle_request

    manager = SessionManager()
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError:
            print(json.dumps({"id": None, "error": {"message": "malformed JSON"}}),
                  flush=True)
            continue
        response, notes = handle_request(manager, request)
        for note in notes:
            print(json.dumps(note, sort_keys=True), flush=True)
        print(json.dumps(response, sort_keys=True), flush=True)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="kerndbg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a program under the tracing runtime")
    p_run.add_argument("program")
    p_run.add_argument("--entry", default="main")
    p_run.add_argument("--sched", choices=["rr", "random", "scripted"], default="rr")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--fuel", type=int, default=1)
    p_run.add_argument("--delivery", choices=["eager", "lazy"], default="eager")
    p_run.add_argument("--budget", type=int, default=runtime.DEFAULT_BUDGET)
    p_run.add_argument("--script", help="schedule file for --sched scripted")
    p_run.add_argument("--out", default="trace.json")
    p_run.add_argument("--log-out", help="also write the extracted log")
    p_run.set_defaults(func=cmd_run)

    p_an = sub.add_parser("analyze", help="report symptoms and race sets of a trace")
    p_an.add_argument("trace")
    fmt = p_an.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true")
    fmt.add_argument("--text", action="store_true")
    p_an.add_argument("--lenient", action="store_true",
                      help="load ill-formed traces, reporting violations")
    p_an.set_defaults(func=cmd_analyze)

    p_rp = sub.add_parser("replay", help="replay a log with the reversible debugger")
    p_rp.add_argument("program")
    p_rp.add_argument("--log", required=True)
    p_rp.add_argument("--entry", default="main")
    p_rp.add_argument("--budget", type=int, default=10_000)
    p_rp.add_argument("--out", help="write the re-recorded trace")
    p_rp.set_defaults(func=cmd_replay)

    p_ex = sub.add_parser("explore", help="systematically explore race variants")
    p_ex.add_argument("program")
    p_ex.add_argument("--entry", default="main")
    p_ex.add_argument("--find", choices=["deadlock", "orphan", "lost"])
    p_ex.add_argument("--depth", type=int, default=3)
    p_ex.add_argument("--seed", type=int, default=0)
    p_ex.add_argument("--budget", type=int, default=20_000)
    p_ex.add_argument("--json", action="store_true")
    p_ex.set_defaults(func=cmd_explore)

    p_sv = sub.add_parser("serve", help="serve the interactive session protocol")
    p_sv.add_argument("--port", type=int, default=8000)
    p_sv.add_argument("--host", default="127.0.0.1")
    p_sv.set_defaults(func=cmd_serve)

    p_pr = sub.add_parser("protocol", help="stdio line-delimited protocol mode")
    p_pr.set_defaults(func=cmd_protocol)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())

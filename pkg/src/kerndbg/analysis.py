"""Trace analysis: failure symptoms, message races, race variants, exploration.

Symptoms are judgments on a finished trace: a process is blocked when its
sequence does not end in exit, a message is lost when sent but never
delivered, orphan when delivered but never consumed.

Two messages race for a receive when both were delivered to the receiving
process, the candidate's delivery does not precede the consumed one's, and
the consumed delivery did not happen-before the candidate's send. These are
potential races: whether the candidate actually matches the receive
patterns is discovered by replaying the corresponding race variant.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

from .lang.ast import Program
from .trace import (
    DeliverA, EventRef, ExitA, Log, RecA, SendA, SpawnA, Trace,
    canonical_log_bytes, canonicalize_log, happened_before, log_of, pid_name,
    precedes, tag_name,
)


@dataclass
class Symptoms:
    blocked: set[int] = field(default_factory=set)
    lost: set[int] = field(default_factory=set)
    orphan: set[int] = field(default_factory=set)

    def any(self) -> bool:
        return bool(self.blocked or self.lost or self.orphan)

    def to_json(self) -> dict:
        return {
            "blocked": [pid_name(p) for p in sorted(self.blocked)],
            "lost": [tag_name(t) for t in sorted(self.lost)],
            "orphan": [tag_name(t) for t in sorted(self.orphan)],
        }


def symptoms(trace: Trace) -> Symptoms:
    out = Symptoms()
    for p in sorted(trace.all_pids()):
        seq = trace.seq(p)
        if not seq or not isinstance(seq[-1], ExitA):
            out.blocked.add(p)
    sent: set[int] = set()
    delivered: set[int] = set()
    consumed: set[int] = set()
    for p in trace.pids():
        for a in trace.seq(p):
            if isinstance(a, SendA):
                sent.add(a.tag)
            elif isinstance(a, DeliverA):
                delivered.add(a.tag)
            elif isinstance(a, RecA):
                consumed.add(a.tag)
    out.lost = sent - delivered
    out.orphan = delivered - consumed
    return out


@dataclass
class RaceSet:
    receive: EventRef
    consumed: int  # the tag actually received
    per_sender: dict[int, list[int]]  # sender pid -> racing tags in send order

    def all_tags(self) -> set[int]:
        return {t for tags in self.per_sender.values() for t in tags}

    def ordered_tags(self) -> list[int]:
        """All racing tags, grouped by sender pid, each group in send order."""
        return [t for p in sorted(self.per_sender) for t in self.per_sender[p]]

    def to_json(self) -> dict:
        return {
            "receive": {
                "pid": pid_name(self.receive.pid),
                "index": self.receive.index,
                "tag": tag_name(self.consumed),
            },
            "races": {
                pid_name(p): [tag_name(t) for t in self.per_sender[p]]
                for p in sorted(self.per_sender)
            },
        }


def race_set(trace: Trace, e_r: EventRef) -> RaceSet:
    """Racing messages for one receive event, grouped per sending process."""
    action = trace.action(e_r)
    if not isinstance(action, RecA):
        raise ValueError(f"event {e_r} is not a receive")
    p = e_r.pid
    tag = action.tag

    deliver_of: dict[int, EventRef] = {}
    send_of: dict[int, EventRef] = {}
    for q in trace.pids():
        for i, a in enumerate(trace.seq(q)):
            if isinstance(a, DeliverA) and q == p:
                deliver_of[a.tag] = EventRef(q, i)
            elif isinstance(a, SendA) and a.to == p:
                send_of[a.tag] = EventRef(q, i)

    e_d = deliver_of.get(tag)
    if e_d is None:
        raise ValueError(f"receive {e_r} has no matching deliver in the trace")

    per_sender: dict[int, list[tuple[int, int]]] = {}
    for other, e_s in send_of.items():
        if other == tag:
            continue
        e_d2 = deliver_of.get(other)
        if e_d2 is None:
            continue  # lost messages have no delivery event to race with
        if precedes(trace, e_d2, e_d):
            continue
        if happened_before(trace, e_d, e_s):
            continue
        per_sender.setdefault(e_s.pid, []).append((e_s.index, other))
    ordered = {
        sender: [t for _, t in sorted(pairs)]
        for sender, pairs in per_sender.items()
    }
    return RaceSet(e_r, tag, ordered)


def all_race_sets(trace: Trace) -> dict[EventRef, RaceSet]:
    """Race sets for every receive event; empty ones are omitted."""
    out: dict[EventRef, RaceSet] = {}
    for p in trace.pids():
        for i, a in enumerate(trace.seq(p)):
            if isinstance(a, RecA):
                rs = race_set(trace, EventRef(p, i))
                if rs.per_sender:
                    out[EventRef(p, i)] = rs
    return out


def race_variant(trace: Trace, e_r: EventRef, new_tag: int) -> Log:
    """Log that replays up to e_r and substitutes the racing message.

    Deletes every event that happened-after the receive, swaps the received
    tag, and projects to a log. The intermediate structure need not be a
    well-formed trace; only the log is the product.
    """
    rs = race_set(trace, e_r)
    if new_tag not in rs.all_tags():
        raise ValueError(
            f"{tag_name(new_tag)} is not in the race set of {e_r}"
        )
    procs: dict[int, tuple] = {}
    for p in trace.pids():
        kept = []
        for i, a in enumerate(trace.seq(p)):
            ref = EventRef(p, i)
            if happened_before(trace, e_r, ref):
                continue
            if ref == e_r:
                kept.append(RecA(new_tag))
            else:
                kept.append(a)
        procs[p] = tuple(kept)
    return log_of(Trace(procs))


# --- systematic exploration -----------------------------------------------------


@dataclass
class ExploreConfig:
    max_depth: int = 3
    budget: int = 20_000  # total transitions across all replays
    seed: int = 0
    targets: frozenset[str] = frozenset()  # subset of {"deadlock", "orphan", "lost"}
    delayed_messages: bool = False  # reserved; only first-matching is implemented


@dataclass
class ExploredRun:
    log: Log
    symptoms: Symptoms
    stop_reason: str


@dataclass
class InfeasibleVariant:
    log: Log
    pid: int
    tag: int  # the substituted tag the replay got stuck on


@dataclass
class ExplorationReport:
    explored: list[ExploredRun] = field(default_factory=list)
    witnesses: dict[str, Log] = field(default_factory=dict)
    frontier_exhausted: bool = True
    infeasible: list[InfeasibleVariant] = field(default_factory=list)


def _witnessed(kinds: frozenset[str], s: Symptoms) -> set[str]:
    out = set()
    if "deadlock" in kinds and s.blocked:
        out.add("deadlock")
    if "orphan" in kinds and s.orphan:
        out.add("orphan")
    if "lost" in kinds and s.lost:
        out.add("lost")
    return out


def explore(
    program: Program,
    entry: str = "main",
    config: ExploreConfig = ExploreConfig(),
) -> ExplorationReport:
    """Depth-first race-variant exploration from one seeded random run.

    Each explored trace contributes race sets; per receive, the racing tags
    are tried in send order and the first feasible variant is followed
    (delayed messages are out of scope, so later matches are not explored).
    Runs are deduplicated by canonical log.
    """
    if config.delayed_messages:
        raise NotImplementedError("delayed-message variants are not implemented")

    from . import rdebug, runtime  # local import: rdebug depends on this module's types

    report = ExplorationReport()
    seen: set[bytes] = set()
    rng = random.Random(config.seed)
    budget_left = config.budget
    targets_left = set(config.targets)

    def record_run(trace: Trace, stop_reason: str) -> bool:
        """Returns True when the run is new."""
        lg = log_of(trace)
        key = canonical_log_bytes(lg)
        if key in seen:
            return False
        seen.add(key)
        s = symptoms(trace)
        report.explored.append(ExploredRun(canonicalize_log(lg), s, stop_reason))
        for kind in sorted(_witnessed(frozenset(config.targets), s)):
            report.witnesses.setdefault(kind, canonicalize_log(lg))
            targets_left.discard(kind)
        return True

    def done() -> bool:
        return bool(config.targets) and not targets_left

    def visit(trace: Trace, depth: int) -> None:
        nonlocal budget_left
        if done() or depth > config.max_depth:
            return
        for ref in sorted(all_race_sets(trace), key=lambda r: (r.pid, r.index)):
            if done():
                return
            rs = race_set(trace, ref)
            for tag in rs.ordered_tags():
                if budget_left <= 0:
                    report.frontier_exhausted = False
                    return
                variant = race_variant(trace, ref, tag)
                res = rdebug.replay(program, variant, budget=budget_left, entry=entry)
                budget_left -= res.steps
                if res.stuck is not None:
                    report.infeasible.append(
                        InfeasibleVariant(variant, res.stuck.pid, res.stuck.tag)
                    )
                    continue  # try the next racing tag in order
                cont = rdebug.continue_free(
                    res.session, seed=rng.getrandbits(32), budget=budget_left
                )
                budget_left -= cont.steps
                new_trace = cont.trace
                if record_run(new_trace, cont.stop_reason):
                    visit(new_trace, depth + 1)
                break  # first matching message only (no delayed messages)

    first = runtime.run(
        program, entry,
        runtime.SchedulerConfig(runtime.RandomPolicy(config.seed), runtime.LAZY),
        budget=min(runtime.DEFAULT_BUDGET, config.budget),
    )
    budget_left -= len(first.events)
    record_run(first.trace, first.stop_reason)
    if not done():
        visit(first.trace, 1)
    if budget_left <= 0:
        report.frontier_exhausted = False
    return report


def report_to_json(report: ExplorationReport) -> dict:
    from .trace import log_to_json

    return {
        "explored": [
            {
                "log": log_to_json(run.log),
                "symptoms": run.symptoms.to_json(),
                "stop_reason": run.stop_reason,
            }
            for run in report.explored
        ],
        "witnesses": {
            kind: log_to_json(lg) for kind, lg in sorted(report.witnesses.items())
        },
        "frontier_exhausted": report.frontier_exhausted,
        "infeasible": [
            {
                "log": log_to_json(iv.log),
                "pid": pid_name(iv.pid),
                "tag": tag_name(iv.tag),
            }
            for iv in report.infeasible
        ],
    }

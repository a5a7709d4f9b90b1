"""Independent test oracles, kept free of the production code paths.

The happened-before oracle builds every base edge by quantifying over all
event pairs and closes with Floyd-Warshall; the race-set oracle checks the
two defining conditions directly for every candidate tag.
"""

from __future__ import annotations

import random

from kerndbg.trace import (
    DeliverA, EventRef, ExitA, RecA, SendA, SpawnA, Trace,
)


def hb_closure_oracle(trace: Trace) -> set[tuple[EventRef, EventRef]]:
    """All happened-before pairs via explicit base edges + transitive closure."""
    events = trace.events()
    actions = {e: trace.action(e) for e in events}
    edges: set[tuple[EventRef, EventRef]] = set()
    for e1 in events:
        a1 = actions[e1]
        for e2 in events:
            if e1 == e2:
                continue
            a2 = actions[e2]
            same = e1.pid == e2.pid
            before = same and e1.index < e2.index
            if (
                before
                and not isinstance(a1, DeliverA)
                and not isinstance(a2, DeliverA)
            ):
                edges.add((e1, e2))  # clause 1
            if (
                before
                and isinstance(a1, DeliverA)
                and isinstance(a2, DeliverA)
                and a1.tag != a2.tag
            ):
                edges.add((e1, e2))  # clause 2
            if isinstance(a1, SpawnA) and a1.child == e2.pid:
                edges.add((e1, e2))  # clause 3
            if (
                isinstance(a1, SendA)
                and isinstance(a2, DeliverA)
                and a1.tag == a2.tag
            ):
                edges.add((e1, e2))  # clause 4
            if (
                isinstance(a1, DeliverA)
                and isinstance(a2, RecA)
                and a1.tag == a2.tag
            ):
                edges.add((e1, e2))  # clause 5
            if same and isinstance(a2, ExitA) and e1 != e2:
                edges.add((e1, e2))  # clause 6
    # Floyd-Warshall style closure
    succ: dict[EventRef, set[EventRef]] = {e: set() for e in events}
    for a, b in edges:
        succ[a].add(b)
    changed = True
    while changed:
        changed = False
        for a in events:
            new = set()
            for b in succ[a]:
                new |= succ[b]
            if not new <= succ[a]:
                succ[a] |= new
                changed = True
    return {(a, b) for a in events for b in succ[a]}


def race_set_oracle(trace: Trace, e_r: EventRef) -> dict[int, list[int]]:
    """Direct check of the two race conditions over every other message."""
    hb = hb_closure_oracle(trace)
    rec_action = trace.action(e_r)
    assert isinstance(rec_action, RecA)
    p = e_r.pid
    tag = rec_action.tag

    def find(pred):
        for q in trace.pids():
            for i, a in enumerate(trace.seq(q)):
                if pred(q, a):
                    return EventRef(q, i)
        return None

    e_d = find(lambda q, a: q == p and isinstance(a, DeliverA) and a.tag == tag)
    assert e_d is not None
    racers: dict[int, list[tuple[int, int]]] = {}
    all_tags = {
        a.tag
        for q in trace.pids()
        for a in trace.seq(q)
        if isinstance(a, (SendA, DeliverA, RecA))
    }
    for other in sorted(all_tags):
        if other == tag:
            continue
        e_s = find(lambda q, a: isinstance(a, SendA) and a.tag == other and a.to == p)
        e_d2 = find(lambda q, a: q == p and isinstance(a, DeliverA) and a.tag == other)
        if e_s is None or e_d2 is None:
            continue
        if e_d2.pid == e_d.pid and e_d2.index < e_d.index:
            continue  # delivery precedes the consumed delivery
        if (e_d, e_s) in hb:
            continue  # consumed delivery happened before the candidate send
        racers.setdefault(e_s.pid, []).append((e_s.index, other))
    return {q: [t for _, t in sorted(v)] for q, v in racers.items()}


def random_well_formed_trace(rng: random.Random, max_events: int = 50) -> Trace:
    """Simulate an abstract run; well-formed by construction."""
    seqs: dict[int, list] = {1: []}
    alive = {1}
    next_pid = 2
    next_tag = 1
    in_network: list[tuple[int, int]] = []  # (tag, target)
    undelivered_of: dict[int, int] = {}  # tag -> target
    unconsumed: dict[int, list[int]] = {1: []}  # pid -> delivered, unconsumed tags

    n = rng.randint(0, max_events)
    for _ in range(n):
        moves = []
        if alive:
            moves += ["spawn"] + ["send"] * 3 + ["exit"]
        deliverable = [(t, p) for (t, p) in in_network if p in alive]
        if deliverable:
            moves += ["deliver"] * 3
        receivable = [p for p in alive if unconsumed.get(p)]
        if receivable:
            moves += ["rec"] * 3
        if not moves:
            break
        move = rng.choice(moves)
        if move == "spawn":
            parent = rng.choice(sorted(alive))
            child = next_pid
            next_pid += 1
            seqs[parent].append(SpawnA(child))
            seqs[child] = []
            alive.add(child)
            unconsumed[child] = []
        elif move == "send":
            sender = rng.choice(sorted(alive))
            target = rng.choice(sorted(seqs))  # may be dead: a lost message
            tag = next_tag
            next_tag += 1
            seqs[sender].append(SendA(tag, target))
            in_network.append((tag, target))
        elif move == "deliver":
            tag, target = rng.choice(deliverable)
            in_network.remove((tag, target))
            seqs[target].append(DeliverA(tag))
            unconsumed[target].append(tag)
        elif move == "rec":
            p = rng.choice(receivable)
            tag = rng.choice(unconsumed[p])  # selective: any delivered message
            unconsumed[p].remove(tag)
            seqs[p].append(RecA(tag))
        elif move == "exit":
            p = rng.choice(sorted(alive))
            seqs[p].append(ExitA())
            alive.remove(p)
    return Trace({p: tuple(s) for p, s in seqs.items()})

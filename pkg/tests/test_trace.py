import json
import random

import pytest

from kerndbg.trace import (
    DeliverA, Event, EventRef, ExitA, Log, MalformedTraceError, RecA, SendA,
    SendLogA, SpawnA, Trace, TraceFormatError, canonical_log_bytes,
    canonicalize, canonicalize_log, events_from_json, events_to_json,
    happened_before, independent, log_equal, log_of, precedes, read_trace,
    trace_equal, trace_of_events, well_formed, write_trace,
)

from oracles import hb_closure_oracle, random_well_formed_trace


def star() -> Trace:
    """The worked three-process example: one consumed message, two orphans."""
    return Trace({
        1: (SpawnA(2), SpawnA(3), SendA(1, 2), ExitA()),
        2: (DeliverA(1), RecA(1), DeliverA(2), DeliverA(3)),
        3: (SendA(2, 2), SendA(3, 2), ExitA()),
    })


def renamed_star() -> Trace:
    # same shape with pids {9 -> root, 4, 7} and tags {5, 8, 6}
    return Trace({
        9: (SpawnA(4), SpawnA(7), SendA(5, 4), ExitA()),
        4: (DeliverA(5), RecA(5), DeliverA(8), DeliverA(6)),
        7: (SendA(8, 4), SendA(6, 4), ExitA()),
    })


def fig1c_trace() -> Trace:
    return Trace({
        1: (SpawnA(2), SpawnA(3), SendA(1, 2), ExitA()),
        2: (DeliverA(2), DeliverA(1), RecA(1), DeliverA(3)),
        3: (SendA(2, 2), SendA(3, 2), ExitA()),
    })


# --- well-formedness ---------------------------------------------------------------


def test_star_is_well_formed():
    assert well_formed(star()) == []


def test_rec_without_deliver():
    t = Trace({1: (SpawnA(2), SendA(1, 2)), 2: (RecA(1),)})
    assert any(v.rule == "rec-delivered" for v in well_formed(t))


def test_duplicate_send_tag():
    t = Trace({1: (SendA(1, 1), SendA(1, 1))})
    assert any(v.rule == "tag-unique" for v in well_formed(t))


def test_deliver_without_send():
    t = Trace({1: (DeliverA(1),)})
    assert any(v.rule == "deliver-sent" for v in well_formed(t))


def test_deliver_to_wrong_target():
    t = Trace({1: (SpawnA(2), SendA(1, 2), DeliverA(1))})
    assert any(v.rule == "deliver-sent" for v in well_formed(t))


def test_exit_must_be_last():
    t = Trace({1: (ExitA(), SendA(1, 1))})
    assert any(v.rule == "exit-last" for v in well_formed(t))


def test_double_spawn():
    t = Trace({1: (SpawnA(2), SpawnA(2))})
    assert any(v.rule == "spawn-unique" for v in well_formed(t))


def test_second_root_flagged():
    t = Trace({1: (ExitA(),), 5: (ExitA(),)})
    assert any(v.rule == "spawn-missing" for v in well_formed(t))


def test_random_traces_are_well_formed():
    rng = random.Random(7)
    for _ in range(200):
        assert well_formed(random_well_formed_trace(rng)) == []


# --- log extraction ---------------------------------------------------------------


def test_log_of_star():
    lg = log_of(star())
    assert lg == Log({
        1: (SpawnA(2), SpawnA(3), SendLogA(1)),
        2: (RecA(1),),
        3: (SendLogA(2), SendLogA(3)),
    })


def test_log_of_trivial_exit():
    assert log_of(Trace({1: (ExitA(),)})) == Log({1: ()})


def test_fig1b_and_fig1c_have_the_same_log():
    assert log_equal(log_of(star()), log_of(fig1c_trace()))


# --- precedes ----------------------------------------------------------------------


def test_precedes_within_pid():
    t = star()
    assert precedes(t, EventRef(2, 0), EventRef(2, 1)) is True
    assert precedes(t, EventRef(2, 1), EventRef(2, 0)) is False


def test_precedes_undefined_across_pids():
    t = star()
    assert precedes(t, EventRef(1, 2), EventRef(3, 0)) is None


def test_precedes_validates_refs():
    with pytest.raises(IndexError):
        precedes(star(), EventRef(1, 99), EventRef(1, 0))


# --- happened-before ---------------------------------------------------------------


def test_send_hb_rec_via_deliver():
    t = star()
    send_l1 = EventRef(1, 2)
    rec_l1 = EventRef(2, 1)
    assert happened_before(t, send_l1, rec_l1)
    assert not happened_before(t, rec_l1, send_l1)


def test_deliver_and_rec_of_different_tags_independent():
    t = star()
    deliver_l2 = EventRef(2, 2)
    rec_l1 = EventRef(2, 1)
    assert not happened_before(t, deliver_l2, rec_l1)
    assert not happened_before(t, rec_l1, deliver_l2)
    assert independent(t, deliver_l2, rec_l1)


def test_same_pid_delivers_ordered():
    t = star()
    assert happened_before(t, EventRef(2, 2), EventRef(2, 3))
    assert not independent(t, EventRef(2, 2), EventRef(2, 3))


def test_spawn_hb_child_actions():
    t = star()
    spawn_p3 = EventRef(1, 1)
    send_l2 = EventRef(3, 0)
    assert happened_before(t, spawn_p3, send_l2)


def test_sends_of_different_pids_independent():
    t = star()
    assert independent(t, EventRef(1, 2), EventRef(3, 0))


def test_delivers_hb_exit_clause6():
    # all actions of a process precede its exit, delivers included
    t = Trace({
        1: (SpawnA(2), SendA(1, 2), ExitA()),
        2: (DeliverA(1), ExitA()),
    })
    assert happened_before(t, EventRef(2, 0), EventRef(2, 1))


def test_hb_matches_oracle_small():
    for t in (star(), fig1c_trace()):
        oracle = hb_closure_oracle(t)
        events = t.events()
        for e1 in events:
            for e2 in events:
                if e1 == e2:
                    continue
                assert happened_before(t, e1, e2) == ((e1, e2) in oracle), (e1, e2)


def test_hb_is_strict_partial_order_on_random_traces():
    rng = random.Random(11)
    for _ in range(60):
        t = random_well_formed_trace(rng, max_events=30)
        events = t.events()
        for e in events:
            assert not happened_before(t, e, e)
        for e1 in events:
            for e2 in events:
                if happened_before(t, e1, e2):
                    assert not happened_before(t, e2, e1)  # antisymmetry
                    for e3 in events:
                        if happened_before(t, e2, e3):
                            assert happened_before(t, e1, e3)  # transitivity


# --- canonicalization ------------------------------------------------------------


def test_canonicalize_renamed_star():
    assert canonicalize(renamed_star()) == star()


def test_canonicalize_idempotent():
    t = canonicalize(renamed_star())
    assert canonicalize(t) == t


def test_fig1b_fig1c_traces_differ():
    assert not trace_equal(star(), fig1c_trace())


def test_trace_equal_under_renaming():
    assert trace_equal(star(), renamed_star())


def test_multiple_roots_rejected():
    with pytest.raises(MalformedTraceError):
        canonicalize(Trace({1: (ExitA(),), 5: (ExitA(),)}))


def test_log_canonicalization_commutes_with_log_of():
    rng = random.Random(23)
    for _ in range(100):
        t = random_well_formed_trace(rng, max_events=30)
        if not t.seq(1):
            continue
        left = canonicalize_log(log_of(canonicalize(t)))
        right = canonicalize_log(log_of(t))
        assert left == right


def test_trace_equal_is_equivalence_on_random_renamings():
    rng = random.Random(5)
    for _ in range(50):
        t = random_well_formed_trace(rng, max_events=25)
        if not t.seq(1):
            continue
        pids = sorted(t.all_pids())
        tags = sorted(
            a.tag for s in t.procs.values() for a in s if isinstance(a, SendA)
        )
        pid_perm = dict(zip(pids, rng.sample([p + 100 for p in pids], len(pids))))
        tag_perm = dict(zip(tags, rng.sample([g + 500 for g in tags], len(tags))))

        def rn(a):
            if isinstance(a, SpawnA):
                return SpawnA(pid_perm[a.child])
            if isinstance(a, SendA):
                return SendA(tag_perm[a.tag], pid_perm[a.to])
            if isinstance(a, DeliverA):
                return DeliverA(tag_perm[a.tag])
            if isinstance(a, RecA):
                return RecA(tag_perm[a.tag])
            return a

        renamed = Trace({pid_perm[p]: tuple(rn(a) for a in s) for p, s in t.procs.items()})
        assert trace_equal(t, renamed)
        assert trace_equal(renamed, t)
        assert trace_equal(t, t)


# --- serialization ----------------------------------------------------------------


def star_events() -> list[Event]:
    return [
        Event(1, SpawnA(2)),
        Event(1, SpawnA(3)),
        Event(1, SendA(1, 2)),
        Event(1, ExitA()),
        Event(2, DeliverA(1)),
        Event(2, RecA(1)),
        Event(3, SendA(2, 2)),
        Event(3, SendA(3, 2)),
        Event(3, ExitA()),
        Event(2, DeliverA(2)),
        Event(2, DeliverA(3)),
    ]


def test_trace_roundtrip_bit_exact(tmp_path):
    path = tmp_path / "t.json"
    write_trace(path, star_events())
    first = path.read_bytes()
    loaded = read_trace(path)
    assert loaded.trace == star()
    write_trace(path, loaded.events)
    assert path.read_bytes() == first


def test_trace_json_field_names():
    payload = events_to_json(star_events())
    assert payload["version"] == 1
    assert payload["events"][0] == {"pid": "p1", "action": {"kind": "spawn", "child": "p2"}}
    assert payload["events"][2] == {"pid": "p1", "action": {"kind": "send", "tag": "l1", "to": "p2"}}
    assert payload["events"][4] == {"pid": "p2", "action": {"kind": "deliver", "tag": "l1"}}
    assert payload["events"][5] == {"pid": "p2", "action": {"kind": "rec", "tag": "l1"}}
    assert payload["events"][3] == {"pid": "p1", "action": {"kind": "exit"}}


def test_unknown_kind_names_event_index():
    payload = events_to_json(star_events())
    payload["events"][4]["action"] = {"kind": "teleport", "tag": "l1"}
    with pytest.raises(TraceFormatError, match="event 4"):
        events_from_json(payload)


def test_lenient_load_reports_violations(tmp_path):
    events = star_events() + [Event(3, SendA(2, 2))]  # duplicate tag, after exit
    path = tmp_path / "bad.json"
    import json as _json
    with open(path, "w") as fp:
        _json.dump(events_to_json(events), fp)
    with pytest.raises(TraceFormatError):
        read_trace(path)
    loaded = read_trace(path, lenient=True)
    assert loaded.violations
    assert any(v.rule == "tag-unique" for v in loaded.violations)


def test_malformed_json(tmp_path):
    path = tmp_path / "junk.json"
    path.write_text("{nope")
    with pytest.raises(TraceFormatError, match="malformed JSON"):
        read_trace(path)


def test_canonical_log_bytes_stable_under_renaming():
    assert canonical_log_bytes(log_of(star())) == canonical_log_bytes(log_of(renamed_star()))


def test_log_json_shape_matches_interface():
    from kerndbg.trace import log_to_json
    payload = log_to_json(log_of(star()))
    assert payload == {
        "version": 1,
        "log": {
            "p1": [
                {"kind": "spawn", "child": "p2"},
                {"kind": "spawn", "child": "p3"},
                {"kind": "send", "tag": "l1"},
            ],
            "p2": [{"kind": "rec", "tag": "l1"}],
            "p3": [{"kind": "send", "tag": "l2"}, {"kind": "send", "tag": "l3"}],
        },
    }

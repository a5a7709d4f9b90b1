// Golden render tests over a recorded snapshot stream (see
// scripts/record_ui_fixture.py in the repository root). The UI is a pure
// function of the latest snapshot plus local annotations: rendering the
// same state twice must produce identical markup, and replaying the
// recorded stream must match the committed snapshots exactly.

import { readFileSync } from "node:fs";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { SessionStore } from "../src/model.js";
import {
  parseAction, renderApp, renderSession, renderTimeline,
} from "../src/render.js";
import type { Notification, Prerequisite, RaceSetView, Snapshot } from "../src/types.js";

interface Fixture {
  notifications: Notification[];
  race_sets: { race_sets: RaceSetView[] };
  blocked: {
    error: {
      message: string;
      prerequisites: string[];
      prerequisites_struct: Prerequisite[];
    };
  };
}

const fixture: Fixture = JSON.parse(
  readFileSync(join(__dirname, "fixtures", "snapshot_stream.json"), "utf-8")
);

function lastSnapshotOf(session: string): Snapshot {
  const mine = fixture.notifications.filter((n) => n.params.session === session);
  return mine[mine.length - 1].params;
}

describe("parseAction", () => {
  it("parses every action shape", () => {
    expect(parseAction("spawn(p2)")).toEqual({ kind: "spawn", child: "p2" });
    expect(parseAction("send(l1,p2)")).toEqual({ kind: "send", tag: "l1", target: "p2" });
    expect(parseAction("deliver(l1)")).toEqual({ kind: "deliver", tag: "l1" });
    expect(parseAction("rec(l1)")).toEqual({ kind: "rec", tag: "l1" });
    expect(parseAction("exit")).toEqual({ kind: "exit" });
  });
});

describe("timeline", () => {
  it("draws one dashed lifeline per process and arrows per message", () => {
    const snap = lastSnapshotOf("s1");
    const svg = renderTimeline(snap);
    const lifelines = svg.match(/class="lifeline"/g) ?? [];
    expect(lifelines.length).toBe(snap.processes.length);
    // delivery arrows are dotted, send->rec arrows are solid (distinct classes)
    expect(svg).toContain('class="deliver-arrow"');
    expect(svg).toContain('class="rec-arrow"');
    // the consumed message's tag labels the solid arrow
    expect(svg).toContain(">l1</text>");
  });

  it("is a pure function of the snapshot", () => {
    const snap = lastSnapshotOf("s1");
    expect(renderTimeline(snap)).toBe(renderTimeline(snap));
  });
});

describe("session rendering", () => {
  it("renders the race panel with one fork control per racing tag", () => {
    const store = new SessionStore();
    store.applySnapshot(lastSnapshotOf("s1"));
    store.setRaceSets("s1", fixture.race_sets.race_sets);
    const html = renderSession(store.get("s1")!);
    expect(html).toContain('data-action="fork" data-pid="p2" data-index="3" data-tag="l2"');
    expect(html).toContain('data-action="fork" data-pid="p2" data-index="3" data-tag="l3"');
  });

  it("renders blocked-undo guidance as clickable items", () => {
    const store = new SessionStore();
    store.applySnapshot(lastSnapshotOf("s2"));
    store.setGuidance(
      "s2",
      fixture.blocked.error.prerequisites_struct,
      fixture.blocked.error.prerequisites
    );
    const html = renderSession(store.get("s2")!);
    expect(html).toContain("Undo blocked");
    expect(html).toContain('data-action="resolve"');
    expect(html).toContain("undo deliver(l1) on p2");
  });

  it("marks stuck forked sessions on their tab", () => {
    const store = new SessionStore();
    store.applySnapshot(lastSnapshotOf("s1"));
    store.applySnapshot(lastSnapshotOf("s3"));
    store.markStuck("s3");
    const html = renderApp(store);
    expect(html).toContain('class="badge stuck"');
    // a forked session's tab shows its parent as a breadcrumb
    expect(html).toContain("s1 &rsaquo;");
  });

  it("escapes markup in payload text", () => {
    const store = new SessionStore();
    const snap = lastSnapshotOf("s1");
    const evil: Snapshot = {
      ...snap,
      processes: [
        {
          pid: "p1",
          status: "running",
          mailbox: [{ tag: "l1", value: "<script>alert(1)</script>" }],
          history_len: 0,
          next_log: null,
        },
      ],
    };
    const store2 = new SessionStore();
    store2.applySnapshot({ ...evil, session: "sx", seq: 1 });
    const html = renderApp(store2);
    expect(html).not.toContain("<script>alert(1)</script>");
    expect(html).toContain("&lt;script&gt;");
    void store;
  });
});

describe("recorded stream golden", () => {
  it("replaying the snapshot stream renders identical markup", () => {
    const store = new SessionStore();
    const frames: string[] = [];
    for (const note of fixture.notifications) {
      const applied = store.applySnapshot(note.params);
      if (!applied) continue;
      store.active = note.params.session;
      frames.push(renderApp(store));
    }
    expect(frames.length).toBeGreaterThanOrEqual(5);
    expect(frames.join("\n<!-- frame -->\n")).toMatchSnapshot();
  });
});

import { describe, expect, it } from "vitest";

import { SessionStore } from "../src/model.js";
import type { Snapshot } from "../src/types.js";

function snap(session: string, seq: number, mode = "replay"): Snapshot {
  return {
    session,
    seq,
    mode,
    parent: null,
    processes: [],
    network: [],
    log_remaining: {},
    events: [],
  };
}

describe("SessionStore", () => {
  it("applies monotone snapshots and discards stale ones", () => {
    const store = new SessionStore();
    expect(store.applySnapshot(snap("s1", 1))).toBe(true);
    expect(store.applySnapshot(snap("s1", 3))).toBe(true);
    expect(store.applySnapshot(snap("s1", 2))).toBe(false); // stale
    expect(store.applySnapshot(snap("s1", 3))).toBe(false); // duplicate
    expect(store.get("s1")!.snapshot.seq).toBe(3);
  });

  it("first session becomes active; tabs keep arrival order", () => {
    const store = new SessionStore();
    store.applySnapshot(snap("s1", 1));
    store.applySnapshot(snap("s2", 1));
    expect(store.active).toBe("s1");
    expect(store.order).toEqual(["s1", "s2"]);
  });

  it("annotations survive snapshot updates", () => {
    const store = new SessionStore();
    store.applySnapshot(snap("s1", 1));
    store.markStuck("s1");
    store.setRaceSets("s1", [
      { receive: { pid: "p2", index: 3, tag: "l1" }, races: { p3: ["l2"] } },
    ]);
    store.applySnapshot(snap("s1", 2));
    expect(store.get("s1")!.stuck).toBe(true);
    expect(store.get("s1")!.raceSets.length).toBe(1);
  });

  it("closing the active session falls back to the newest remaining", () => {
    const store = new SessionStore();
    store.applySnapshot(snap("s1", 1));
    store.applySnapshot(snap("s2", 1));
    store.active = "s2";
    store.close("s2");
    expect(store.active).toBe("s1");
    store.close("s1");
    expect(store.active).toBeNull();
  });
});

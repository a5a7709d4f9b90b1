// Client-side session state: the latest snapshot per session plus the
// UI-only annotations (race sets, stuck badges, undo guidance). Stale
// snapshots are discarded by sequence number, so rendering is always a
// function of the newest server state.

import type { Prerequisite, RaceSetView, Snapshot } from "./types.js";

export interface SessionView {
  snapshot: Snapshot;
  raceSets: RaceSetView[];
  stuck: boolean;
  guidance: Prerequisite[];
  guidanceText: string[];
}

export class SessionStore {
  readonly sessions = new Map<string, SessionView>();
  readonly order: string[] = [];
  active: string | null = null;
  banner: string | null = null;

  applySnapshot(snap: Snapshot): boolean {
    const existing = this.sessions.get(snap.session);
    if (existing && snap.seq <= existing.snapshot.seq) {
      return false; // stale or duplicate
    }
    if (existing) {
      existing.snapshot = snap;
    } else {
      this.sessions.set(snap.session, {
        snapshot: snap,
        raceSets: [],
        stuck: false,
        guidance: [],
        guidanceText: [],
      });
      this.order.push(snap.session);
      if (this.active === null) {
        this.active = snap.session;
      }
    }
    return true;
  }

  get(id: string): SessionView | undefined {
    return this.sessions.get(id);
  }

  activeView(): SessionView | undefined {
    return this.active ? this.sessions.get(this.active) : undefined;
  }

  setRaceSets(id: string, sets: RaceSetView[]): void {
    const view = this.sessions.get(id);
    if (view) view.raceSets = sets;
  }

  setGuidance(id: string, struct: Prerequisite[], text: string[]): void {
    const view = this.sessions.get(id);
    if (view) {
      view.guidance = struct;
      view.guidanceText = text;
    }
  }

  clearGuidance(id: string): void {
    this.setGuidance(id, [], []);
  }

  markStuck(id: string): void {
    const view = this.sessions.get(id);
    if (view) view.stuck = true;
  }

  close(id: string): void {
    this.sessions.delete(id);
    const i = this.order.indexOf(id);
    if (i >= 0) this.order.splice(i, 1);
    if (this.active === id) {
      this.active = this.order.length ? this.order[this.order.length - 1] : null;
    }
  }
}

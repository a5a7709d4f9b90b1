// Pure snapshot -> HTML/SVG rendering. No DOM access, no client-side
// semantics: race sets, guards and statuses all come from the server
// payloads, so the same snapshot always renders the same markup.

import type { SessionStore, SessionView } from "./model.js";
import type { ProcView, QueueView, Snapshot } from "./types.js";

export function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export interface ParsedAction {
  kind: "spawn" | "exit" | "send" | "deliver" | "rec";
  tag?: string;
  target?: string;
  child?: string;
}

export function parseAction(action: string): ParsedAction {
  const m = action.match(/^(\w+)(?:\(([^)]*)\))?$/);
  if (!m) throw new Error(`unparseable action: ${action}`);
  const kind = m[1] as ParsedAction["kind"];
  const args = m[2] ? m[2].split(",") : [];
  if (kind === "spawn") return { kind, child: args[0] };
  if (kind === "send") return { kind, tag: args[0], target: args[1] };
  if (kind === "deliver" || kind === "rec") return { kind, tag: args[0] };
  return { kind };
}

// --- timeline (sequence diagram) --------------------------------------------------

const LANE_W = 110;
const ROW_H = 26;
const TOP = 34;

interface TagRows {
  sendRow?: number;
  sendLane?: number;
  deliverRow?: number;
  recRow?: number;
  targetLane?: number;
}

export function renderTimeline(snapshot: Snapshot): string {
  const pids: string[] = [];
  for (const p of snapshot.processes) pids.push(p.pid);
  for (const ev of snapshot.events) {
    if (!pids.includes(ev.pid)) pids.push(ev.pid);
  }
  const lane = new Map(pids.map((p, i) => [p, 40 + i * LANE_W]));
  const height = TOP + snapshot.events.length * ROW_H + 20;
  const width = 40 + pids.length * LANE_W + 40;

  const parts: string[] = [];
  parts.push(
    `<svg class="timeline" viewBox="0 0 ${width} ${height}" width="${width}" height="${height}">`,
    `<defs><marker id="arrow" markerWidth="8" markerHeight="8" refX="7" refY="4" orient="auto">` +
      `<path d="M0,0 L8,4 L0,8 z"/></marker></defs>`
  );
  for (const p of pids) {
    const x = lane.get(p)!;
    parts.push(
      `<text class="pid-label" x="${x}" y="18" text-anchor="middle">${escapeHtml(p)}</text>`,
      `<line class="lifeline" x1="${x}" y1="${TOP - 8}" x2="${x}" y2="${height - 8}"/>`
    );
  }

  const byTag = new Map<string, TagRows>();
  snapshot.events.forEach((ev, i) => {
    const a = parseAction(ev.action);
    if (!a.tag) return;
    const rows = byTag.get(a.tag) ?? {};
    if (a.kind === "send") {
      rows.sendRow = i;
      rows.sendLane = lane.get(ev.pid);
      rows.targetLane = a.target ? lane.get(a.target) : undefined;
    } else if (a.kind === "deliver") {
      rows.deliverRow = i;
      rows.targetLane = lane.get(ev.pid);
    } else if (a.kind === "rec") {
      rows.recRow = i;
      rows.targetLane = lane.get(ev.pid);
    }
    byTag.set(a.tag, rows);
  });

  // dotted arrows: send -> deliver (message delivery); solid: send -> rec
  for (const [tag, rows] of [...byTag.entries()].sort()) {
    if (rows.sendRow === undefined || rows.sendLane === undefined) continue;
    const y1 = TOP + rows.sendRow * ROW_H;
    if (rows.deliverRow !== undefined && rows.targetLane !== undefined) {
      const y2 = TOP + rows.deliverRow * ROW_H;
      parts.push(
        `<line class="deliver-arrow" x1="${rows.sendLane}" y1="${y1}" ` +
          `x2="${rows.targetLane}" y2="${y2}" marker-end="url(#arrow)"/>`
      );
    }
    if (rows.recRow !== undefined && rows.targetLane !== undefined) {
      const y2 = TOP + rows.recRow * ROW_H;
      parts.push(
        `<line class="rec-arrow" x1="${rows.sendLane}" y1="${y1}" ` +
          `x2="${rows.targetLane}" y2="${y2}" marker-end="url(#arrow)"/>`
      );
      const midx = (rows.sendLane + rows.targetLane) / 2;
      parts.push(
        `<text class="tag-label" x="${midx}" y="${(y1 + y2) / 2 - 4}" ` +
          `text-anchor="middle">${escapeHtml(tag)}</text>`
      );
    }
  }

  snapshot.events.forEach((ev, i) => {
    const x = lane.get(ev.pid)!;
    const y = TOP + i * ROW_H;
    const a = parseAction(ev.action);
    parts.push(
      `<circle class="event-dot kind-${a.kind}" cx="${x}" cy="${y}" r="4"/>`,
      `<text class="event-label" x="${x + 8}" y="${y + 4}">${escapeHtml(ev.action)}</text>`
    );
  });
  parts.push("</svg>");
  return parts.join("");
}

// --- panes ------------------------------------------------------------------------

function mailboxHtml(proc: ProcView): string {
  if (!proc.mailbox.length) return `<span class="empty">empty</span>`;
  return proc.mailbox
    .map(
      (m) =>
        `<span class="msg" title="${escapeHtml(m.value)}">${escapeHtml(m.tag)}=` +
        `${escapeHtml(m.value)}</span>`
    )
    .join(" ");
}

export function renderProcesses(snapshot: Snapshot): string {
  const cards = snapshot.processes.map((proc) => {
    const stepFwd =
      proc.status === "exited"
        ? `<button disabled title="nothing enabled">step</button>`
        : `<button data-action="step_fwd" data-pid="${proc.pid}">step</button>`;
    const stepBwd =
      proc.history_len === 0
        ? `<button disabled title="nothing to undo">undo</button>`
        : `<button data-action="step_bwd" data-pid="${proc.pid}">undo</button>`;
    const next = proc.next_log
      ? `<span class="next-log">next: ${escapeHtml(proc.next_log)}</span>`
      : `<span class="next-log empty">log done</span>`;
    return (
      `<div class="proc status-${proc.status}">` +
      `<span class="pid">${escapeHtml(proc.pid)}</span>` +
      `<span class="status">${proc.status}</span>` +
      `${next}<span class="hist">history ${proc.history_len}</span>` +
      `<div class="mailbox">${mailboxHtml(proc)}</div>` +
      `<div class="controls">${stepFwd}${stepBwd}</div></div>`
    );
  });
  return `<section class="processes"><h3>Processes</h3>${cards.join("")}</section>`;
}

export function renderNetwork(network: QueueView[]): string {
  const rows = network.length
    ? network
        .map(
          (q) =>
            `<div class="queue"><span class="edge">${escapeHtml(q.from)} &rarr; ` +
            `${escapeHtml(q.to)}</span> ` +
            q.messages
              .map((m) => `<span class="msg">${escapeHtml(m.tag)}=${escapeHtml(m.value)}</span>`)
              .join(" ") +
            `</div>`
        )
        .join("")
    : `<span class="empty">no undelivered messages</span>`;
  return `<section class="network"><h3>Network</h3>${rows}</section>`;
}

export function renderRaces(view: SessionView): string {
  if (!view.raceSets.length) {
    return `<section class="races"><h3>Races</h3>` +
      `<span class="empty">no message races in this trace</span></section>`;
  }
  const blocks = view.raceSets.map((rs) => {
    const senders = Object.keys(rs.races).sort();
    const lists = senders
      .map(
        (sender) =>
          `<span class="race-sender">${escapeHtml(sender)}:</span> ` +
          rs.races[sender]
            .map(
              (tag) =>
                `<button class="fork" data-action="fork" ` +
                `data-pid="${rs.receive.pid}" data-index="${rs.receive.index}" ` +
                `data-tag="${tag}">try ${escapeHtml(tag)}</button>`
            )
            .join(" ")
      )
      .join("<br/>");
    return (
      `<div class="race"><span class="race-head">rec(${escapeHtml(rs.receive.tag)}) at ` +
      `${escapeHtml(rs.receive.pid)}[${rs.receive.index}]</span><div>${lists}</div></div>`
    );
  });
  return `<section class="races"><h3>Races</h3>${blocks.join("")}</section>`;
}

export function renderGuidance(view: SessionView): string {
  if (!view.guidance.length) return "";
  const items = view.guidance
    .map((p, i) => {
      const label = view.guidanceText[i] ?? `${p.kind} on ${p.pid}`;
      return (
        `<li><button data-action="resolve" data-pid="${p.pid}" ` +
        `data-kind="${p.kind}" data-ident="${p.ident ?? ""}">` +
        `${escapeHtml(label)}</button></li>`
      );
    })
    .join("");
  return (
    `<section class="guidance"><h3>Undo blocked</h3>` +
    `<p>These must be undone first, in order:</p><ol>${items}</ol></section>`
  );
}

function untilOptions(snapshot: Snapshot): string {
  const opts: string[] = [`<option value="deadlock">deadlock</option>`];
  const seen = new Set<string>();
  for (const actions of Object.values(snapshot.log_remaining)) {
    for (const action of actions) {
      const a = parseAction(action);
      if (a.tag && !seen.has(`${a.kind}:${a.tag}`)) {
        seen.add(`${a.kind}:${a.tag}`);
        opts.push(
          `<option value="${a.kind}:${a.tag}">${escapeHtml(a.kind)}(${escapeHtml(a.tag)})</option>`
        );
      }
    }
  }
  return opts.join("");
}

function rollbackOptions(snapshot: Snapshot): string {
  const opts: string[] = [];
  const seen = new Set<string>();
  for (const ev of snapshot.events) {
    const a = parseAction(ev.action);
    const key = a.tag
      ? `${a.kind}:${a.tag}`
      : a.kind === "spawn"
        ? `spawn:${a.child}`
        : `exit:${ev.pid}`;
    if (seen.has(key)) continue;
    seen.add(key);
    opts.push(`<option value="${key}">${escapeHtml(ev.action)} (${escapeHtml(ev.pid)})</option>`);
  }
  return opts.join("");
}

export function renderToolbar(snapshot: Snapshot): string {
  return (
    `<section class="toolbar">` +
    `<label>forward until <select id="until-target">${untilOptions(snapshot)}</select></label>` +
    `<button data-action="run_until">go</button>` +
    `<label>backward until <select id="rollback-target">${rollbackOptions(snapshot)}</select></label>` +
    `<button data-action="rollback_until">go</button>` +
    `<span class="mode">mode: ${escapeHtml(snapshot.mode)}</span>` +
    `</section>`
  );
}

export function renderTabs(store: SessionStore): string {
  const tabs = store.order
    .map((id) => {
      const view = store.sessions.get(id)!;
      const active = id === store.active ? " active" : "";
      const stuck = view.stuck
        ? ` <span class="badge stuck" title="stuck at receive (no match)">stuck</span>`
        : "";
      const parent = view.snapshot.parent
        ? `<span class="crumb">${escapeHtml(view.snapshot.parent)} &rsaquo;</span> `
        : "";
      return (
        `<button class="tab${active}" data-action="tab" data-session="${id}">` +
        `${parent}${escapeHtml(id)}${stuck}</button>`
      );
    })
    .join("");
  return `<nav class="tabs">${tabs}</nav>`;
}

export function renderSession(view: SessionView): string {
  const snap = view.snapshot;
  return (
    `<div class="session" data-session="${snap.session}" data-seq="${snap.seq}">` +
    renderToolbar(snap) +
    renderGuidance(view) +
    `<div class="panes">` +
    `<section class="timeline-pane"><h3>Timeline</h3>${renderTimeline(snap)}</section>` +
    `<div class="side">` +
    renderProcesses(snap) +
    renderNetwork(snap.network) +
    renderRaces(view) +
    `</div></div></div>`
  );
}

export function renderApp(store: SessionStore): string {
  const banner = store.banner
    ? `<div class="banner">${escapeHtml(store.banner)}</div>`
    : "";
  const view = store.activeView();
  const body = view
    ? renderSession(view)
    : `<div class="empty-state">Load a program to start a session.</div>`;
  return banner + renderTabs(store) + body;
}

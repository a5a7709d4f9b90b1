// Protocol payload shapes as the server emits them.

export interface MsgView {
  tag: string;
  value: string;
}

export interface ProcView {
  pid: string;
  status: "running" | "blocked" | "exited";
  mailbox: MsgView[];
  history_len: number;
  next_log: string | null;
}

export interface QueueView {
  from: string;
  to: string;
  messages: MsgView[];
}

export interface EventView {
  pid: string;
  action: string;
}

export interface Snapshot {
  session: string;
  seq: number;
  mode: string;
  parent: string | null;
  processes: ProcView[];
  network: QueueView[];
  log_remaining: Record<string, string[]>;
  events: EventView[];
}

export interface RaceSetView {
  receive: { pid: string; index: number; tag: string };
  races: Record<string, string[]>;
}

export interface Prerequisite {
  pid: string;
  kind: string;
  ident: string | null;
}

export interface ErrorPayload {
  message: string;
  prerequisites?: string[];
  prerequisites_struct?: Prerequisite[];
}

export interface Response {
  id: number;
  result?: unknown;
  error?: ErrorPayload;
}

export interface Notification {
  method: "state_changed";
  params: Snapshot;
}

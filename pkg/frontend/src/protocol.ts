// Request/response correlation and notification dispatch over one socket.
// The transport is injected so tests can drive the client without a network.

import type { ErrorPayload, Notification, Snapshot } from "./types.js";

export interface Transport {
  send(text: string): void;
}

export class ProtocolError extends Error {
  readonly payload: ErrorPayload;

  constructor(payload: ErrorPayload) {
    super(payload.message);
    this.payload = payload;
  }
}

interface Pending {
  resolve(value: unknown): void;
  reject(err: Error): void;
}

export class ProtocolClient {
  private transport: Transport;
  private nextId = 1;
  private pending = new Map<number, Pending>();

  onSnapshot: (snap: Snapshot) => void = () => {};

  constructor(transport: Transport) {
    this.transport = transport;
  }

  request<T = unknown>(method: string, params: Record<string, unknown> = {}): Promise<T> {
    const id = this.nextId++;
    const message = JSON.stringify({ id, method, params });
    return new Promise<T>((resolve, reject) => {
      this.pending.set(id, { resolve: resolve as (v: unknown) => void, reject });
      this.transport.send(message);
    });
  }

  /** Feed one incoming text frame from the transport. */
  handleMessage(text: string): void {
    let msg: unknown;
    try {
      msg = JSON.parse(text);
    } catch {
      return; // not ours to crash on
    }
    if (typeof msg !== "object" || msg === null) return;
    const m = msg as { id?: number; method?: string; result?: unknown; error?: ErrorPayload; params?: Snapshot };
    if (m.method === "state_changed" && m.params) {
      this.onSnapshot((m as Notification).params);
      return;
    }
    if (typeof m.id !== "number") return;
    const pending = this.pending.get(m.id);
    if (!pending) return;
    this.pending.delete(m.id);
    if (m.error) {
      pending.reject(new ProtocolError(m.error));
    } else {
      pending.resolve(m.result);
    }
  }

  /** Reject everything in flight, e.g. when the socket drops. */
  fail(reason: string): void {
    for (const [, p] of this.pending) {
      p.reject(new Error(reason));
    }
    this.pending.clear();
  }

  get inFlight(): number {
    return this.pending.size;
  }
}

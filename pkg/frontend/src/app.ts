// Browser wiring: one WebSocket, one SessionStore, re-render on change.
// Every control is a [data-action] element handled here; each maps to
// exactly one protocol method.

import { SessionStore } from "./model.js";
import { ProtocolClient, ProtocolError } from "./protocol.js";
import { renderApp } from "./render.js";
import type { RaceSetView, Snapshot } from "./types.js";

const DEFAULT_PROGRAM = `main() ->
    let C = spawn(consumer, []) in
    let P = spawn(producer, [C]) in
    C ! {a, 1}.

consumer() ->
    receive
        {a, X} -> X
    end.

producer(C) ->
    C ! {b, 2},
    C ! {a, 3}.
`;

function targetFromKey(key: string): Record<string, unknown> {
  const [kind, ident] = key.split(":");
  if (kind === "deadlock" || kind === "orphan" || kind === "lost") {
    return { kind };
  }
  if (kind === "spawn" || kind === "exit") {
    return { kind, pid: ident };
  }
  return { kind, tag: ident };
}

function main(): void {
  const store = new SessionStore();
  const root = document.getElementById("app")!;
  const programBox = document.getElementById("program") as HTMLTextAreaElement;
  programBox.value = DEFAULT_PROGRAM;

  const proto = location.protocol === "https:" ? "wss" : "ws";
  const ws = new WebSocket(`${proto}://${location.host}/api`);
  const client = new ProtocolClient({ send: (text) => ws.send(text) });
  ws.onmessage = (ev) => client.handleMessage(String(ev.data));
  ws.onclose = () => {
    client.fail("connection closed");
    store.banner = "session lost: server connection closed";
    render();
  };

  client.onSnapshot = (snap: Snapshot) => {
    if (store.applySnapshot(snap)) render();
  };

  function render(): void {
    root.innerHTML = renderApp(store);
  }

  async function refreshRaces(session: string): Promise<void> {
    const result = (await client.request("race_sets", { session })) as {
      race_sets: RaceSetView[];
    };
    store.setRaceSets(session, result.race_sets);
    render();
  }

  async function call(method: string, params: Record<string, unknown>): Promise<void> {
    const session = store.active;
    try {
      if (session) store.clearGuidance(session);
      await client.request(method, { session, ...params });
      if (session) await refreshRaces(session);
    } catch (err) {
      if (err instanceof ProtocolError && session) {
        store.setGuidance(
          session,
          err.payload.prerequisites_struct ?? [],
          err.payload.prerequisites ?? []
        );
        store.banner = err.payload.message;
      } else {
        store.banner = String(err);
      }
      render();
    }
  }

  document.getElementById("load")!.addEventListener("click", async () => {
    store.banner = null;
    try {
      const result = (await client.request("load", {
        program: programBox.value,
      })) as { session: string };
      store.active = result.session;
      await refreshRaces(result.session);
    } catch (err) {
      store.banner =
        err instanceof ProtocolError ? err.payload.message : String(err);
      render();
    }
  });

  root.addEventListener("click", async (ev) => {
    const el = (ev.target as HTMLElement).closest("[data-action]") as HTMLElement | null;
    if (!el) return;
    const action = el.dataset.action!;
    switch (action) {
      case "tab":
        store.active = el.dataset.session!;
        render();
        break;
      case "step_fwd":
      case "step_bwd":
        await call(action, { pid: el.dataset.pid });
        break;
      case "run_until": {
        const select = document.getElementById("until-target") as HTMLSelectElement;
        await call("run_until", { target: targetFromKey(select.value) });
        break;
      }
      case "rollback_until": {
        const select = document.getElementById("rollback-target") as HTMLSelectElement;
        await call("rollback_until", { target: targetFromKey(select.value) });
        break;
      }
      case "resolve":
        // clicking a guidance line performs that prerequisite undo
        if (el.dataset.kind === "deliver" || el.dataset.kind === "rec"
            || el.dataset.kind === "send") {
          await call("rollback_until", {
            target: { kind: el.dataset.kind, tag: el.dataset.ident },
          });
        } else {
          await call("step_bwd", { pid: el.dataset.pid });
        }
        break;
      case "fork": {
        const session = store.active;
        if (!session) break;
        try {
          const result = (await client.request("fork_variant", {
            session,
            receive: { pid: el.dataset.pid, index: Number(el.dataset.index) },
            tag: el.dataset.tag,
          })) as { session: string };
          const child = result.session;
          store.active = child;
          const until = (await client.request("run_until", {
            session: child,
            target: { kind: "rec", tag: el.dataset.tag },
          })) as { reached: boolean };
          if (!until.reached) store.markStuck(child);
          await refreshRaces(child);
        } catch (err) {
          store.banner =
            err instanceof ProtocolError ? err.payload.message : String(err);
          render();
        }
        break;
      }
    }
  });

  render();
}

main();

"""WebSocket server for interactive sessions plus static UI hosting.

One SessionManager per connection; requests are answered in arrival order
and every state change pushes a state_changed notification before the
response, so the client renders strictly monotone snapshots.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, HTMLResponse
from fastapi.staticfiles import StaticFiles

from .sessions import SessionManager, handle_request

_UI_DIST = Path(__file__).resolve().parents[3] / "frontend" / "dist"

_NO_UI = """<!doctype html>
<html><body><h1>kerndbg</h1>
<p>The web UI is not built. Run <code>npm install && npm run build</code>
in <code>frontend/</code>, then restart the server.</p>
<p>The WebSocket protocol endpoint is at <code>/api</code>.</p>
</body></html>"""


def create_app(ui_dist: Path | None = None) -> FastAPI:
    app = FastAPI(title="kerndbg")
    dist = ui_dist if ui_dist is not None else _UI_DIST

    @app.websocket("/api")
    async def api(ws: WebSocket):
        await ws.accept()
        manager = SessionManager()
        try:
            while True:
                text = await ws.receive_text()
                try:
                    request = json.loads(text)
                except json.JSONDecodeError:
                    await ws.send_text(json.dumps(
                        {"id": None, "error": {"message": "malformed JSON"}}
                    ))
                    continue
                response, notes = handle_request(manager, request)
                for note in notes:
                    await ws.send_text(json.dumps(note, sort_keys=True))
                await ws.send_text(json.dumps(response, sort_keys=True))
        except WebSocketDisconnect:
            pass

    if dist.is_dir():
        app.mount("/ui", StaticFiles(directory=dist), name="ui")

        @app.get("/")
        async def index():
            return FileResponse(dist / "index.html")
    else:

        @app.get("/")
        async def index_placeholder():
            return HTMLResponse(_NO_UI)

    return app


def serve(port: int = 8000, host: str = "127.0.0.1") -> None:
    import uvicorn

    uvicorn.run(create_app(), host=host, port=port)

"""Teleoperation service: FastAPI app with the /ws stream plus raw TCP.

One asyncio loop hosts everything: the paced tick task, the WebSocket
endpoint (one message per text frame), and a newline-delimited TCP
fallback on port+1. Clients all receive the full outbound stream with
per-connection sequence numbers; commands from any client merge FIFO
into the supervisor queue. A slow consumer is disconnected when its
buffer fills rather than ever stalling the tick loop.
"""

from __future__ import annotations

import asyncio
import hashlib
import logging
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from pydantic import BaseModel

from .config import SimConfig
from .protocol import (
    BAD_VERSION,
    PROTOCOL_VERSION,
    Message,
    MessageError,
    encode_message,
    decode_message,
)
from .runner import RunReport, build_supervisor
from .supervisor import AUTONOMOUS, Outbound, Supervisor
from .world import World

logger = logging.getLogger("carebot.service")


class ClientSession:
    """One connected console, WebSocket or TCP."""

    def __init__(self, client_id: str, buffer: int):
        self.id = client_id
        self.queue: asyncio.Queue[Message | None] = asyncio.Queue(maxsize=buffer)
        self.seq = 0
        self.closing = False

    def offer(self, msg: Message | None) -> bool:
        """Queue a message without blocking; False means the buffer is full."""
        try:
            self.queue.put_nowait(msg)
            return True
        except asyncio.QueueFull:
            return False

    def stamp(self, msg: Message) -> bytes:
        line = encode_message(msg.with_seq(self.seq))
        self.seq += 1
        return line


class ServiceRuntime:
    """Owns the supervisor, the client table and the paced tick task."""

    def __init__(
        self,
        world: World,
        cfg: SimConfig,
        mode: str = "manual",
        ticks: int = 0,
        script: list[tuple[int, Message]] | None = None,
        realtime: bool = True,
    ):
        self.cfg = cfg
        self.supervisor: Supervisor = build_supervisor(world, cfg)
        self.mode = mode
        self.max_ticks = ticks if ticks > 0 else None
        self.script = sorted(script or [], key=lambda item: item[0])
        self.realtime = realtime
        self.clients: dict[str, ClientSession] = {}
        self.done = asyncio.Event()
        self._next_client = 0
        self._script_pos = 0
        self._log_seq = 0
        self._digest = hashlib.sha256()
        self._alerts_by_kind: dict[str, int] = {}
        self._tick_task: asyncio.Task | None = None

    # -- clients ------------------------------------------------------------

    def register(self) -> ClientSession:
        self._next_client += 1
        session = ClientSession(f"c{self._next_client}", self.cfg.client_buffer)
        self.clients[session.id] = session
        session.offer(self.supervisor.hello_message())
        return session

    def unregister(self, session: ClientSession) -> None:
        self.clients.pop(session.id, None)

    def drop(self, session: ClientSession) -> None:
        """Ask the writer pump to close this client."""
        session.closing = True
        session.offer(None)

    def submit_line(self, session: ClientSession, line: bytes | str) -> None:
        """Decode one inbound line; bad input earns a nack, never a crash."""
        try:
            msg = decode_message(line)
        except MessageError as exc:
            session.offer(Message(type="ack", ts=self.supervisor.clock, payload={
                "id": None, "ok": False, "code": exc.code, "detail": exc.detail,
            }))
            return
        if msg.type == "hello" and msg.payload.get("v") != PROTOCOL_VERSION:
            session.offer(Message(type="ack", ts=self.supervisor.clock, payload={
                "id": msg.id, "ok": False, "code": BAD_VERSION,
                "detail": f"protocol version {PROTOCOL_VERSION} required",
            }))
            self.drop(session)
            return
        self.supervisor.enqueue_command(msg, client=session.id)

    # -- tick loop ----------------------------------------------------------

    async def run_ticks(self) -> None:
        sup = self.supervisor
        if self.mode.upper() == AUTONOMOUS:
            sup.enqueue_command(
                Message(type="mode_set", ts=0.0, id="boot-mode", payload={"mode": AUTONOMOUS})
            )
        loop = asyncio.get_running_loop()
        next_deadline = loop.time()
        while self.max_ticks is None or sup.tick_count < self.max_ticks:
            while (
                self._script_pos < len(self.script)
                and self.script[self._script_pos][0] <= sup.tick_count
            ):
                sup.enqueue_command(self.script[self._script_pos][1])
                self._script_pos += 1
            self._route(sup.tick())
            if self.realtime:
                next_deadline += self.cfg.control_dt
                delay = next_deadline - loop.time()
                if delay > 0:
                    await asyncio.sleep(delay)
            else:
                await asyncio.sleep(0)
        self.done.set()

    def _route(self, emitted: list[Outbound]) -> None:
        for out in emitted:
            line = encode_message(out.message.with_seq(self._log_seq))
            self._log_seq += 1
            self._digest.update(line)
            if out.message.type == "alert":
                kind = out.message.payload["kind"]
                self._alerts_by_kind[kind] = self._alerts_by_kind.get(kind, 0) + 1
            if out.target is None:
                targets = list(self.clients.values())
            else:
                session = self.clients.get(out.target)
                targets = [session] if session else []
            for session in targets:
                if not session.closing and not session.offer(out.message):
                    logger.warning("client %s overflowed its buffer; dropping", session.id)
                    self.drop(session)

    def report(self) -> RunReport:
        sup = self.supervisor
        return RunReport(
            ticks=sup.tick_count,
            coverage_fraction=sup.coverage_fraction,
            max_visit_count=sup.max_visit_count,
            collisions=sup.collisions,
            alerts_by_kind=dict(self._alerts_by_kind),
            message_log_hash=self._digest.hexdigest(),
        )


# -- pydantic REST models ----------------------------------------------------

class StatusResponse(BaseModel):
    mode: str
    tick: int
    clock: float
    coverage_fraction: float
    max_visit_count: int
    collisions: int
    clients: int
    protocol_version: int = PROTOCOL_VERSION


class HealthResponse(BaseModel):
    ok: bool = True


def create_app(runtime: ServiceRuntime, console_dir: str | Path | None = None) -> FastAPI:
    """FastAPI app exposing /ws, /status, /healthz (and the console if built)."""

    @asynccontextmanager
    async def lifespan(_: FastAPI):
        runtime._tick_task = asyncio.create_task(runtime.run_ticks())
        yield
        runtime._tick_task.cancel()
        try:
            await runtime._tick_task
        except asyncio.CancelledError:
            pass

    app = FastAPI(title="carebot teleop service", version="0.1.0", lifespan=lifespan)
    app.state.runtime = runtime

    @app.get("/healthz", response_model=HealthResponse)
    async def healthz() -> HealthResponse:
        return HealthResponse()

    @app.get("/status", response_model=StatusResponse)
    async def status() -> StatusResponse:
        sup = runtime.supervisor
        return StatusResponse(
            mode=sup.mode,
            tick=sup.tick_count,
            clock=sup.clock,
            coverage_fraction=sup.coverage_fraction,
            max_visit_count=sup.max_visit_count,
            collisions=sup.collisions,
            clients=len(runtime.clients),
        )

    @app.websocket("/ws")
    async def ws_endpoint(sock: WebSocket) -> None:
        await sock.accept()
        session = runtime.register()

        async def pump() -> None:
            while True:
                msg = await session.queue.get()
                if msg is None:
                    await sock.close()
                    return
                await sock.send_text(session.stamp(msg).decode("utf-8").rstrip("\n"))

        writer = asyncio.create_task(pump())
        try:
            while True:
                runtime.submit_line(session, await sock.receive_text())
        except WebSocketDisconnect:
            pass
        except RuntimeError:
            pass  # receive after close
        finally:
            writer.cancel()
            runtime.unregister(session)

    if console_dir and Path(console_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/console", StaticFiles(directory=str(console_dir), html=True), name="console")

    return app


async def serve_tcp(runtime: ServiceRuntime, host: str, port: int) -> asyncio.AbstractServer:
    """Raw TCP fallback: same messages, newline-delimited, one per line."""

    async def handle(reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        session = runtime.register()

        async def pump() -> None:
            while True:
                msg = await session.queue.get()
                if msg is None:
                    writer.close()
                    return
                writer.write(session.stamp(msg))
                await writer.drain()

        pump_task = asyncio.create_task(pump())
        try:
            while True:
                try:
                    line = await reader.readline()
                except (asyncio.LimitOverrunError, asyncio.IncompleteReadError):
                    break
                if not line:
                    break
                if line.strip():
                    runtime.submit_line(session, line)
        except ConnectionError:
            pass
        finally:
            pump_task.cancel()
            runtime.unregister(session)
            writer.close()

    return await asyncio.start_server(handle, host, port, limit=(1 << 20) + 1024)


def serve_forever(
    world: World,
    cfg: SimConfig,
    mode: str = "manual",
    ticks: int = 0,
    script: list[tuple[int, Message]] | None = None,
    host: str = "127.0.0.1",
    console_dir: str | Path | None = None,
) -> RunReport:
    """Run the service until the tick budget is exhausted or interrupted.

    WebSocket (and REST) on cfg.port, raw TCP fallback on cfg.port + 1.
    """
    import uvicorn

    runtime = ServiceRuntime(world, cfg, mode=mode, ticks=ticks, script=script)
    if console_dir is None:
        default_console = Path.cwd() / "frontend" / "dist"
        console_dir = default_console if default_console.is_dir() else None
    app = create_app(runtime, console_dir=console_dir)
    server = uvicorn.Server(uvicorn.Config(app, host=host, port=cfg.port, log_level="warning"))

    async def main() -> None:
        tcp = await serve_tcp(runtime, host, cfg.port + 1)
        serve_task = asyncio.create_task(server.serve())
        done_task = asyncio.create_task(runtime.done.wait())
        await asyncio.wait({serve_task, done_task}, return_when=asyncio.FIRST_COMPLETED)
        server.should_exit = True
        await serve_task
        tcp.close()
        await tcp.wait_closed()

    try:
        asyncio.run(main())
    except KeyboardInterrupt:
        pass
    return runtime.report()

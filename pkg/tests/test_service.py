import asyncio
import json

import pytest
from starlette.testclient import TestClient

from carebot.config import SimConfig
from carebot.protocol import PROTOCOL_VERSION
from carebot.service import ServiceRuntime, create_app, serve_tcp
from carebot.world import load_scenario
from conftest import open_room


def make_app(ticks=0, mode="manual", realtime=True):
    world = load_scenario(open_room(14))
    runtime = ServiceRuntime(world, SimConfig(), mode=mode, ticks=ticks, realtime=realtime)
    return create_app(runtime), runtime


def recv_until(ws, predicate, limit=400):
    for _ in range(limit):
        msg = json.loads(ws.receive_text())
        if predicate(msg):
            return msg
    raise AssertionError("message not seen within limit")


def command(type_, cid, payload):
    return json.dumps({"type": type_, "id": cid, "ts": 0, "payload": payload})


class TestWebSocket:
    def test_hello_first_with_version_and_mode(self):
        app, _ = make_app()
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                hello = json.loads(ws.receive_text())
                assert hello["type"] == "hello"
                assert hello["seq"] == 0
                assert hello["payload"]["v"] == PROTOCOL_VERSION
                assert hello["payload"]["mode"] == "MANUAL"

    def test_commands_acked_in_order(self):
        app, _ = make_app()
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.receive_text()
                for cid in ("a1", "a2", "a3"):
                    ws.send_text(command("camera_pan", cid, {"dir": "UP"}))
                acks = []
                while len(acks) < 3:
                    msg = json.loads(ws.receive_text())
                    if msg["type"] == "ack":
                        acks.append(msg["payload"]["id"])
                assert acks == ["a1", "a2", "a3"]

    def test_seq_contiguous_per_connection(self):
        app, _ = make_app()
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                seqs = [json.loads(ws.receive_text())["seq"] for _ in range(30)]
                assert seqs == list(range(30))

    def test_two_clients_same_frame_stream(self):
        app, _ = make_app()
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws1, client.websocket_connect("/ws") as ws2:
                def frames(ws, n):
                    out = []
                    while len(out) < n:
                        msg = json.loads(ws.receive_text())
                        if msg["type"] == "frame":
                            out.append(msg["payload"]["seq"])
                    return out

                f1 = frames(ws1, 4)
                f2 = frames(ws2, 4)
                # same stream, modulo the join instant
                common = set(f1) & set(f2)
                assert len(common) >= 2
                assert f1 == sorted(f1) and f2 == sorted(f2)

    def test_malformed_line_nacked_connection_survives(self):
        app, _ = make_app()
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.receive_text()
                ws.send_text("this is not json")
                nack = recv_until(ws, lambda m: m["type"] == "ack")
                assert nack["payload"]["ok"] is False
                assert nack["payload"]["code"] == "PARSE_ERROR"
                assert nack["payload"]["id"] is None
                ws.send_text(command("camera_pan", "ok1", {"dir": "LEFT"}))
                ack = recv_until(ws, lambda m: m["type"] == "ack" and m["payload"]["id"] == "ok1")
                assert ack["payload"]["ok"] is True

    def test_wrong_version_refused_and_disconnected(self):
        app, _ = make_app()
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.receive_text()
                ws.send_text(command("hello", "h1", {"v": 99}))
                nack = recv_until(ws, lambda m: m["type"] == "ack" and not m["payload"]["ok"])
                assert nack["payload"]["code"] == "BAD_VERSION"
                with pytest.raises(Exception):
                    for _ in range(200):
                        ws.receive_text()

    def test_drive_flows_into_simulation(self):
        app, runtime = make_app()
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.receive_text()
                ws.send_text(command("drive", "d1", {"left": 1.0, "right": 1.0}))
                recv_until(ws, lambda m: m["type"] == "ack" and m["payload"]["id"] == "d1")
                moved = recv_until(
                    ws,
                    lambda m: m["type"] == "telemetry" and m["payload"]["pose"]["x"] > 0.76,
                )
                assert moved["payload"]["pose"]["x"] > 0.76


class TestRest:
    def test_healthz(self):
        app, _ = make_app()
        with TestClient(app) as client:
            assert client.get("/healthz").json() == {"ok": True}

    def test_status_shape(self):
        app, _ = make_app()
        with TestClient(app) as client:
            body = client.get("/status").json()
            assert body["mode"] == "MANUAL"
            assert body["protocol_version"] == PROTOCOL_VERSION
            assert set(body) >= {
                "mode", "tick", "clock", "coverage_fraction",
                "max_visit_count", "collisions", "clients",
            }

    def test_tick_budget_stops_loop(self):
        app, runtime = make_app(ticks=5, realtime=False)
        with TestClient(app) as client:
            for _ in range(100):
                if runtime.done.is_set():
                    break
                import time
                time.sleep(0.02)
            assert runtime.done.is_set()
            assert runtime.supervisor.tick_count == 5
            report = runtime.report()
            assert report.ticks == 5


class TestTcpFallback:
    def test_line_protocol_round_trip(self):
        async def scenario():
            world = load_scenario(open_room(14))
            runtime = ServiceRuntime(world, SimConfig(), ticks=0, realtime=True)
            tick_task = asyncio.create_task(runtime.run_ticks())
            server = await serve_tcp(runtime, "127.0.0.1", 0)
            port = server.sockets[0].getsockname()[1]
            try:
                reader, writer = await asyncio.open_connection("127.0.0.1", port)
                hello = json.loads(await asyncio.wait_for(reader.readline(), 5))
                assert hello["type"] == "hello" and hello["seq"] == 0
                writer.write(
                    (command("mode_set", "m1", {"mode": "AUTONOMOUS"}) + "\n").encode()
                )
                await writer.drain()
                ack = None
                for _ in range(200):
                    msg = json.loads(await asyncio.wait_for(reader.readline(), 5))
                    if msg["type"] == "ack":
                        ack = msg
                        break
                assert ack["payload"] == {"id": "m1", "ok": True}
                telemetry = None
                for _ in range(200):
                    msg = json.loads(await asyncio.wait_for(reader.readline(), 5))
                    if msg["type"] == "telemetry" and msg["payload"]["mode"] == "AUTONOMOUS":
                        telemetry = msg
                        break
                assert telemetry is not None
                writer.close()
            finally:
                tick_task.cancel()
                server.close()
                await server.wait_closed()

        asyncio.run(scenario())

    def test_bad_line_gets_nack_over_tcp(self):
        async def scenario():
            world = load_scenario(open_room(14))
            runtime = ServiceRuntime(world, SimConfig(), ticks=0, realtime=True)
            tick_task = asyncio.create_task(runtime.run_ticks())
            server = await serve_tcp(runtime, "127.0.0.1", 0)
            port = server.sockets[0].getsockname()[1]
            try:
                reader, writer = await asyncio.open_connection("127.0.0.1", port)
                await asyncio.wait_for(reader.readline(), 5)  # hello
                writer.write(b"{garbage\n")
                await writer.drain()
                nack = None
                for _ in range(200):
                    msg = json.loads(await asyncio.wait_for(reader.readline(), 5))
                    if msg["type"] == "ack" and not msg["payload"]["ok"]:
                        nack = msg
                        break
                assert nack["payload"]["code"] == "PARSE_ERROR"
                writer.close()
            finally:
                tick_task.cancel()
                server.close()
                await server.wait_closed()

        asyncio.run(scenario())


class TestBackpressure:
    def test_slow_consumer_dropped_on_overflow(self):
        async def scenario():
            world = load_scenario(open_room(14))
            cfg = SimConfig(client_buffer=8)
            runtime = ServiceRuntime(world, cfg, ticks=0, realtime=False)
            session = runtime.register()  # never drained
            tick_task = asyncio.create_task(runtime.run_ticks())
            for _ in range(200):
                await asyncio.sleep(0)
                if session.closing:
                    break
            assert session.closing, "overflowing client was not dropped"
            # the tick loop never blocked on the slow client: it keeps going
            at_drop = runtime.supervisor.tick_count
            for _ in range(40):
                await asyncio.sleep(0)
            tick_task.cancel()
            assert runtime.supervisor.tick_count > at_drop

        asyncio.run(scenario())

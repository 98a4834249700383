"""Secondary acceptance: the UI-facing live loop, driven headlessly.

The browser client is a pure protocol peer, so a scripted WebSocket
driver sending exactly the records the UI sends (reset, demo-start,
per-tick override actions, demo-end) exercises the same gateway surface.
The primary suite never imports anything from frontend/.
"""

import asyncio
import time

import pytest

from playbench.protocol import decode_line, encode_message, make_message
from playbench.server import GatewayServer

websockets = pytest.importorskip("websockets")


async def _ws_client(port):
    return await websockets.connect(f"ws://127.0.0.1:{port}", open_timeout=5)


async def _send(ws, kind, **payload):
    await ws.send(encode_message(make_message(kind, **payload)).strip())


async def _collect_states(ws, count, timeout=10.0):
    states = []
    deadline = time.perf_counter() + timeout
    while len(states) < count and time.perf_counter() < deadline:
        msg = decode_line(await asyncio.wait_for(ws.recv(), timeout=2.0))
        if msg["kind"] == "state":
            states.append(msg)
    return states


def test_ui_live_loop_and_demo_round_trip(tmp_path):
    """>= 30 state frames/s sustained for 60 s; a demo segment recorded over
    the wire changes the next rollout on at least one demonstrated state."""

    async def scenario():
        server = GatewayServer(port=0, ws_port=0, root=str(tmp_path))
        await server.start()
        try:
            ws = await _ws_client(server.bound_ws_port)
            seed = 21

            # pre-demo rollout: fresh session, agent control, fallback only
            await _send(ws, "reset", env="arena", mode="mixed", clock="live", seed=seed)
            pre = await _collect_states(ws, 30)
            pre_actions = [s.get("action") for s in pre if s.get("action")]
            assert all(a["channel"] == "no-op" for a in pre_actions)

            # demo segment exactly as the UI sends it: demo-start first,
            # then one override record per tick, then demo-end
            await _send(ws, "reset", env="arena", mode="mixed", clock="live", seed=seed)
            await _send(ws, "demo-start")
            for _ in range(60):
                await _send(ws, "override", channel="move", args=[1.0, 0.0])
                await asyncio.sleep(0.033)
            await _send(ws, "demo-end")
            # drain until the demo-end acknowledgement arrives
            deadline = time.perf_counter() + 10.0
            demo_ack = None
            while demo_ack is None and time.perf_counter() < deadline:
                msg = decode_line(await asyncio.wait_for(ws.recv(), timeout=2.0))
                if msg["kind"] == "demo-end":
                    demo_ack = msg
            assert demo_ack is not None and demo_ack["ensembles"] == 1
            assert demo_ack["steps"] > 0

            # same reset: the next rollout must differ from the pre-demo one
            # on a demonstrated state, served by the new ensemble
            await _send(ws, "reset", env="arena", mode="mixed", clock="live", seed=seed)
            post = await _collect_states(ws, 30)
            post_actions = [s.get("action") for s in post if s.get("action")]
            moved = [
                (s.get("source"), a)
                for s, a in zip(post, post_actions)
                if a and a["channel"] != "no-op"
            ]
            assert moved, "rollout unchanged after the demonstration"
            assert any(str(src).startswith("ensemble") for src, _ in moved)

            # frame-rate sustain: count state records over 60 wall-clock seconds
            await _send(ws, "reset", env="arena", mode="agent", clock="live", seed=seed)
            frames = 0
            t0 = time.perf_counter()
            while time.perf_counter() - t0 < 60.0:
                msg = decode_line(await asyncio.wait_for(ws.recv(), timeout=2.0))
                if msg["kind"] == "state":
                    frames += 1
            elapsed = time.perf_counter() - t0
            rate = frames / elapsed
            assert rate >= 30.0, f"sustained only {rate:.2f} frames/s"
            print(f"PASS ui-live-loop: {rate:.2f} frames/s over {elapsed:.0f}s, "
                  f"demo of {demo_ack['steps']} steps changed the rollout")
            await ws.close()
        finally:
            await server.stop()

    asyncio.run(scenario())

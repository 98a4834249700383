"""Session gateway: the boundary between environments, agents, and the UI.

One session per connection, one environment instance per session,
sessions fully isolated. The same newline-delimited JSON records travel
over TCP (one record per line) and WebSocket (one record per message);
browsers use the WebSocket port.

Clock modes: ``fast`` sessions advance only when asked (training,
bootstrap), ``live`` sessions tick themselves at the configured tick rate
on absolute deadlines and push state records (the UI watches these).

Mixed-mode sessions support human-in-the-loop correction: between
``demo-start`` and ``demo-end`` records, ``override`` actions drive the
environment and are recorded; at ``demo-end`` the segment is fitted into
a fresh ensemble appended to the session's model sequence, so the
correction takes effect mid-episode without a reload.
"""

from __future__ import annotations

import asyncio
import math
from typing import Sequence

import numpy as np

from . import persist
from .arena import (
    ArenaConfig,
    arena_fallback,
    arena_scheme,
    config_from_doc,
    default_config,
    episode_meta,
    features,
)
from .arena import reset as arena_reset
from .arena import step as arena_step
from .core import Action, Episode, EpisodeBuilder
from .markov import (
    FALLBACK,
    ModelSequence,
    Provenance,
    TelemetryWindow,
    push_demonstration,
)
from .markov import policy_action as sequence_policy_action
from .progression import (
    apply_action,
    available_actions,
    event_career_model,
    goal_reached,
    initial_state,
    model_from_doc,
)
from .protocol import ProtocolError, decode_line, encode_message, error_message, make_message

MODES = ("agent", "human-override", "mixed")
CLOCKS = ("live", "fast")


class Session:
    """Protocol state machine for one connection; transport-agnostic.

    ``receive`` maps one raw line to reply records; live-mode ticking is
    driven externally via ``tick``.
    """

    def __init__(self, root: str = "artifacts", default_seed: int = 0,
                 default_arena: ArenaConfig | None = None):
        self.root = root
        self.default_seed = default_seed
        self.default_arena = default_arena
        self.env_kind: str | None = None
        self.mode = "agent"
        self.clock = "fast"
        self.closed = False
        # arena session state
        self.config: ArenaConfig | None = None
        self.scheme = None
        self.n_max = 3
        self.sim = None
        self.rng = np.random.default_rng(default_seed)
        self.sequence: ModelSequence = ModelSequence()
        self.recent: list[Action] = []
        self.trajectory: EpisodeBuilder | None = None
        self.demo: EpisodeBuilder | None = None
        self.demo_segments = 0
        self.telemetry = TelemetryWindow()
        self._queries_since_report = 0
        self.pending_override: Action | None = None
        # progression session state
        self.model = None
        self.progress = None

    # -- message entry points ------------------------------------------------

    def receive(self, line: str | bytes) -> list[dict]:
        try:
            msg = decode_line(line)
        except ProtocolError as exc:
            return [error_message(str(exc))]
        return self.handle(msg)

    def handle(self, msg: dict) -> list[dict]:
        kind = msg.get("kind")
        try:
            if kind == "reset":
                return self._handle_reset(msg)
            if kind == "step":
                return self._handle_step(msg)
            if kind == "override":
                return self._handle_override(msg)
            if kind == "demo-start":
                return self._handle_demo_start(msg)
            if kind == "demo-end":
                return self._handle_demo_end(msg)
            if kind == "competence":
                return [self._competence_message()]
            if kind == "save":
                return self._handle_save(msg)
            if kind == "load":
                return self._handle_load(msg)
            return [error_message(f"unknown message kind {kind!r}")]
        except (ValueError, KeyError, TypeError, OSError) as exc:
            return [error_message(f"{type(exc).__name__}: {exc}")]

    # -- lifecycle -------------------------------------------------------------

    def _handle_reset(self, msg: dict) -> list[dict]:
        env = msg.get("env", "arena")
        mode = msg.get("mode", "agent")
        clock = msg.get("clock", "fast")
        if env not in ("arena", "progression"):
            return [error_message(f"unknown environment kind {env!r}")]
        if mode not in MODES:
            return [error_message(f"unknown mode {mode!r}")]
        if clock not in CLOCKS:
            return [error_message(f"unknown clock {clock!r}")]
        self.mode = mode
        self.clock = clock
        self.env_kind = env
        seed = int(msg.get("seed", self.default_seed))
        self.rng = np.random.default_rng(seed)

        if env == "progression":
            doc = msg.get("config")
            self.model = model_from_doc(doc) if doc else event_career_model()
            self.progress = initial_state(self.model)
            return [self._progression_state_message(events=())]

        doc = msg.get("config")
        if doc:
            self.config = config_from_doc(doc)
        elif self.default_arena is not None:
            self.config = self.default_arena
        else:
            self.config = default_config(seed=seed)
        levels = int(msg.get("levels", 3))
        self.n_max = int(msg.get("n_max", 3))
        self.scheme = arena_scheme(self.config, levels=levels)
        self.sim = arena_reset(self.config)
        self.recent = []
        self.trajectory = EpisodeBuilder(episode_meta(self.config))
        self.demo = None
        self.demo_segments = 0
        self.telemetry = TelemetryWindow()
        self._queries_since_report = 0
        if not self.sequence.ensembles or msg.get("fresh_models", False):
            self.sequence = ModelSequence(
                fallback=arena_fallback(self.config), fallback_name="obstacle-avoidance"
            )
        return [self._state_message(action=None, source=None, events=(), include_scene=True)]

    # -- stepping ----------------------------------------------------------------

    def _policy_action(self) -> tuple[Action, Provenance]:
        obs = features(self.config, self.sim)
        action, prov = sequence_policy_action(self.sequence, obs, self.recent, self.rng)
        self.telemetry.record(prov)
        self._queries_since_report += 1
        return action, prov

    def _advance(self, action: Action, source: str) -> tuple[dict, list[dict]]:
        obs = features(self.config, self.sim)
        if self.demo is not None and source == "human":
            self.demo.append(obs, action)
        self.trajectory.append(obs, action)
        self.sim, events = arena_step(self.config, self.sim, action)
        self.recent.append(action)
        if len(self.recent) > self.n_max:
            self.recent.pop(0)
        extra = []
        if self._queries_since_report >= self.telemetry.size:
            self._queries_since_report = 0
            extra.append(self._competence_message())
        return self._state_message(action=action, source=source, events=events), extra

    def _handle_step(self, msg: dict) -> list[dict]:
        if self.env_kind == "progression":
            return self._handle_progression_step(msg)
        if self.env_kind is None:
            return [error_message("no environment; send reset first")]
        if self.clock == "live":
            return [error_message("live sessions tick themselves; send override instead")]
        if "channel" in msg:
            if self.mode == "agent":
                return [error_message("agent sessions step without an action")]
            if self.mode == "mixed" and self.demo is None:
                return [error_message("mixed sessions need demo-start before human actions")]
            action = _action_from_msg(msg)
            state_msg, extra = self._advance(action, source="human")
            return [state_msg] + extra
        if self.mode == "human-override":
            return [error_message("human-override sessions must send actions")]
        if self.demo is not None:
            return [error_message("a demo segment is active; send override actions")]
        action, prov = self._policy_action()
        source = FALLBACK if prov.source == FALLBACK else f"ensemble:{prov.ensemble_index}"
        state_msg, extra = self._advance(action, source=source)
        return [state_msg] + extra

    def _handle_progression_step(self, msg: dict) -> list[dict]:
        if self.model is None:
            return [error_message("no environment; send reset first")]
        action_id = msg.get("action")
        if not action_id:
            return [error_message("progression sessions step with an action id")]
        action = self.model.action_by_id(str(action_id))
        if action not in available_actions(self.model, self.progress):
            # acknowledged with a rejected flag rather than dropped
            reply = self._progression_state_message(events=())
            reply["rejected"] = action.id
            return [reply]
        self.progress = apply_action(self.model, self.progress, action)
        events = ("goal-reached",) if goal_reached(self.model, self.progress) else ()
        return [self._progression_state_message(events=events)]

    def _handle_override(self, msg: dict) -> list[dict]:
        if self.env_kind != "arena":
            return [error_message("override applies to arena sessions")]
        if self.mode not in ("mixed", "human-override"):
            return [error_message("override requires mixed or human-override mode")]
        if self.mode == "mixed" and self.demo is None:
            return [error_message("no demo segment active; send demo-start first")]
        action = _action_from_msg(msg)
        if self.clock == "live":
            self.pending_override = action
            return []
        state_msg, extra = self._advance(action, source="human")
        return [state_msg] + extra

    # -- demonstration segments -----------------------------------------------------

    def _handle_demo_start(self, msg: dict) -> list[dict]:
        if self.env_kind != "arena":
            return [error_message("demonstrations apply to arena sessions")]
        if self.mode != "mixed":
            return [error_message("demo segments require mixed mode")]
        if self.demo is not None:
            return [error_message("demo segment already active")]
        self.demo = EpisodeBuilder(episode_meta(self.config, env_id="arena/demo"))
        return [make_message("demo-start", segment=self.demo_segments)]

    def _handle_demo_end(self, msg: dict) -> list[dict]:
        if self.demo is None:
            return [error_message("demo-end without demo-start")]
        segment = self.demo.build()
        self.demo = None
        replies = []
        if len(segment):
            self.sequence = push_demonstration(self.sequence, segment, self.scheme, self.n_max)
            self.demo_segments += 1
        replies.append(
            make_message(
                "demo-end",
                steps=len(segment),
                ensembles=len(self.sequence.ensembles),
            )
        )
        if len(self.telemetry):
            replies.append(self._competence_message())
        return replies

    # -- persistence -------------------------------------------------------------------

    def _handle_save(self, msg: dict) -> list[dict]:
        what = msg.get("artifact")
        name = str(msg.get("name", "session"))
        if what == "episode":
            if self.trajectory is None:
                return [error_message("nothing recorded yet")]
            path = persist.save("episode", self.trajectory.build(), self.root, name)
        elif what == "ensemble":
            if not self.sequence.ensembles:
                return [error_message("no fitted ensemble to save")]
            path = persist.save("ensemble", self.sequence.ensembles[-1], self.root, name)
        elif what == "scheme":
            if self.scheme is None:
                return [error_message("no scheme; send reset first")]
            path = persist.save("scheme", self.scheme, self.root, name)
        else:
            return [error_message(f"cannot save artifact kind {what!r}")]
        return [make_message("saved", artifact=what, path=path)]

    def _handle_load(self, msg: dict) -> list[dict]:
        path = msg.get("path")
        if not path:
            return [error_message("load needs a path")]
        try:
            artifact = persist.restore(str(path))
        except persist.PersistError as exc:
            return [error_message(str(exc))]
        if isinstance(artifact, Episode):
            if self.scheme is None:
                return [error_message("reset an arena session before loading demonstrations")]
            self.sequence = push_demonstration(self.sequence, artifact, self.scheme, self.n_max)
            return [make_message("loaded", format="episode", ensembles=len(self.sequence.ensembles))]
        return [error_message("only episode artifacts can be loaded into a session")]

    # -- live ticking ---------------------------------------------------------------------

    def tick(self) -> list[dict]:
        """One live-mode tick: pending human action during a demo, else policy."""
        if self.env_kind != "arena" or self.sim is None:
            return []
        if self.demo is not None:
            action = self.pending_override or Action("no-op")
            self.pending_override = None
            state_msg, extra = self._advance(action, source="human")
            return [state_msg] + extra
        if self.mode == "human-override":
            action = self.pending_override or Action("no-op")
            self.pending_override = None
            state_msg, extra = self._advance(action, source="human")
            return [state_msg] + extra
        action, prov = self._policy_action()
        source = FALLBACK if prov.source == FALLBACK else f"ensemble:{prov.ensemble_index}"
        state_msg, extra = self._advance(action, source=source)
        return [state_msg] + extra

    # -- message builders ---------------------------------------------------------------------

    def _state_message(self, action, source, events, include_scene: bool = False) -> dict:
        obs = features(self.config, self.sim)
        payload = {
            "t": self.sim.t,
            "continuous": [round(v, 6) for v in obs.continuous],
            "categorical": list(obs.categorical),
            "adversaries": [[round(x, 3), round(y, 3)] for x, y in self.sim.adversaries],
            "collected": sorted(self.sim.collected),
            "events": list(events),
            "demo": self.demo is not None,
        }
        if include_scene:
            # static geometry rides only on the reset reply, keeping per-tick
            # state records well inside the 1 kB envelope
            payload["scene"] = {
                "bounds": list(self.config.bounds),
                "obstacles": [[b.x0, b.y0, b.x1, b.y1] for b in self.config.obstacles],
                "points_of_interest": [list(p) for p in self.config.points_of_interest],
                "tick_ms": self.config.tick_ms,
            }
        if action is not None:
            payload["action"] = {"channel": action.channel, "args": list(action.args)}
            payload["source"] = source
        return make_message("state", **payload)

    def _progression_state_message(self, events) -> dict:
        s = self.progress
        return make_message(
            "state",
            t=s.elapsed,
            resources=dict(zip(self.model.resource_names, s.resources)),
            level=s.level,
            xp=s.xp,
            events_done=s.events_done,
            events_attempted=s.events_attempted,
            in_event=s.in_event,
            events=list(events),
        )

    def _competence_message(self) -> dict:
        if len(self.telemetry):
            comp = self.telemetry.competence
            conf = self.telemetry.confidence
        else:
            comp = conf = 0.0
        return make_message(
            "competence",
            competence=comp,
            confidence=conf,
            window=len(self.telemetry),
            segments=self.demo_segments,
        )


def _action_from_msg(msg: dict) -> Action:
    channel = msg.get("channel")
    if not isinstance(channel, str):
        raise ValueError("action message needs a channel")
    args = msg.get("args", [])
    return Action(channel=channel, args=tuple(float(a) for a in args))


class GatewayServer:
    """TCP + WebSocket front end multiplexing isolated sessions."""

    def __init__(
        self,
        host: str = "127.0.0.1",
        port: int = 7901,
        ws_port: int | None = None,
        root: str = "artifacts",
        default_seed: int = 0,
        default_arena: ArenaConfig | None = None,
    ):
        self.host = host
        self.port = port
        self.ws_port = ws_port
        self.root = root
        self.default_seed = default_seed
        self.default_arena = default_arena
        self._tcp_server: asyncio.AbstractServer | None = None
        self._ws_server = None

    def _new_session(self) -> Session:
        return Session(
            root=self.root, default_seed=self.default_seed, default_arena=self.default_arena
        )

    async def start(self) -> None:
        self._tcp_server = await asyncio.start_server(self._on_tcp, self.host, self.port)
        if self.ws_port is not None:
            import websockets

            self._ws_server = await websockets.serve(self._on_ws, self.host, self.ws_port)

    @property
    def bound_port(self) -> int:
        return self._tcp_server.sockets[0].getsockname()[1]

    @property
    def bound_ws_port(self) -> int:
        return self._ws_server.sockets[0].getsockname()[1]

    async def stop(self) -> None:
        if self._tcp_server is not None:
            self._tcp_server.close()
            await self._tcp_server.wait_closed()
        if self._ws_server is not None:
            self._ws_server.close()
            await self._ws_server.wait_closed()

    async def serve_forever(self) -> None:
        await self.start()
        try:
            await asyncio.Event().wait()
        finally:
            await self.stop()

    async def _session_loop(self, session: Session, incoming, send) -> None:
        """Shared per-connection loop: reader, writer, and live ticker."""
        outbox: asyncio.Queue = asyncio.Queue()

        async def writer() -> None:
            while True:
                record = await outbox.get()
                await send(record)

        async def ticker() -> None:
            loop = asyncio.get_running_loop()
            period = None
            deadline = None
            while True:
                if session.clock != "live" or session.env_kind != "arena":
                    await asyncio.sleep(0.02)
                    deadline = None
                    continue
                if period is None or deadline is None:
                    period = session.config.tick_ms / 1000.0
                    deadline = loop.time() + period
                await asyncio.sleep(max(0.0, deadline - loop.time()))
                deadline += period
                for record in session.tick():
                    outbox.put_nowait(record)

        writer_task = asyncio.create_task(writer())
        ticker_task = asyncio.create_task(ticker())
        try:
            async for line in incoming:
                for record in session.receive(line):
                    outbox.put_nowait(record)
        finally:
            ticker_task.cancel()
            # flush whatever is queued before tearing down
            while not outbox.empty():
                try:
                    await send(outbox.get_nowait())
                except Exception:
                    break
            writer_task.cancel()

    async def _on_tcp(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        session = self._new_session()

        async def lines():
            while True:
                line = await reader.readline()
                if not line:
                    return
                yield line

        async def send(record: dict) -> None:
            writer.write(encode_message(record).encode("utf-8"))
            await writer.drain()

        try:
            await self._session_loop(session, lines(), send)
        finally:
            writer.close()
            try:
                await writer.wait_closed()
            except (ConnectionError, OSError):
                pass

    async def _on_ws(self, websocket) -> None:
        session = self._new_session()

        async def lines():
            async for message in websocket:
                yield message

        async def send(record: dict) -> None:
            await websocket.send(encode_message(record).strip())

        try:
            await self._session_loop(session, lines(), send)
        except Exception:
            pass


def serve(
    host: str = "127.0.0.1",
    port: int = 7901,
    ws_port: int | None = None,
    root: str = "artifacts",
    default_seed: int = 0,
    config_path: str | None = None,
) -> None:
    """Blocking entry point used by the CLI."""
    default_arena = None
    if config_path is not None:
        from . import persist

        default_arena = persist.restore(config_path)
    server = GatewayServer(
        host=host,
        port=port,
        ws_port=ws_port,
        root=root,
        default_seed=default_seed,
        default_arena=default_arena,
    )
    asyncio.run(server.serve_forever())

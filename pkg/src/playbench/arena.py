"""Deterministic seedable 2D top-down arena.

A stand-in for the open-world game at desk scale: rectangular world with
axis-aligned box obstacles, collectible points of interest, and scripted
pursuit adversaries. The simulator is turn-based and pure: stepping is a
function of (config, state, action) with no hidden randomness, so a config
plus an action sequence replays bit-identically. The only seeded draw is
adversary placement at reset.

Units: world units, seconds, radians. One tick advances tick_ms of
simulated time regardless of wall clock, so training can overclock freely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .core import Action, Episode, EpisodeBuilder, EpisodeMeta, State
from .quantize import QuantizationScheme, build_scheme

CONFIG_FORMAT = "playbench/arena-config"
CONFIG_VERSION = 1

# channel -> argument arity
CHANNELS: Mapping[str, int] = {
    "move": 2,
    "turn": 1,
    "fire": 0,
    "interact": 0,
    "sprint-toggle": 0,
    "no-op": 0,
}

SCRIPTED_BEHAVIORS = ("circler", "zigzag", "aggressive", "sniper", "exploratory", "sneaky")

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Box:
    """Axis-aligned obstacle, corners (x0, y0) <= (x1, y1)."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError(f"degenerate box {self}")

    def contains(self, x: float, y: float, pad: float = 0.0) -> bool:
        return self.x0 - pad < x < self.x1 + pad and self.y0 - pad < y < self.y1 + pad


@dataclass(frozen=True)
class ArenaConfig:
    bounds: tuple[float, float] = (40.0, 30.0)
    obstacles: tuple[Box, ...] = ()
    points_of_interest: tuple[tuple[float, float], ...] = ()
    adversaries: int = 0
    adversary_speed: float = 3.0  # units/s
    tick_ms: int = 33
    seed: int = 0
    spawn: tuple[float, float] = (3.0, 3.0)
    agent_speed: float = 5.0  # units/s
    sprint_multiplier: float = 1.8
    agent_radius: float = 0.4
    interact_radius: float = 1.5
    cone_half_angle: float = math.pi / 6.0
    sight_range: float = 12.0
    max_turn: float = math.pi / 8.0  # per tick, clamps turn args

    def __post_init__(self):
        w, h = self.bounds
        if w <= 0 or h <= 0:
            raise ValueError(f"bounds must be positive, got {self.bounds}")
        if self.tick_ms <= 0:
            raise ValueError(f"tick must be positive, got {self.tick_ms}")
        if self.adversaries < 0:
            raise ValueError("adversary count must be >= 0")
        for box in self.obstacles:
            if box.x0 < 0 or box.y0 < 0 or box.x1 > w or box.y1 > h:
                raise ValueError(f"obstacle {box} outside bounds {self.bounds}")
        for px, py in self.points_of_interest:
            if not (0 <= px <= w and 0 <= py <= h):
                raise ValueError(f"point of interest ({px}, {py}) outside bounds")
        if not self._free(self.spawn[0], self.spawn[1]):
            raise ValueError(f"spawn {self.spawn} collides with an obstacle")

    def _free(self, x: float, y: float) -> bool:
        w, h = self.bounds
        r = self.agent_radius
        if not (r <= x <= w - r and r <= y <= h - r):
            return False
        return not any(b.contains(x, y, pad=r) for b in self.obstacles)

    @property
    def tick(self) -> float:
        return self.tick_ms / 1000.0

    @property
    def diagonal(self) -> float:
        return math.hypot(self.bounds[0], self.bounds[1])


@dataclass(frozen=True)
class ArenaState:
    t: int
    x: float
    y: float
    vx: float
    vy: float
    heading: float  # radians, [0, 2*pi)
    sprinting: bool
    adversaries: tuple[tuple[float, float], ...]
    collected: frozenset[int] = frozenset()
    blocked: bool = False
    contact_normal: tuple[float, float] = (0.0, 0.0)
    in_cone: bool = False

    @property
    def inventory(self) -> int:
        return len(self.collected)


def default_config(seed: int = 0, adversaries: int = 2) -> ArenaConfig:
    """The standard desk arena: two wall segments, a block, five pickups."""
    return ArenaConfig(
        bounds=(40.0, 30.0),
        obstacles=(
            Box(10.0, 8.0, 12.0, 22.0),
            Box(22.0, 6.0, 24.0, 14.0),
            Box(28.0, 18.0, 34.0, 21.0),
        ),
        points_of_interest=((6.0, 25.0), (18.0, 5.0), (20.0, 26.0), (33.0, 4.0), (36.0, 26.0)),
        adversaries=adversaries,
        seed=seed,
    )


def adversary_spawns(config: ArenaConfig) -> tuple[tuple[float, float], ...]:
    """Seeded placements, rejection-sampled into free space away from spawn."""
    rng = np.random.default_rng(config.seed)
    w, h = config.bounds
    spawns = []
    while len(spawns) < config.adversaries:
        x = float(rng.uniform(1.0, w - 1.0))
        y = float(rng.uniform(1.0, h - 1.0))
        if not config._free(x, y):
            continue
        if math.hypot(x - config.spawn[0], y - config.spawn[1]) < 8.0:
            continue
        spawns.append((x, y))
    return tuple(spawns)


def reset(config: ArenaConfig) -> ArenaState:
    """Initial state; identical seeds give bit-identical placement."""
    state = ArenaState(
        t=0,
        x=config.spawn[0],
        y=config.spawn[1],
        vx=0.0,
        vy=0.0,
        heading=0.0,
        sprinting=False,
        adversaries=adversary_spawns(config),
    )
    return replace(state, in_cone=_any_in_cone(config, state))


def _wrap_angle(a: float) -> float:
    return a % _TWO_PI


def _rel_angle(a: float) -> float:
    """Wrap to [-pi, pi)."""
    return (a + math.pi) % _TWO_PI - math.pi


def _move_point(
    config: ArenaConfig, x: float, y: float, dx: float, dy: float, radius: float
) -> tuple[float, float, float, float]:
    """Axis-separated move with clamping; returns (x, y, normal_x, normal_y).

    The normal is the unit-ish direction pointing away from whatever was
    hit (zero when the move was clean).
    """
    w, h = config.bounds
    nx = ny = 0.0
    tx = x + dx
    if tx < radius:
        tx, nx = radius, 1.0
    elif tx > w - radius:
        tx, nx = w - radius, -1.0
    for box in config.obstacles:
        if box.contains(tx, y, pad=radius):
            if dx > 0:
                tx, nx = box.x0 - radius, -1.0
            elif dx < 0:
                tx, nx = box.x1 + radius, 1.0
    ty = y + dy
    if ty < radius:
        ty, ny = radius, 1.0
    elif ty > h - radius:
        ty, ny = h - radius, -1.0
    for box in config.obstacles:
        if box.contains(tx, ty, pad=radius):
            if dy > 0:
                ty, ny = box.y0 - radius, -1.0
            elif dy < 0:
                ty, ny = box.y1 + radius, 1.0
    return tx, ty, nx, ny


def _nearest_adversary(state: ArenaState) -> tuple[int, float, float] | None:
    """(index, distance, absolute bearing) of the closest adversary."""
    best = None
    for i, (ax, ay) in enumerate(state.adversaries):
        d = math.hypot(ax - state.x, ay - state.y)
        if best is None or d < best[1]:
            best = (i, d, math.atan2(ay - state.y, ax - state.x))
    return best


def _any_in_cone(config: ArenaConfig, state: ArenaState) -> bool:
    for ax, ay in state.adversaries:
        d = math.hypot(ax - state.x, ay - state.y)
        if d > config.sight_range:
            continue
        bearing = math.atan2(ay - state.y, ax - state.x)
        if abs(_rel_angle(bearing - state.heading)) <= config.cone_half_angle:
            return True
    return False


def step(config: ArenaConfig, state: ArenaState, action: Action) -> tuple[ArenaState, tuple[str, ...]]:
    """One tick: agent kinematics, collisions, pickups, adversary pursuit.

    Pure and deterministic; unknown channels are rejected.
    """
    if action.channel not in CHANNELS:
        raise ValueError(f"unknown action channel {action.channel!r}")
    expected = CHANNELS[action.channel]
    if len(action.args) != expected:
        raise ValueError(
            f"action.args[{action.channel}]: expected arity {expected}, got {len(action.args)}"
        )
    dt = config.tick
    events: list[str] = []

    x, y = state.x, state.y
    heading = state.heading
    sprinting = state.sprinting
    collected = state.collected
    vx = vy = 0.0
    blocked = False
    normal = (0.0, 0.0)

    if action.channel == "sprint-toggle":
        sprinting = not sprinting
    elif action.channel == "turn":
        dtheta = max(-config.max_turn, min(config.max_turn, action.args[0]))
        heading = _wrap_angle(heading + dtheta)
    elif action.channel == "move":
        mx, my = action.args
        norm = math.hypot(mx, my)
        if norm > 1e-12:
            speed = config.agent_speed * (config.sprint_multiplier if sprinting else 1.0)
            vx = mx / norm * speed
            vy = my / norm * speed
            heading = _wrap_angle(math.atan2(vy, vx))
            x2, y2, nx, ny = _move_point(config, x, y, vx * dt, vy * dt, config.agent_radius)
            blocked = nx != 0.0 or ny != 0.0
            if blocked:
                events.append("blocked")
                mag = math.hypot(nx, ny)
                normal = (nx / mag, ny / mag)
                # report the achieved velocity, not the commanded one
                vx = (x2 - x) / dt
                vy = (y2 - y) / dt
            x, y = x2, y2
    elif action.channel == "interact":
        best = None
        for i, (px, py) in enumerate(config.points_of_interest):
            if i in collected:
                continue
            d = math.hypot(px - x, py - y)
            if d <= config.interact_radius and (best is None or d < best[1]):
                best = (i, d)
        if best is not None:
            collected = collected | {best[0]}
            events.append("picked-up")
    elif action.channel == "fire":
        if _any_in_cone(config, state):
            spawns = adversary_spawns(config)
            target = None
            for i, (ax, ay) in enumerate(state.adversaries):
                d = math.hypot(ax - x, ay - y)
                if d > config.sight_range:
                    continue
                bearing = math.atan2(ay - y, ax - x)
                if abs(_rel_angle(bearing - heading)) <= config.cone_half_angle:
                    if target is None or d < target[1]:
                        target = (i, d)
            if target is not None:
                events.append("hit")
                advs = list(state.adversaries)
                advs[target[0]] = spawns[target[0]]
                state = replace(state, adversaries=tuple(advs))
    # no-op: nothing

    # scripted pursuit: adversaries close on the agent, stop at standoff range
    advs = []
    for ax, ay in state.adversaries:
        d = math.hypot(x - ax, y - ay)
        if d > 1.0:
            step_len = min(config.adversary_speed * dt, d - 1.0)
            ux, uy = (x - ax) / d, (y - ay) / d
            ax, ay, _, _ = _move_point(config, ax, ay, ux * step_len, uy * step_len, 0.3)
        advs.append((ax, ay))

    new_state = ArenaState(
        t=state.t + 1,
        x=x,
        y=y,
        vx=vx,
        vy=vy,
        heading=heading,
        sprinting=sprinting,
        adversaries=tuple(advs),
        collected=collected,
        blocked=blocked,
        contact_normal=normal,
        in_cone=False,
    )
    new_state = replace(new_state, in_cone=_any_in_cone(config, new_state))
    return new_state, tuple(events)


# --- model-facing state abstraction ------------------------------------------

N_CONTINUOUS = 9
N_CATEGORICAL = 4


def features(config: ArenaConfig, state: ArenaState) -> State:
    """The <=32 continuous + <=8 categorical abstraction fed to models.

    Layout: x, y, vx, vy, heading, nearest-adversary distance and relative
    bearing, nearest-unvisited-pickup distance and relative bearing;
    flags: blocked, adversary-in-cone, possession, inventory count.
    """
    adv = _nearest_adversary(state)
    if adv is None:
        adv_d, adv_b = config.diagonal, 0.0
    else:
        adv_d = adv[1]
        adv_b = _rel_angle(adv[2] - state.heading)
    poi = nearest_poi(config, state)
    if poi is None:
        poi_d, poi_b = config.diagonal, 0.0
    else:
        poi_d = poi[1]
        poi_b = _rel_angle(poi[2] - state.heading)
    return State(
        continuous=(
            state.x,
            state.y,
            state.vx,
            state.vy,
            state.heading,
            adv_d,
            adv_b,
            poi_d,
            poi_b,
        ),
        categorical=(
            int(state.blocked),
            int(state.in_cone),
            int(state.inventory > 0),
            state.inventory,
        ),
    )


def nearest_poi(config: ArenaConfig, state: ArenaState) -> tuple[int, float, float] | None:
    """(index, distance, absolute bearing) of the nearest uncollected pickup."""
    best = None
    for i, (px, py) in enumerate(config.points_of_interest):
        if i in state.collected:
            continue
        d = math.hypot(px - state.x, py - state.y)
        if best is None or d < best[1]:
            best = (i, d, math.atan2(py - state.y, px - state.x))
    return best


def feature_ranges(config: ArenaConfig) -> list[tuple[float, float]]:
    """Declared (lo, hi) spans matching the features() layout."""
    w, h = config.bounds
    vmax = config.agent_speed * config.sprint_multiplier
    diag = config.diagonal
    return [
        (0.0, w),
        (0.0, h),
        (-vmax, vmax),
        (-vmax, vmax),
        (0.0, _TWO_PI),
        (0.0, diag + 1.0),
        (-math.pi, math.pi),
        (0.0, diag + 1.0),
        (-math.pi, math.pi),
    ]


def arg_ranges(config: ArenaConfig) -> dict[str, list[tuple[float, float]]]:
    return {
        "move": [(-1.0, 1.0), (-1.0, 1.0)],
        "turn": [(-config.max_turn, config.max_turn)],
        "fire": [],
        "interact": [],
        "sprint-toggle": [],
        "no-op": [],
    }


def arena_scheme(
    config: ArenaConfig,
    levels: int = 3,
    decay: float = 0.5,
    sigma0: Sequence[float] | None = None,
) -> QuantizationScheme:
    """Full-span coarsest bins by default: level 0 always matches."""
    return build_scheme(
        feature_ranges(config),
        levels=levels,
        sigma0=sigma0,
        decay=decay,
        arg_ranges=arg_ranges(config),
    )


def episode_meta(config: ArenaConfig, env_id: str = "arena") -> EpisodeMeta:
    return EpisodeMeta(
        env_id=env_id,
        seed=config.seed,
        continuous_dim=N_CONTINUOUS,
        categorical_dim=N_CATEGORICAL,
        channels=dict(CHANNELS),
        tick_ms=config.tick_ms,
    )


# --- fallback and scripted behaviors ------------------------------------------


def fallback_action(state: ArenaState) -> Action:
    """Obstacle-avoidance default: when blocked, move out along the contact normal."""
    if not state.blocked:
        return Action("no-op")
    nx, ny = state.contact_normal
    if nx == 0.0 and ny == 0.0:
        return Action("no-op")
    return Action("move", (nx, ny))


def arena_fallback(config: ArenaConfig):
    """Fallback over model-facing features, for ModelSequence wiring.

    Reads the blocked flag and approximates the escape direction by
    reversing the recorded velocity; used where only features are visible.
    """

    def fallback(obs: State) -> Action:
        blocked = bool(obs.categorical[0])
        if not blocked:
            return Action("no-op")
        vx, vy = obs.continuous[2], obs.continuous[3]
        norm = math.hypot(vx, vy)
        if norm < 1e-9:
            heading = obs.continuous[4]
            return Action("move", (-math.cos(heading), -math.sin(heading)))
        return Action("move", (-vx / norm, -vy / norm))

    return fallback


def scripted_policy(
    name: str, config: ArenaConfig, state: ArenaState, rng: np.random.Generator
) -> Action:
    """Deterministic-given-seed action for one of the named styles."""
    if name not in SCRIPTED_BEHAVIORS:
        raise ValueError(f"unknown behavior {name!r}; choose from {SCRIPTED_BEHAVIORS}")
    if state.blocked:
        return fallback_action(state)
    w, h = config.bounds

    if name == "circler":
        cx, cy = w / 2.0, h / 2.0
        radius = 0.3 * min(w, h)
        dx, dy = state.x - cx, state.y - cy
        d = math.hypot(dx, dy)
        if d < 1e-9:
            return Action("move", (1.0, 0.0))
        ux, uy = dx / d, dy / d
        # counter-clockwise tangent plus a pull toward the ring
        tx, ty = -uy, ux
        gain = (radius - d) / radius
        mx, my = tx + gain * ux, ty + gain * uy
        # small per-step wobble so reseeded runs are near but not identical
        jitter = float(rng.normal(0.0, 0.03))
        cj, sj = math.cos(jitter), math.sin(jitter)
        mx, my = mx * cj - my * sj, mx * sj + my * cj
        norm = math.hypot(mx, my) or 1.0
        return Action("move", (mx / norm, my / norm))

    if name == "zigzag":
        margin = 2.0
        dx = 1.0 if state.vx == 0.0 else math.copysign(1.0, state.vx)
        dy = 0.6 if state.vy == 0.0 else math.copysign(0.6, state.vy)
        if state.x > w - margin:
            dx = -abs(dx)
        elif state.x < margin:
            dx = abs(dx)
        if state.y > h - margin:
            dy = -abs(dy)
        elif state.y < margin:
            dy = abs(dy)
        norm = math.hypot(dx, dy)
        return Action("move", (dx / norm, dy / norm))

    if name == "aggressive":
        adv = _nearest_adversary(state)
        if adv is None:
            return Action("no-op")
        _, d, bearing = adv
        if state.in_cone and d <= 0.8 * config.sight_range:
            return Action("fire")
        rel = _rel_angle(bearing - state.heading)
        if abs(rel) > config.cone_half_angle and d <= config.sight_range:
            return Action("turn", (max(-config.max_turn, min(config.max_turn, rel)),))
        return Action("move", (math.cos(bearing), math.sin(bearing)))

    if name == "sniper":
        if state.in_cone:
            return Action("fire")
        return Action("no-op")

    if name == "exploratory":
        poi = nearest_poi(config, state)
        if poi is None:
            return Action("no-op")
        _, d, bearing = poi
        if d <= config.interact_radius:
            return Action("interact")
        mx, my = math.cos(bearing), math.sin(bearing)
        # sidestep close adversaries without letting avoidance stall the tour
        for ax, ay in state.adversaries:
            ad = math.hypot(ax - state.x, ay - state.y)
            if 1e-9 < ad < 4.0:
                weight = 0.7 * (4.0 - ad) / 4.0
                mx -= weight * (ax - state.x) / ad
                my -= weight * (ay - state.y) / ad
        norm = math.hypot(mx, my)
        if norm < 1e-9:
            return Action("no-op")
        return Action("move", (mx / norm, my / norm))

    # sneaky: head for the objective, sidestep when inside a pursuit cone
    poi = nearest_poi(config, state)
    if poi is None:
        return Action("no-op")
    _, d, bearing = poi
    if d <= config.interact_radius:
        return Action("interact")
    threat = None
    for ax, ay in state.adversaries:
        ad = math.hypot(state.x - ax, state.y - ay)
        if ad <= config.sight_range and (threat is None or ad < threat[0]):
            threat = (ad, ax, ay)
    if threat is not None:
        _, ax, ay = threat
        toward = math.atan2(state.y - ay, state.x - ax)
        side = 1.0 if rng.random() < 0.5 else -1.0
        perp = toward + side * math.pi / 2.0
        return Action("move", (math.cos(perp), math.sin(perp)))
    return Action("move", (math.cos(bearing), math.sin(bearing)))


def record_episode(
    config: ArenaConfig,
    behavior: str,
    steps: int,
    seed: int | None = None,
    env_id: str | None = None,
) -> Episode:
    """Roll a scripted behavior for a fixed number of ticks into an episode."""
    rng = np.random.default_rng(config.seed if seed is None else seed)
    builder = EpisodeBuilder(episode_meta(config, env_id or f"arena/{behavior}"))
    state = reset(config)
    for _ in range(steps):
        action = scripted_policy(behavior, config, state, rng)
        builder.append(features(config, state), action)
        state, _ = step(config, state, action)
    return builder.build()


# --- config document ----------------------------------------------------------


def config_to_doc(config: ArenaConfig) -> dict:
    return {
        "format": CONFIG_FORMAT,
        "version": CONFIG_VERSION,
        "bounds": list(config.bounds),
        "obstacles": [[b.x0, b.y0, b.x1, b.y1] for b in config.obstacles],
        "points_of_interest": [list(p) for p in config.points_of_interest],
        "adversaries": config.adversaries,
        "adversary_speed": config.adversary_speed,
        "tick_ms": config.tick_ms,
        "seed": config.seed,
        "spawn": list(config.spawn),
        "agent_speed": config.agent_speed,
        "sprint_multiplier": config.sprint_multiplier,
        "agent_radius": config.agent_radius,
        "interact_radius": config.interact_radius,
        "cone_half_angle": config.cone_half_angle,
        "sight_range": config.sight_range,
        "max_turn": config.max_turn,
    }


def config_from_doc(doc: Mapping) -> ArenaConfig:
    if doc.get("format") != CONFIG_FORMAT:
        raise ValueError(f"not an arena config: {doc.get('format')!r}")
    if doc.get("version") != CONFIG_VERSION:
        raise ValueError(
            f"arena config version mismatch: file has {doc.get('version')}, "
            f"reader supports {CONFIG_VERSION}"
        )
    return ArenaConfig(
        bounds=tuple(doc["bounds"]),
        obstacles=tuple(Box(*b) for b in doc["obstacles"]),
        points_of_interest=tuple(tuple(p) for p in doc["points_of_interest"]),
        adversaries=int(doc["adversaries"]),
        adversary_speed=float(doc["adversary_speed"]),
        tick_ms=int(doc["tick_ms"]),
        seed=int(doc["seed"]),
        spawn=tuple(doc["spawn"]),
        agent_speed=float(doc["agent_speed"]),
        sprint_multiplier=float(doc["sprint_multiplier"]),
        agent_radius=float(doc["agent_radius"]),
        interact_radius=float(doc["interact_radius"]),
        cone_half_angle=float(doc["cone_half_angle"]),
        sight_range=float(doc["sight_range"]),
        max_turn=float(doc["max_turn"]),
    )

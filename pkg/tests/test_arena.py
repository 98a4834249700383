import math

import numpy as np
import pytest

from playbench.arena import (
    Box,
    ArenaConfig,
    SCRIPTED_BEHAVIORS,
    config_from_doc,
    config_to_doc,
    default_config,
    fallback_action,
    features,
    record_episode,
    reset,
    scripted_policy,
    step,
)
from playbench.core import Action


def test_reset_deterministic(config):
    assert reset(config) == reset(config)


def test_reset_zero_adversaries():
    cfg = default_config(seed=1, adversaries=0)
    state = reset(cfg)
    assert state.adversaries == ()


def test_obstacle_outside_bounds_rejected():
    with pytest.raises(ValueError, match="outside bounds"):
        ArenaConfig(bounds=(10.0, 10.0), obstacles=(Box(8.0, 8.0, 12.0, 9.0),))


def test_move_into_open_space(config):
    state = reset(config)
    nxt, events = step(config, state, Action("move", (1.0, 0.0)))
    assert nxt.x == pytest.approx(state.x + config.agent_speed * config.tick)
    assert nxt.y == state.y
    assert not nxt.blocked
    assert "blocked" not in events


def test_move_into_wall_clamps_and_blocks():
    cfg = default_config(seed=0, adversaries=0)
    state = reset(cfg)
    for _ in range(200):
        state, events = step(cfg, state, Action("move", (-1.0, 0.0)))
        if state.blocked:
            break
    assert state.blocked
    assert state.x == pytest.approx(cfg.agent_radius)
    assert "blocked" in events


def test_positions_stay_legal_under_random_actions(config):
    rng = np.random.default_rng(3)
    state = reset(config)
    w, h = config.bounds
    for _ in range(400):
        channel = ("move", "turn", "fire", "interact", "sprint-toggle", "no-op")[
            rng.integers(6)
        ]
        if channel == "move":
            action = Action("move", tuple(rng.uniform(-1, 1, size=2)))
        elif channel == "turn":
            action = Action("turn", (float(rng.uniform(-0.4, 0.4)),))
        else:
            action = Action(channel)
        state, _ = step(config, state, action)
        assert config.agent_radius <= state.x <= w - config.agent_radius
        assert config.agent_radius <= state.y <= h - config.agent_radius
        for box in config.obstacles:
            assert not box.contains(state.x, state.y, pad=config.agent_radius * 0.99)


def test_unknown_channel_rejected(config):
    with pytest.raises(ValueError, match="unknown action channel"):
        step(config, reset(config), Action("teleport"))


def test_interact_picks_up_poi():
    cfg = default_config(seed=0, adversaries=0)
    px, py = cfg.points_of_interest[0]
    state = reset(cfg)
    state = type(state)(**{**state.__dict__, "x": px - 1.0, "y": py})
    nxt, events = step(cfg, state, Action("interact"))
    assert "picked-up" in events
    assert nxt.inventory == 1
    # model-facing flags follow
    obs = features(cfg, nxt)
    assert obs.categorical[2] == 1  # possession
    assert obs.categorical[3] == 1  # inventory count


def test_full_determinism_of_trajectories(config):
    rng = np.random.default_rng(5)
    actions = [
        Action("move", tuple(rng.uniform(-1, 1, size=2))) for _ in range(150)
    ]

    def run():
        state = reset(config)
        out = []
        for a in actions:
            state, _ = step(config, state, a)
            out.append((state.x, state.y, state.heading, state.adversaries))
        return out

    assert run() == run()


def test_fallback_noop_when_unblocked(config):
    assert fallback_action(reset(config)) == Action("no-op")


def test_fallback_moves_away_from_east_wall():
    cfg = default_config(seed=0, adversaries=0)
    state = reset(cfg)
    state = type(state)(**{**state.__dict__, "x": cfg.bounds[0] - cfg.agent_radius})
    blocked, _ = step(cfg, state, Action("move", (1.0, 0.0)))
    assert blocked.blocked
    action = fallback_action(blocked)
    assert action.channel == "move"
    assert action.args[0] < 0  # westward component


def test_fallback_unblocks_corner_within_ten_ticks():
    cfg = default_config(seed=0, adversaries=0)
    state = reset(cfg)
    # drive into the south-west corner
    for _ in range(300):
        state, _ = step(cfg, state, Action("move", (-1.0, -1.0)))
    assert state.blocked
    before = math.atan2(-1.0, -1.0)
    escape = fallback_action(state)
    after = math.atan2(escape.args[1], escape.args[0])
    turn = abs((after - before + math.pi) % (2 * math.pi) - math.pi)
    assert turn >= math.pi / 2  # at least 90 degrees away from the blocked push
    for _ in range(10):
        state, _ = step(cfg, state, fallback_action(state))
        if not state.blocked:
            break
    assert not state.blocked


def test_fallback_liveness_exhaustive():
    """Every blocked pose on a half-unit grid unblocks within 20 fallback steps."""
    cfg = default_config(seed=0, adversaries=0)
    w, h = cfg.bounds
    directions = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)]
    poses = checked = 0
    xs = np.arange(0.5, w, 0.5)
    ys = np.arange(0.5, h, 0.5)
    base = reset(cfg)
    for x in xs:
        for y in ys:
            if not cfg._free(float(x), float(y)):
                continue
            for dx, dy in directions:
                state = type(base)(**{**base.__dict__, "x": float(x), "y": float(y)})
                state, _ = step(cfg, state, Action("move", (dx, dy)))
                if not state.blocked:
                    continue
                poses += 1
                for _ in range(20):
                    state, _ = step(cfg, state, fallback_action(state))
                    if not state.blocked:
                        break
                assert not state.blocked, f"stuck at ({x}, {y}) pushing ({dx}, {dy})"
            checked += 1
    assert poses > 100  # the sweep actually exercised blocked states


def test_scripted_unknown_name_rejected(config):
    with pytest.raises(ValueError, match="unknown behavior"):
        scripted_policy("dancer", config, reset(config), np.random.default_rng(0))


def test_aggressive_closes_distance():
    cfg = default_config(seed=0, adversaries=1)
    state = reset(cfg)
    # put the adversary due north, agent facing north
    state = type(state)(**{
        **state.__dict__,
        "x": 20.0, "y": 10.0, "heading": math.pi / 2,
        "adversaries": ((20.0, 25.0),),
    })
    action = scripted_policy("aggressive", cfg, state, np.random.default_rng(0))
    assert action.channel == "move"
    assert action.args[1] > 0  # reduces the north distance


def test_sniper_fires_only_in_cone():
    cfg = default_config(seed=0, adversaries=1)
    base = reset(cfg)
    facing = type(base)(**{
        **base.__dict__, "x": 20.0, "y": 15.0, "heading": 0.0,
        "adversaries": ((26.0, 15.0),),
    })
    from playbench.arena import _any_in_cone

    facing = type(facing)(**{**facing.__dict__, "in_cone": _any_in_cone(cfg, facing)})
    assert scripted_policy("sniper", cfg, facing, np.random.default_rng(0)) == Action("fire")
    away = type(facing)(**{**facing.__dict__, "heading": math.pi, "in_cone": False})
    assert scripted_policy("sniper", cfg, away, np.random.default_rng(0)) == Action("no-op")


def test_exploratory_visits_three_pois(config):
    rng = np.random.default_rng(0)
    state = reset(config)
    for _ in range(500):
        action = scripted_policy("exploratory", config, state, rng)
        state, _ = step(config, state, action)
    assert state.inventory >= 3


def test_all_behaviors_run_clean(config):
    for name in SCRIPTED_BEHAVIORS:
        ep = record_episode(config, name, 120, seed=4)
        assert len(ep) == 120


def test_record_episode_deterministic(config):
    e1 = record_episode(config, "circler", 100, seed=9)
    e2 = record_episode(config, "circler", 100, seed=9)
    assert e1 == e2


def test_features_within_declared_ranges(config):
    from playbench.arena import feature_ranges

    ranges = feature_ranges(config)
    rng = np.random.default_rng(2)
    state = reset(config)
    for _ in range(300):
        action = scripted_policy("exploratory", config, state, rng)
        obs = features(config, state)
        for v, (lo, hi) in zip(obs.continuous, ranges):
            assert lo <= v <= hi
        state, _ = step(config, state, action)


def test_config_doc_round_trip(config):
    doc = config_to_doc(config)
    assert config_from_doc(doc) == config
    doc["version"] = 9
    with pytest.raises(ValueError, match="version"):
        config_from_doc(doc)

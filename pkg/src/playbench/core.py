"""Shared domain types: states, actions, episodes, extended states.

Everything downstream (quantization, Markov models, style metrics, the
gateway) builds on these types. Episodes are immutable values once
constructed; ``EpisodeBuilder`` covers the hot recording path without
quadratic copying.

Episode file format (newline-delimited UTF-8 JSON): the first line is a
header record carrying the meta, every following line is one step record
``{t, continuous, categorical, channel, args}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping

EPISODE_FORMAT = "playbench/episode"
EPISODE_VERSION = 1

# 33 ms per tick: ~30 observations per second at live speed
DEFAULT_TICK_MS = 33


class ArityError(ValueError):
    """A state or action does not match the arities declared in the meta."""

    def __init__(self, fieldname: str, expected: int, got: int):
        self.fieldname = fieldname
        self.expected = expected
        self.got = got
        super().__init__(f"{fieldname}: expected arity {expected}, got {got}")


@dataclass(frozen=True)
class State:
    """One observation: continuous feature vector plus integer-coded flags."""

    continuous: tuple[float, ...]
    categorical: tuple[int, ...] = ()


@dataclass(frozen=True)
class Action:
    """A discrete channel with an optional vector of real-valued arguments."""

    channel: str
    args: tuple[float, ...] = ()


@dataclass(frozen=True)
class EpisodeMeta:
    """Per-environment arity declarations shared by every step of an episode.

    ``channels`` maps each channel name to its argument arity. Treat the
    mapping as read-only; metas are shared freely across threads.
    """

    env_id: str
    seed: int
    continuous_dim: int
    categorical_dim: int
    channels: Mapping[str, int]
    tick_ms: int = DEFAULT_TICK_MS


@dataclass(frozen=True)
class Step:
    t: int
    state: State
    action: Action


@dataclass(frozen=True)
class Episode:
    """Ordered (t, state, action) steps, t strictly increasing from 1.

    ``raw_actions`` is populated by episode quantization only: it carries
    the original (unquantized) action per step so replay can use true
    values while matching runs on the quantized ones.
    """

    meta: EpisodeMeta
    steps: tuple[Step, ...] = ()
    raw_actions: tuple[Action, ...] | None = None

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def states(self) -> tuple[State, ...]:
        return tuple(s.state for s in self.steps)

    @property
    def actions(self) -> tuple[Action, ...]:
        return tuple(s.action for s in self.steps)


@dataclass(frozen=True)
class ExtendedState:
    """Current state augmented with the previous n actions.

    ``partial`` is set when fewer than the requested n actions exist near
    the episode start; ensemble lookups treat partial histories as
    non-matching for that order and fall through to lower orders.
    """

    state: State
    history: tuple[Action, ...]
    partial: bool = False

    @property
    def order(self) -> int:
        return len(self.history)


def check_state(meta: EpisodeMeta, state: State) -> None:
    if len(state.continuous) != meta.continuous_dim:
        raise ArityError("state.continuous", meta.continuous_dim, len(state.continuous))
    if len(state.categorical) != meta.categorical_dim:
        raise ArityError("state.categorical", meta.categorical_dim, len(state.categorical))
    for i, v in enumerate(state.continuous):
        if v != v or v in (float("inf"), float("-inf")):
            raise ValueError(f"state.continuous[{i}] is not finite: {v}")


def check_action(meta: EpisodeMeta, action: Action) -> None:
    if action.channel not in meta.channels:
        raise ValueError(f"action.channel: unknown channel {action.channel!r}")
    expected = meta.channels[action.channel]
    if len(action.args) != expected:
        raise ArityError(f"action.args[{action.channel}]", expected, len(action.args))


def append_step(episode: Episode, state: State, action: Action) -> Episode:
    """Return a new episode with one step appended at t = T+1.

    The input episode is never mutated. Quantized episodes (which carry a
    raw-action shadow) cannot be extended.
    """
    if episode.raw_actions is not None:
        raise ValueError("cannot append to a quantized episode")
    check_state(episode.meta, state)
    check_action(episode.meta, action)
    step = Step(t=len(episode.steps) + 1, state=state, action=action)
    return Episode(meta=episode.meta, steps=episode.steps + (step,))


class EpisodeBuilder:
    """Single-writer accumulator for recording loops; ``build()`` freezes."""

    def __init__(self, meta: EpisodeMeta):
        self.meta = meta
        self._steps: list[Step] = []

    def __len__(self) -> int:
        return len(self._steps)

    def append(self, state: State, action: Action) -> None:
        check_state(self.meta, state)
        check_action(self.meta, action)
        self._steps.append(Step(t=len(self._steps) + 1, state=state, action=action))

    def build(self) -> Episode:
        return Episode(meta=self.meta, steps=tuple(self._steps))


def extended_state(episode: Episode, t: int, n: int) -> ExtendedState:
    """State at step t augmented with the actions taken at t-n .. t-1.

    n = 0 yields the empty history. When fewer than n actions precede t,
    the available suffix is returned with ``partial=True``.
    """
    if not 1 <= t <= len(episode.steps):
        raise ValueError(f"t={t} out of range [1, {len(episode.steps)}]")
    if n < 0:
        raise ValueError(f"history order must be >= 0, got {n}")
    available = min(n, t - 1)
    history = tuple(episode.steps[i].action for i in range(t - 1 - available, t - 1))
    return ExtendedState(
        state=episode.steps[t - 1].state,
        history=history,
        partial=available < n,
    )


def slice_episode(episode: Episode, start: int, stop: int) -> Episode:
    """Steps with start <= t < stop, renumbered from 1."""
    if episode.raw_actions is not None:
        raise ValueError("slice the unquantized episode, then quantize")
    picked = [s for s in episode.steps if start <= s.t < stop]
    steps = tuple(Step(t=i + 1, state=s.state, action=s.action) for i, s in enumerate(picked))
    return Episode(meta=episode.meta, steps=steps)


# --- episode file format -----------------------------------------------------


def meta_to_doc(meta: EpisodeMeta) -> dict:
    return {
        "env_id": meta.env_id,
        "seed": meta.seed,
        "continuous_dim": meta.continuous_dim,
        "categorical_dim": meta.categorical_dim,
        "channels": dict(meta.channels),
        "tick_ms": meta.tick_ms,
    }


def meta_from_doc(doc: Mapping) -> EpisodeMeta:
    return EpisodeMeta(
        env_id=doc["env_id"],
        seed=int(doc["seed"]),
        continuous_dim=int(doc["continuous_dim"]),
        categorical_dim=int(doc["categorical_dim"]),
        channels={str(k): int(v) for k, v in doc["channels"].items()},
        tick_ms=int(doc["tick_ms"]),
    )


def write_episode(episode: Episode, fp: IO[str]) -> None:
    header = {"format": EPISODE_FORMAT, "version": EPISODE_VERSION}
    header.update(meta_to_doc(episode.meta))
    fp.write(json.dumps(header) + "\n")
    for step in episode.steps:
        record = {
            "t": step.t,
            "continuous": list(step.state.continuous),
            "categorical": list(step.state.categorical),
            "channel": step.action.channel,
            "args": list(step.action.args),
        }
        fp.write(json.dumps(record) + "\n")


def read_episode(fp: IO[str]) -> Episode:
    header_line = fp.readline()
    if not header_line.strip():
        raise ValueError("empty episode document")
    header = json.loads(header_line)
    if header.get("format") != EPISODE_FORMAT:
        raise ValueError(f"not an episode document: {header.get('format')!r}")
    if header.get("version") != EPISODE_VERSION:
        raise ValueError(
            f"episode version mismatch: file has {header.get('version')}, "
            f"reader supports {EPISODE_VERSION}"
        )
    meta = meta_from_doc(header)
    steps = []
    for line in fp:
        if not line.strip():
            continue
        rec = json.loads(line)
        steps.append(
            Step(
                t=int(rec["t"]),
                state=State(
                    continuous=tuple(float(x) for x in rec["continuous"]),
                    categorical=tuple(int(x) for x in rec["categorical"]),
                ),
                action=Action(
                    channel=str(rec["channel"]),
                    args=tuple(float(x) for x in rec["args"]),
                ),
            )
        )
    return Episode(meta=meta, steps=tuple(steps))


def save_episode(episode: Episode, path) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        write_episode(episode, fp)


def load_episode(path) -> Episode:
    with open(path, "r", encoding="utf-8") as fp:
        return read_episode(fp)

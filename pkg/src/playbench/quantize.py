"""Multi-resolution uniform quantization of scalars, states, actions, episodes.

A scheme is an ordered family of per-dimension bin sizes, strictly coarser
to finer: sigma_0 > sigma_1 > ... > sigma_K component-wise. The scalar rule
is floor quantization, Q_sigma(x) = sigma * floor(x / sigma), so bins snap
toward -inf and the reconstruction error is always below sigma.

Ladders carry an optional per-dimension origin: bins are computed on
(x - origin). With origin at the low end of a feature's range and sigma_0
equal to the full span, every in-range value lands in bin 0 at the coarsest
level, which is what guarantees that coarse lookups always match. Origin
defaults to 0, reducing to the plain floor rule.

Categorical dimensions are never quantized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import Action, Episode, State, Step

SCHEME_FORMAT = "playbench/scheme"
SCHEME_VERSION = 1


def quantize_scalar(x: float, sigma: float) -> float:
    """sigma * floor(x / sigma), guarded so result <= x < result + sigma."""
    if not math.isfinite(sigma) or sigma <= 0:
        raise ValueError(f"bin size must be positive, got {sigma}")
    if not math.isfinite(x):
        raise ValueError(f"cannot quantize non-finite value {x}")
    k = math.floor(x / sigma)
    # floating division can land one bin off near edges; nudge back
    if sigma * k > x:
        k -= 1
    elif sigma * (k + 1) <= x:
        k += 1
    return sigma * k


@dataclass(frozen=True)
class Ladder:
    """Per-dimension bin sizes for levels 0..K plus a bin origin.

    sigma is (K+1) rows of d bin sizes, strictly decreasing down the rows.
    """

    sigma: tuple[tuple[float, ...], ...]
    origin: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.sigma:
            raise ValueError("ladder needs at least one level")
        d = len(self.sigma[0])
        origin = self.origin if self.origin else tuple(0.0 for _ in range(d))
        object.__setattr__(self, "origin", origin)
        if len(origin) != d:
            raise ValueError(f"origin arity {len(origin)} != sigma arity {d}")
        for j, row in enumerate(self.sigma):
            if len(row) != d:
                raise ValueError(f"level {j} arity {len(row)} != {d}")
            if any(not math.isfinite(s) or s <= 0 for s in row):
                raise ValueError(f"level {j} has non-positive bin size")
            if j > 0 and not all(a > b for a, b in zip(self.sigma[j - 1], row)):
                raise ValueError(f"levels must be strictly decreasing ({j - 1} -> {j})")

    @property
    def levels(self) -> int:
        """K, the finest level index (there are K+1 levels)."""
        return len(self.sigma) - 1

    @property
    def dims(self) -> int:
        return len(self.sigma[0])

    def _check_level(self, j: int) -> None:
        if not 0 <= j <= self.levels:
            raise ValueError(f"level {j} out of range [0, {self.levels}]")

    def bins(self, values: Sequence[float] | np.ndarray, j: int) -> np.ndarray:
        """Integer bin indices at level j; vectorized over leading axes."""
        self._check_level(j)
        x = np.asarray(values, dtype=np.float64) - np.asarray(self.origin)
        sig = np.asarray(self.sigma[j])
        k = np.floor(x / sig)
        k = np.where(sig * k > x, k - 1, k)
        k = np.where(sig * (k + 1) <= x, k + 1, k)
        return k.astype(np.int64)

    def snap(self, values: Sequence[float] | np.ndarray, j: int) -> np.ndarray:
        """Values reconstructed at level j: origin + sigma_j * bin."""
        k = self.bins(values, j)
        return np.asarray(self.origin) + np.asarray(self.sigma[j]) * k


@dataclass(frozen=True)
class QuantizationScheme:
    """One ladder for state continuous dims, one per action channel's args.

    A single K is shared across every continuous dimension; channels with
    no arguments carry a zero-dim ladder slot (stored as None).
    """

    state: Ladder
    args: Mapping[str, Ladder | None] = field(default_factory=dict)

    def __post_init__(self):
        for channel, ladder in self.args.items():
            if ladder is not None and ladder.levels != self.state.levels:
                raise ValueError(
                    f"channel {channel!r} has K={ladder.levels}, state has K={self.state.levels}"
                )

    @property
    def levels(self) -> int:
        return self.state.levels

    def _arg_ladder(self, channel: str, has_args: bool) -> Ladder | None:
        if not has_args:
            return None
        if channel not in self.args or self.args[channel] is None:
            raise ValueError(f"no argument ladder for channel {channel!r}")
        return self.args[channel]

    def state_key(self, state: State, j: int) -> tuple:
        bins = self.state.bins(state.continuous, j) if state.continuous else ()
        return (tuple(int(b) for b in bins), state.categorical)

    def action_key(self, action: Action, j: int) -> tuple:
        ladder = self._arg_ladder(action.channel, bool(action.args))
        if ladder is None:
            return (action.channel, ())
        bins = ladder.bins(action.args, j)
        return (action.channel, tuple(int(b) for b in bins))

    def quantize_state(self, state: State, j: int) -> State:
        if not state.continuous:
            self.state._check_level(j)
            return state
        snapped = self.state.snap(state.continuous, j)
        return State(continuous=tuple(float(v) for v in snapped), categorical=state.categorical)

    def quantize_action(self, action: Action, j: int) -> Action:
        ladder = self._arg_ladder(action.channel, bool(action.args))
        if ladder is None:
            return action
        snapped = ladder.snap(action.args, j)
        return Action(channel=action.channel, args=tuple(float(v) for v in snapped))


def build_ladder(
    ranges: Sequence[tuple[float, float]],
    levels: int,
    sigma0: float | Sequence[float] | None = None,
    decay: float = 0.5,
) -> Ladder:
    """Geometric ladder sigma_j = sigma0 * decay^j anchored at each range low end.

    sigma0 defaults to the full span per dimension, which puts every
    in-range value into a single bin at level 0.
    """
    if not 0.0 < decay < 1.0:
        raise ValueError(f"decay must be in (0, 1), got {decay}")
    if levels < 1:
        raise ValueError(f"need at least one refinement level, got K={levels}")
    if not ranges:
        raise ValueError("need at least one dimension")
    spans = []
    origin = []
    for lo, hi in ranges:
        if not hi > lo:
            raise ValueError(f"empty range ({lo}, {hi})")
        spans.append(hi - lo)
        origin.append(lo)
    if sigma0 is None:
        s0 = list(spans)
    elif isinstance(sigma0, (int, float)):
        s0 = [float(sigma0)] * len(spans)
    else:
        s0 = [float(s) for s in sigma0]
        if len(s0) != len(spans):
            raise ValueError(f"sigma0 arity {len(s0)} != {len(spans)} dims")
    if any(s <= 0 for s in s0):
        raise ValueError("sigma0 must be positive")
    sigma = tuple(tuple(s * decay**j for s in s0) for j in range(levels + 1))
    return Ladder(sigma=sigma, origin=tuple(origin))


def build_scheme(
    state_ranges: Sequence[tuple[float, float]],
    levels: int = 3,
    sigma0: float | Sequence[float] | None = None,
    decay: float = 0.5,
    arg_ranges: Mapping[str, Sequence[tuple[float, float]]] | None = None,
    arg_sigma0: Mapping[str, float | Sequence[float]] | None = None,
) -> QuantizationScheme:
    """Scheme over the declared state and per-channel argument ranges.

    Channels listed with an empty range sequence get no ladder (no args).
    """
    state = build_ladder(state_ranges, levels, sigma0, decay)
    args: dict[str, Ladder | None] = {}
    for channel, ranges in (arg_ranges or {}).items():
        if not ranges:
            args[channel] = None
        else:
            s0 = (arg_sigma0 or {}).get(channel)
            args[channel] = build_ladder(ranges, levels, s0, decay)
    return QuantizationScheme(state=state, args=args)


def quantize_episode(scheme: QuantizationScheme, j: int, episode: Episode) -> Episode:
    """Every continuous component snapped at level j; categorical untouched.

    The result keeps the original actions in ``raw_actions`` so replay can
    execute true values while matching runs on the quantized ones.
    """
    scheme.state._check_level(j)
    source_actions = episode.raw_actions if episode.raw_actions is not None else episode.actions
    if not episode.steps:
        return Episode(meta=episode.meta, steps=(), raw_actions=())
    cont = np.array([s.state.continuous for s in episode.steps], dtype=np.float64)
    snapped = scheme.state.snap(cont, j) if cont.shape[1] else cont
    steps = []
    for i, step in enumerate(episode.steps):
        q_state = State(
            continuous=tuple(float(v) for v in snapped[i]),
            categorical=step.state.categorical,
        )
        q_action = scheme.quantize_action(source_actions[i], j)
        steps.append(Step(t=step.t, state=q_state, action=q_action))
    return Episode(meta=episode.meta, steps=tuple(steps), raw_actions=tuple(source_actions))


# --- scheme document ---------------------------------------------------------


def _ladder_to_doc(ladder: Ladder | None) -> dict | None:
    if ladder is None:
        return None
    return {"sigma": [list(row) for row in ladder.sigma], "origin": list(ladder.origin)}


def _ladder_from_doc(doc: dict | None) -> Ladder | None:
    if doc is None:
        return None
    return Ladder(
        sigma=tuple(tuple(float(s) for s in row) for row in doc["sigma"]),
        origin=tuple(float(o) for o in doc["origin"]),
    )


def scheme_to_doc(scheme: QuantizationScheme) -> dict:
    return {
        "format": SCHEME_FORMAT,
        "version": SCHEME_VERSION,
        "levels": scheme.levels,
        "state": _ladder_to_doc(scheme.state),
        "args": {channel: _ladder_to_doc(ladder) for channel, ladder in scheme.args.items()},
    }


def scheme_from_doc(doc: Mapping) -> QuantizationScheme:
    if doc.get("format") != SCHEME_FORMAT:
        raise ValueError(f"not a scheme document: {doc.get('format')!r}")
    if doc.get("version") != SCHEME_VERSION:
        raise ValueError(
            f"scheme version mismatch: file has {doc.get('version')}, "
            f"reader supports {SCHEME_VERSION}"
        )
    return QuantizationScheme(
        state=_ladder_from_doc(doc["state"]),
        args={channel: _ladder_from_doc(d) for channel, d in doc.get("args", {}).items()},
    )

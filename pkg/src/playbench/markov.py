"""Stacked multi-resolution Markov models over quantized extended states.

A fitted model of order n at level j is a hash table from quantized
(state, last-n-actions) keys to the multiset of raw next actions observed
after that key in the demonstrations. The ensemble is the full (order x
level) grid; a query scans from the most specific model down and samples
from the first table that knows the key, so lookup cost is a handful of
dict probes regardless of how much demonstration data was absorbed.

Scan order is order-major by default: longer history wins at fine
resolution, then resolution degrades before order does. Pass
``resolution_major=True`` for the opposite preference.

A ModelSequence layers whole ensembles, newest first, which is what makes
mid-episode corrective demonstrations override older behavior without
touching it.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import Action, Episode, State
from .quantize import QuantizationScheme

ENSEMBLE_FORMAT = "playbench/ensemble"
ENSEMBLE_VERSION = 1

FALLBACK = "fallback"
ENSEMBLE = "ensemble"

# Fig. 3's sliding window: approximately one second at 30 frames.
DEFAULT_TELEMETRY_WINDOW = 30


@dataclass(frozen=True)
class Provenance:
    """Where an action came from: which ensemble, which (order, level) model.

    ``count`` / ``total`` are the chosen action's multiplicity and the key's
    total observation count; their ratio is the confidence proxy. Fallback
    actions carry zero counts.
    """

    source: str  # ENSEMBLE or FALLBACK
    ensemble_index: int = -1
    order: int = -1
    level: int = -1
    count: int = 0
    total: int = 0

    @property
    def confidence(self) -> float:
        return self.count / self.total if self.total else 0.0


class MarkovModel:
    """Order-n, level-j table: quantized extended-state key -> {action: count}."""

    __slots__ = ("order", "level", "table")

    def __init__(self, order: int, level: int):
        self.order = order
        self.level = level
        self.table: dict[tuple, dict[Action, int]] = {}

    def observe(self, key: tuple, action: Action) -> None:
        counts = self.table.get(key)
        if counts is None:
            self.table[key] = {action: 1}
        else:
            counts[action] = counts.get(action, 0) + 1

    def __len__(self) -> int:
        return len(self.table)


class MarkovEnsemble:
    """Complete (order 0..n_max) x (level 0..K) grid of fitted models."""

    def __init__(self, scheme: QuantizationScheme, n_max: int):
        if n_max < 0:
            raise ValueError(f"n_max must be >= 0, got {n_max}")
        self.scheme = scheme
        self.n_max = n_max
        self.models = {
            (n, j): MarkovModel(n, j)
            for n in range(n_max + 1)
            for j in range(scheme.levels + 1)
        }

    @property
    def levels(self) -> int:
        return self.scheme.levels

    def _episode_keys(self, episode: Episode):
        """Per-level state keys and action keys for every step, vectorized."""
        T = len(episode.steps)
        cont = np.array([s.state.continuous for s in episode.steps], dtype=np.float64)
        cats = [s.state.categorical for s in episode.steps]
        state_keys: list[list[tuple]] = []
        action_keys: list[list[tuple]] = []
        for j in range(self.levels + 1):
            if cont.size:
                rows = self.scheme.state.bins(cont, j).tolist()
                skeys = [(tuple(row), cats[i]) for i, row in enumerate(rows)]
            else:
                skeys = [((), cats[i]) for i in range(T)]
            akeys = [self.scheme.action_key(s.action, j) for s in episode.steps]
            state_keys.append(skeys)
            action_keys.append(akeys)
        return state_keys, action_keys

    def fit_episode(self, episode: Episode) -> None:
        """Insert every defined extended state of the episode, all (n, j)."""
        T = len(episode.steps)
        if T == 0:
            return
        raw = episode.raw_actions if episode.raw_actions is not None else episode.actions
        state_keys, action_keys = self._episode_keys(episode)
        for j in range(self.levels + 1):
            skeys = state_keys[j]
            akeys = action_keys[j]
            for n in range(self.n_max + 1):
                model = self.models[(n, j)]
                # history a_{t-n}..a_{t-1} is defined from step index n on
                for i in range(n, T):
                    key = (skeys[i], tuple(akeys[i - n : i]))
                    model.observe(key, raw[i])

    def lookup(
        self,
        state: State,
        recent_actions: Sequence[Action],
        rng: np.random.Generator,
        resolution_major: bool = False,
        min_order: int = 0,
        min_level: int = 0,
    ) -> tuple[Action, Provenance] | None:
        """First defined key wins; action drawn proportionally to counts.

        With the default floors this returns None only when even the
        (0, 0) model misses, i.e. a state outside every coarsest bin ever
        observed. Raising ``min_order``/``min_level`` excludes the short
        histories / coarse quantizers from matching, which is how a
        fallback policy gets room to act on genuinely fresh states.
        """
        levels = self.levels
        skeys = [self.scheme.state_key(state, j) for j in range(levels + 1)]
        n_avail = min(self.n_max, len(recent_actions))
        recent = list(recent_actions)[len(recent_actions) - n_avail :]
        akeys = [[self.scheme.action_key(a, j) for a in recent] for j in range(levels + 1)]

        orders = range(self.n_max, min_order - 1, -1)
        lvls = range(levels, min_level - 1, -1)
        if resolution_major:
            pairs = [(n, j) for j in lvls for n in orders]
        else:
            pairs = [(n, j) for n in orders for j in lvls]
        for n, j in pairs:
            if n > n_avail:
                continue  # partial history: non-matching at this order
            key = (skeys[j], tuple(akeys[j][n_avail - n :]))
            counts = self.models[(n, j)].table.get(key)
            if counts is None:
                continue
            total = sum(counts.values())
            draw = rng.random() * total
            acc = 0
            for action, count in counts.items():
                acc += count
                if draw < acc:
                    return action, Provenance(
                        source=ENSEMBLE, order=n, level=j, count=count, total=total
                    )
            # numeric edge: draw == total after float accumulation
            action, count = next(reversed(counts.items()))
            return action, Provenance(source=ENSEMBLE, order=n, level=j, count=count, total=total)
        return None

    def modal_action(
        self,
        state: State,
        recent_actions: Sequence[Action],
        rng: np.random.Generator,
        min_order: int = 0,
        min_level: int = 0,
    ) -> tuple[Action, Provenance] | None:
        """Highest-count action at the first defined key; ties by rng draw."""
        levels = self.levels
        skeys = [self.scheme.state_key(state, j) for j in range(levels + 1)]
        n_avail = min(self.n_max, len(recent_actions))
        recent = list(recent_actions)[len(recent_actions) - n_avail :]
        akeys = [[self.scheme.action_key(a, j) for a in recent] for j in range(levels + 1)]
        for n in range(self.n_max, min_order - 1, -1):
            if n > n_avail:
                continue
            for j in range(levels, min_level - 1, -1):
                key = (skeys[j], tuple(akeys[j][n_avail - n :]))
                counts = self.models[(n, j)].table.get(key)
                if counts is None:
                    continue
                best = max(counts.values())
                tied = [a for a, c in counts.items() if c == best]
                action = tied[0] if len(tied) == 1 else tied[rng.integers(len(tied))]
                return action, Provenance(
                    source=ENSEMBLE, order=n, level=j, count=best, total=sum(counts.values())
                )
        return None


def fit_ensemble(
    episodes: Iterable[Episode], scheme: QuantizationScheme, n_max: int
) -> MarkovEnsemble:
    """Fit the full (order x level) grid on a demonstration batch."""
    episodes = list(episodes)
    if not episodes:
        raise ValueError("need at least one demonstration episode")
    ensemble = MarkovEnsemble(scheme, n_max)
    for episode in episodes:
        ensemble.fit_episode(episode)
    return ensemble


def sample_action(
    ensemble: MarkovEnsemble,
    state: State,
    recent_actions: Sequence[Action],
    rng: np.random.Generator,
    resolution_major: bool = False,
) -> tuple[Action, Provenance] | None:
    return ensemble.lookup(state, recent_actions, rng, resolution_major=resolution_major)


@dataclass(frozen=True)
class ModelSequence:
    """Ordered ensembles, newest last; queried newest first; pi_* as backstop.

    ``min_order``/``min_level`` exclude the order/level floors from every
    lookup, forcing genuinely fresh states through to the fallback.
    """

    ensembles: tuple[MarkovEnsemble, ...] = ()
    fallback: Callable[[State], Action] | None = None
    fallback_name: str = "none"
    min_order: int = 0
    min_level: int = 0

    def __len__(self) -> int:
        return len(self.ensembles)


def push_demonstration(
    seq: ModelSequence, episode: Episode, scheme: QuantizationScheme, n_max: int
) -> ModelSequence:
    """Fit a fresh ensemble on the new demonstration and append it.

    Older ensembles are untouched; because lookup runs newest-first the
    new demonstration takes precedence wherever keys overlap.
    """
    ensemble = fit_ensemble([episode], scheme, n_max)
    return ModelSequence(
        ensembles=seq.ensembles + (ensemble,),
        fallback=seq.fallback,
        fallback_name=seq.fallback_name,
        min_order=seq.min_order,
        min_level=seq.min_level,
    )


def policy_action(
    seq: ModelSequence,
    state: State,
    recent_actions: Sequence[Action],
    rng: np.random.Generator,
    resolution_major: bool = False,
) -> tuple[Action, Provenance]:
    """Newest-first sequence lookup; on a total miss, the fallback policy."""
    for idx in range(len(seq.ensembles) - 1, -1, -1):
        hit = seq.ensembles[idx].lookup(
            state,
            recent_actions,
            rng,
            resolution_major=resolution_major,
            min_order=seq.min_order,
            min_level=seq.min_level,
        )
        if hit is not None:
            action, prov = hit
            return action, Provenance(
                source=ENSEMBLE,
                ensemble_index=idx,
                order=prov.order,
                level=prov.level,
                count=prov.count,
                total=prov.total,
            )
    if seq.fallback is None:
        raise ValueError("model sequence has no fallback policy")
    return seq.fallback(state), Provenance(source=FALLBACK)


def competence(window: Sequence[Provenance]) -> float:
    """Fraction of recent queries answered without the fallback."""
    if not window:
        raise ValueError("competence window is empty")
    answered = sum(1 for p in window if p.source != FALLBACK)
    return answered / len(window)


def confidence(window: Sequence[Provenance]) -> float:
    """Mean winning-count / total-count over the window; fallbacks count 0."""
    if not window:
        raise ValueError("confidence window is empty")
    return sum(p.confidence for p in window) / len(window)


class TelemetryWindow:
    """Rolling query-provenance window feeding the competence/confidence feed."""

    def __init__(self, size: int = DEFAULT_TELEMETRY_WINDOW):
        if size < 1:
            raise ValueError("window size must be >= 1")
        self.size = size
        self._window: deque[Provenance] = deque(maxlen=size)

    def record(self, prov: Provenance) -> None:
        self._window.append(prov)

    def __len__(self) -> int:
        return len(self._window)

    @property
    def competence(self) -> float:
        return competence(tuple(self._window))

    @property
    def confidence(self) -> float:
        return confidence(tuple(self._window))


# --- ensemble document --------------------------------------------------------

# Records are one JSON-compatible row per (n, j, key): the key split into
# state bins / categorical / history action keys, plus raw actions with
# bit-exact counts.


def _action_to_doc(action: Action) -> list:
    return [action.channel, list(action.args)]


def _action_from_doc(doc: Sequence) -> Action:
    return Action(channel=str(doc[0]), args=tuple(float(a) for a in doc[1]))


def ensemble_to_doc(ensemble: MarkovEnsemble) -> dict:
    from .quantize import scheme_to_doc

    records = []
    for (n, j), model in sorted(ensemble.models.items()):
        for key, counts in model.table.items():
            (state_bins, categorical), history = key
            records.append(
                {
                    "n": n,
                    "j": j,
                    "state": [list(state_bins), list(categorical)],
                    "history": [[ch, list(bins)] for ch, bins in history],
                    "actions": [
                        [action.channel, list(action.args), count]
                        for action, count in counts.items()
                    ],
                }
            )
    return {
        "format": ENSEMBLE_FORMAT,
        "version": ENSEMBLE_VERSION,
        "n_max": ensemble.n_max,
        "scheme": scheme_to_doc(ensemble.scheme),
        "records": records,
    }


def ensemble_from_doc(doc: dict) -> MarkovEnsemble:
    from .quantize import scheme_from_doc

    if doc.get("format") != ENSEMBLE_FORMAT:
        raise ValueError(f"not an ensemble document: {doc.get('format')!r}")
    if doc.get("version") != ENSEMBLE_VERSION:
        raise ValueError(
            f"ensemble version mismatch: file has {doc.get('version')}, "
            f"reader supports {ENSEMBLE_VERSION}"
        )
    ensemble = MarkovEnsemble(scheme_from_doc(doc["scheme"]), int(doc["n_max"]))
    for rec in doc["records"]:
        state_bins, categorical = rec["state"]
        key = (
            (tuple(int(b) for b in state_bins), tuple(int(c) for c in categorical)),
            tuple((str(ch), tuple(int(b) for b in bins)) for ch, bins in rec["history"]),
        )
        model = ensemble.models[(int(rec["n"]), int(rec["j"]))]
        counts = {}
        for channel, args, count in rec["actions"]:
            counts[Action(channel=str(channel), args=tuple(float(a) for a in args))] = int(count)
        model.table[key] = counts
    return ensemble

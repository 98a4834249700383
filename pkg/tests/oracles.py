"""Independent oracles the tests check the real implementations against.

Everything here is deliberately naive: exhaustive breadth-first search,
direct summation, brute-force counting. None of it shares code with the
package paths it validates.
"""

from __future__ import annotations

from collections import deque
from dataclasses import replace

from playbench.progression import (
    ProgressionModel,
    ProgressionState,
    apply_action,
    available_actions,
    goal_reached,
    initial_state,
)


def bfs_shortest_plan(model: ProgressionModel, start: ProgressionState | None = None,
                      max_states: int = 200_000):
    """Exhaustive shortest goal-reaching action sequence (unit edge costs)."""
    start = replace(start or initial_state(model), elapsed=0)
    if goal_reached(model, start):
        return ()
    seen = {start}
    frontier = deque([(start, ())])
    while frontier:
        state, path = frontier.popleft()
        for action in sorted(available_actions(model, state), key=lambda a: a.id):
            child = replace(apply_action(model, state, action), elapsed=0)
            if child in seen:
                continue
            seen.add(child)
            if len(seen) > max_states:
                raise RuntimeError(f"state space exceeds {max_states}; fixture too large")
            child_path = path + (action.id,)
            if goal_reached(model, child):
                return child_path
            frontier.append((child, child_path))
    return None


def count_reachable_states(model: ProgressionModel, max_states: int = 200_000) -> int:
    """Reachable states with the goal absorbing (planning never expands past it)."""
    start = replace(initial_state(model), elapsed=0)
    seen = {start}
    frontier = deque([start])
    while frontier:
        state = frontier.popleft()
        if goal_reached(model, state):
            continue
        for action in available_actions(model, state):
            child = replace(apply_action(model, state, action), elapsed=0)
            if child not in seen:
                seen.add(child)
                if len(seen) > max_states:
                    raise RuntimeError(f"state space exceeds {max_states}")
                frontier.append(child)
    return len(seen)


def brute_force_ngrams(key_sequences, n):
    """Empirical (n+1)-gram distribution over pre-quantized key sequences."""
    counts = {}
    total = 0
    for keys in key_sequences:
        for i in range(len(keys) - n):
            gram = tuple(keys[i : i + n + 1])
            counts[gram] = counts.get(gram, 0) + 1
            total += 1
    return {gram: c / total for gram, c in counts.items()}


def direct_style_aggregate(per_n, lam):
    """Term-by-term evaluation of the weighted aggregate."""
    total = 0.0
    for n, d in enumerate(per_n):
        total += lam / (1.0 - lam) * lam**n * d
    total += lam ** (len(per_n)) / (1.0 - lam) * per_n[-1]
    return total


def enumerate_extended_keys(episode, scheme, n, j):
    """All defined (quantized state, quantized history) keys with next actions."""
    out = {}
    steps = episode.steps
    for i in range(n, len(steps)):
        skey = scheme.state_key(steps[i].state, j)
        hist = tuple(scheme.action_key(steps[k].action, j) for k in range(i - n, i))
        out.setdefault((skey, hist), []).append(steps[i].action)
    return out

"""Declarative progression models, A* playtesting plans, and utility-policy ES.

A progression model abstracts a game's career/economy tuning: named
resources with caps, actions with resource costs and gains, career XP with
a level-up table, and events that must be attempted (M) and completed (N).
Planning asks "how many actions does a player need"; the two routes are an
A* search guided by the designer heuristic and a softmax utility policy
whose bilinear weights are evolved by a mirrored-sampling evolution
strategy against J(N, M) = N * (N + eps) / (M + eps).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

MODEL_FORMAT = "playbench/progression-model"
MODEL_VERSION = 1

WAIT = "wait"

DEFAULT_HEURISTIC_WEIGHTS = (100.0, 1.0, 0.1)
DEFAULT_NODE_CUTOFF = 2000  # A* expansion budget
DEFAULT_EPSILON = 1e-3


@dataclass(frozen=True)
class PlannerAction:
    """One declarative action: costs and gains depend only on the action.

    ``in_event`` gates availability: None anywhere, True only inside an
    event, False only outside. ``advances`` is event progress earned while
    inside an event.
    """

    id: str
    cost: tuple[tuple[str, float], ...] = ()
    gain: tuple[tuple[str, float], ...] = ()
    xp: float = 0.0
    starts_event: bool = False
    advances: float = 0.0
    min_level: int = 0
    in_event: bool | None = None

    def __post_init__(self):
        for name, amount in self.cost:
            if amount < 0:
                raise ValueError(f"action {self.id!r}: negative cost {name}={amount}")
        for name, amount in self.gain:
            if amount < 0:
                raise ValueError(f"action {self.id!r}: negative gain {name}={amount}")


@dataclass(frozen=True)
class ProgressionModel:
    resources: tuple[tuple[str, float], ...]  # name -> initial amount
    caps: tuple[tuple[str, float], ...]
    actions: tuple[PlannerAction, ...]
    level_xp: tuple[float, ...]  # cumulative XP needed for level 1, 2, ...
    event_goal: float  # progress required to complete one event
    event_xp: float = 0.0  # XP bonus on completion
    goal: tuple[tuple[str, float], ...] = ()  # minimums over level / xp / events

    def __post_init__(self):
        names = [n for n, _ in self.resources]
        if len(set(names)) != len(names):
            raise ValueError("duplicate resource names")
        cap_names = {n for n, _ in self.caps}
        if cap_names - set(names):
            raise ValueError(f"caps for unknown resources: {cap_names - set(names)}")
        ids = [a.id for a in self.actions]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate action ids")
        if WAIT not in ids:
            raise ValueError("model must declare a 'wait' action")
        wait = next(a for a in self.actions if a.id == WAIT)
        # wait has to pass every availability predicate or the action set can empty
        if wait.cost or wait.min_level > 0 or wait.in_event is not None or wait.starts_event:
            raise ValueError("'wait' must be unconditionally available")
        for key, _ in self.goal:
            if key not in ("level", "xp", "events"):
                raise ValueError(f"unknown goal key {key!r}")
        for action in self.actions:
            for name, _ in list(action.cost) + list(action.gain):
                if name not in names:
                    raise ValueError(f"action {action.id!r} uses unknown resource {name!r}")
        if self.event_goal <= 0 and any(a.starts_event for a in self.actions):
            raise ValueError("event_goal must be positive when events exist")

    @property
    def resource_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.resources)

    def cap_of(self, name: str) -> float:
        for n, c in self.caps:
            if n == name:
                return c
        return math.inf

    def action_by_id(self, action_id: str) -> PlannerAction:
        for a in self.actions:
            if a.id == action_id:
                return a
        raise ValueError(f"unknown action id {action_id!r}")


@dataclass(frozen=True)
class ProgressionState:
    resources: tuple[float, ...]  # ordered like model.resources
    level: int = 0
    xp: float = 0.0
    events_done: int = 0  # N
    events_attempted: int = 0  # M
    in_event: bool = False
    event_progress: float = 0.0
    elapsed: int = 0


def initial_state(model: ProgressionModel) -> ProgressionState:
    return ProgressionState(resources=tuple(v for _, v in model.resources))


def goal_reached(model: ProgressionModel, state: ProgressionState) -> bool:
    for key, minimum in model.goal:
        have = {"level": state.level, "xp": state.xp, "events": state.events_done}[key]
        if have < minimum:
            return False
    return True


def available_actions(model: ProgressionModel, state: ProgressionState) -> tuple[PlannerAction, ...]:
    """Actions whose predicates pass; never empty (wait always qualifies)."""
    res = dict(zip(model.resource_names, state.resources))
    out = []
    for action in model.actions:
        if action.min_level > state.level:
            continue
        if action.in_event is not None and action.in_event != state.in_event:
            continue
        if action.starts_event and state.in_event:
            continue
        if any(res[name] < amount for name, amount in action.cost):
            continue
        out.append(action)
    return tuple(out)


def apply_action(
    model: ProgressionModel, state: ProgressionState, action: PlannerAction | str
) -> ProgressionState:
    """Pay costs, collect gains and XP, run event and level-up bookkeeping."""
    if isinstance(action, str):
        action = model.action_by_id(action)
    if action not in available_actions(model, state):
        raise ValueError(f"action {action.id!r} is not available in this state")
    res = dict(zip(model.resource_names, state.resources))
    for name, amount in action.cost:
        res[name] -= amount
    for name, amount in action.gain:
        res[name] = min(model.cap_of(name), res[name] + amount)

    xp = state.xp + action.xp
    n_done = state.events_done
    m_attempted = state.events_attempted
    in_event = state.in_event
    progress = state.event_progress

    if action.starts_event:
        in_event = True
        m_attempted += 1  # attempts counted on trigger
        progress = 0.0
    if in_event and action.advances > 0:
        progress += action.advances
        if progress >= model.event_goal:
            n_done += 1
            in_event = False
            progress = 0.0
            xp += model.event_xp

    level = state.level
    while level < len(model.level_xp) and xp >= model.level_xp[level]:
        level += 1

    return ProgressionState(
        resources=tuple(res[n] for n in model.resource_names),
        level=level,
        xp=xp,
        events_done=n_done,
        events_attempted=m_attempted,
        in_event=in_event,
        event_progress=progress,
        elapsed=state.elapsed + 1,
    )


def heuristic(state: ProgressionState, weights: Sequence[float] = DEFAULT_HEURISTIC_WEIGHTS) -> float:
    """Designer progress score: weighted sum of level, XP, completed events.

    Levels dominate, XP next, completed events least (already partially
    reflected in XP) -- the weight ordering is enforced.
    """
    w_level, w_xp, w_events = weights
    if not (w_level > w_xp > w_events >= 0):
        raise ValueError(f"weights must satisfy level > xp > events >= 0, got {weights}")
    return w_level * state.level + w_xp * state.xp + w_events * state.events_done


@dataclass(frozen=True)
class PlanResult:
    reached: bool
    actions: tuple[str, ...]
    expanded: int
    final_state: ProgressionState

    def __len__(self) -> int:
        return len(self.actions)


def _admissible_remaining(model: ProgressionModel, state: ProgressionState) -> float:
    """Lower bound on actions to goal: progress deficit / best single-action gain."""
    goal = dict(model.goal)
    best_xp = max((a.xp for a in model.actions), default=0.0) + model.event_xp
    best_adv = max((a.advances for a in model.actions), default=0.0)
    bounds = [0.0]

    xp_target = goal.get("xp", 0.0)
    if "level" in goal:
        level_target = int(goal["level"])
        if level_target > len(model.level_xp):
            return math.inf
        if level_target >= 1:
            xp_target = max(xp_target, model.level_xp[level_target - 1])
    if xp_target > state.xp and best_xp > 0:
        bounds.append(math.ceil((xp_target - state.xp) / best_xp - 1e-12))

    if "events" in goal:
        deficit = int(goal["events"]) - state.events_done
        if deficit > 0:
            if best_adv <= 0:
                return math.inf
            per_event = 1 + math.ceil(model.event_goal / best_adv - 1e-12)
            first = per_event
            if state.in_event:
                first = math.ceil((model.event_goal - state.event_progress) / best_adv - 1e-12)
            bounds.append(first + (deficit - 1) * per_event)
    return max(bounds)


def astar_plan(
    model: ProgressionModel,
    start: ProgressionState | None = None,
    weights: Sequence[float] = DEFAULT_HEURISTIC_WEIGHTS,
    node_cutoff: int = DEFAULT_NODE_CUTOFF,
) -> PlanResult:
    """Shortest action sequence to the goal, or a cutoff-failure partial plan.

    g is the action count; the admissible remaining-progress bound drives
    f, and the designer heuristic orders ties so the search walks the
    designer's preferred frontier first. Expansion ties break on
    lexicographic action id, so plans are identical across runs.
    """
    if node_cutoff < 1:
        raise ValueError(f"node_cutoff must be >= 1, got {node_cutoff}")
    if not model.goal:
        raise ValueError("model declares no goal predicate")
    start = initial_state(model) if start is None else start
    # elapsed is bookkeeping, not identity: zero it so the closed set dedupes
    start = replace(start, elapsed=0)

    if goal_reached(model, start):
        return PlanResult(reached=True, actions=(), expanded=0, final_state=start)

    counter = 0
    open_heap: list = []
    h0 = _admissible_remaining(model, start)
    heapq.heappush(open_heap, (h0, -heuristic(start, weights), counter, start))
    came_from: dict[ProgressionState, tuple[ProgressionState, str]] = {}
    g_score: dict[ProgressionState, int] = {start: 0}
    best_partial = (heuristic(start, weights), start)
    expanded = 0

    def path_to(state: ProgressionState) -> tuple[str, ...]:
        actions: list[str] = []
        while state in came_from:
            state, action_id = came_from[state]
            actions.append(action_id)
        return tuple(reversed(actions))

    while open_heap:
        _, _, _, current = heapq.heappop(open_heap)
        g = g_score[current]
        expanded += 1
        if expanded > node_cutoff:
            return PlanResult(
                reached=False,
                actions=path_to(best_partial[1]),
                expanded=expanded - 1,
                final_state=best_partial[1],
            )
        for action in sorted(available_actions(model, current), key=lambda a: a.id):
            child = replace(apply_action(model, current, action), elapsed=0)
            if child == current:
                continue  # pure no-op edge (e.g. wait at full resources)
            tentative = g + 1
            if tentative >= g_score.get(child, math.inf):
                continue
            g_score[child] = tentative
            came_from[child] = (current, action.id)
            if goal_reached(model, child):
                return PlanResult(
                    reached=True, actions=path_to(child), expanded=expanded, final_state=child
                )
            score = heuristic(child, weights)
            if score > best_partial[0]:
                best_partial = (score, child)
            counter += 1
            f = tentative + _admissible_remaining(model, child)
            heapq.heappush(open_heap, (f, -score, counter, child))
    return PlanResult(
        reached=False,
        actions=path_to(best_partial[1]),
        expanded=expanded,
        final_state=best_partial[1],
    )


# --- utility policy and evolution strategy ------------------------------------


@dataclass(frozen=True)
class UtilityParams:
    """Bilinear action-utility weights plus the softmax temperature."""

    p: tuple[float, ...]
    q: tuple[float, ...]
    temperature: float = 1.0

    def __post_init__(self):
        if len(self.p) != len(self.q):
            raise ValueError(f"p and q must share arity, got {len(self.p)} vs {len(self.q)}")
        if self.temperature <= 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")


def relevant_dims(model: ProgressionModel) -> int:
    # resources + event indicator + constant bias
    return len(model.resources) + 2


def relevant_state_vector(model: ProgressionModel, state: ProgressionState) -> tuple[float, ...]:
    """Commodity amounts, the 0/1 event indicator, and a constant bias slot.

    The bias slot is what lets the evolved weights express preferences
    that must act while the indicator is 0 (e.g. start an event).
    """
    return state.resources + (1.0 if state.in_event else 0.0, 1.0)


def action_reward_vector(model: ProgressionModel, action: PlannerAction) -> tuple[float, ...]:
    gains = dict(action.gain)
    by_resource = tuple(gains.get(n, 0.0) for n in model.resource_names)
    return by_resource + (action.advances, action.xp + (1.0 if action.starts_event else 0.0))


def action_cost_vector(model: ProgressionModel, action: PlannerAction) -> tuple[float, ...]:
    costs = dict(action.cost)
    by_resource = tuple(costs.get(n, 0.0) for n in model.resource_names)
    return by_resource + (0.0, 1.0)


def bilinear_utility(
    r: Sequence[float],
    c: Sequence[float],
    s: Sequence[float],
    p: Sequence[float],
    q: Sequence[float],
) -> float:
    """sum_i r_i p_i s_i + sum_i c_i q_i s_i, all vectors of one arity."""
    if not (len(r) == len(c) == len(s) == len(p) == len(q)):
        raise ValueError(
            "dimension mismatch: "
            f"r={len(r)} c={len(c)} s={len(s)} p={len(p)} q={len(q)}"
        )
    total = 0.0
    for i in range(len(s)):
        total += r[i] * p[i] * s[i] + c[i] * q[i] * s[i]
    return total


def utility(
    model: ProgressionModel,
    params: UtilityParams,
    state: ProgressionState,
    action: PlannerAction | str,
) -> float:
    if isinstance(action, str):
        action = model.action_by_id(action)
    s = relevant_state_vector(model, state)
    if len(params.p) != len(s):
        raise ValueError(f"params arity {len(params.p)} != relevant dims {len(s)}")
    return bilinear_utility(
        action_reward_vector(model, action),
        action_cost_vector(model, action),
        s,
        params.p,
        params.q,
    )


def policy_sample(
    model: ProgressionModel,
    params: UtilityParams,
    state: ProgressionState,
    available: Sequence[PlannerAction],
    rng: np.random.Generator,
) -> PlannerAction:
    """Draw proportionally to exp(U / temperature) over the available set."""
    if not available:
        raise ValueError("no available actions to sample from")
    utilities = np.array([utility(model, params, state, a) for a in available])
    z = utilities / params.temperature
    z -= z.max()  # shift-invariant
    weights = np.exp(z)
    probs = weights / weights.sum()
    idx = int(rng.choice(len(available), p=probs))
    return available[idx]


@dataclass(frozen=True)
class RolloutStats:
    events_done: int  # N
    events_attempted: int  # M
    steps: int

    def objective(self, eps: float = DEFAULT_EPSILON) -> float:
        n, m = self.events_done, self.events_attempted
        return n * (n + eps) / (m + eps)


def rollout(
    model: ProgressionModel,
    params: UtilityParams,
    horizon: int,
    seed: int,
) -> RolloutStats:
    """One policy episode; stops at the goal or the horizon."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    rng = np.random.default_rng(seed)
    state = initial_state(model)
    steps = 0
    while steps < horizon and not goal_reached(model, state):
        action = policy_sample(model, params, state, available_actions(model, state), rng)
        state = apply_action(model, state, action)
        steps += 1
    return RolloutStats(
        events_done=state.events_done, events_attempted=state.events_attempted, steps=steps
    )


def rollout_objective(
    model: ProgressionModel,
    params: UtilityParams,
    horizon: int,
    eps: float = DEFAULT_EPSILON,
    seed: int = 0,
) -> float:
    """J(N, M) = N (N + eps) / (M + eps) for one simulated episode."""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    return rollout(model, params, horizon, seed).objective(eps)


@dataclass(frozen=True)
class ESConfig:
    population: int = 32  # must be even: mirrored sampling
    sigma: float = 0.2
    learning_rate: float = 0.1
    iterations: int = 200
    horizon: int = 60
    rollouts_per_eval: int = 2
    eps: float = DEFAULT_EPSILON

    def __post_init__(self):
        if self.population < 2 or self.population % 2:
            raise ValueError(f"population must be even and >= 2, got {self.population}")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")


def _params_to_vector(params: UtilityParams) -> np.ndarray:
    return np.array(list(params.p) + list(params.q) + [math.log(params.temperature)])


def _vector_to_params(theta: np.ndarray, k: int) -> UtilityParams:
    # clamp so extreme ES excursions cannot produce a zero/inf temperature
    log_temp = min(max(float(theta[2 * k]), -20.0), 20.0)
    return UtilityParams(
        p=tuple(float(v) for v in theta[:k]),
        q=tuple(float(v) for v in theta[k : 2 * k]),
        temperature=math.exp(log_temp),
    )


def es_optimize(
    model: ProgressionModel,
    config: ESConfig = ESConfig(),
    init: UtilityParams | None = None,
    seed: int = 0,
) -> tuple[UtilityParams, list[float]]:
    """Mirrored-sampling ES over (p, q, log temperature) maximizing J.

    Candidates in one iteration share rollout seeds (common random
    numbers), fitness is shaped by centered ranks, and the best evaluated
    candidate is returned along with the per-iteration population mean J.
    """
    k = relevant_dims(model)
    if init is None:
        init = UtilityParams(p=(0.0,) * k, q=(0.0,) * k, temperature=1.0)
    theta = _params_to_vector(init)
    rng = np.random.default_rng(seed)
    history: list[float] = []
    best: tuple[float, UtilityParams] | None = None

    def evaluate(params: UtilityParams, eval_seeds: Sequence[int]) -> float:
        return float(
            np.mean([rollout(model, params, config.horizon, s).objective(config.eps)
                     for s in eval_seeds])
        )

    half = config.population // 2
    for _ in range(config.iterations):
        eval_seeds = [int(s) for s in rng.integers(0, 2**31 - 1, size=config.rollouts_per_eval)]
        noise = rng.standard_normal(size=(half, theta.size))
        signed = np.concatenate([noise, -noise], axis=0)
        scores = np.empty(config.population)
        for i in range(config.population):
            candidate = _vector_to_params(theta + config.sigma * signed[i], k)
            scores[i] = evaluate(candidate, eval_seeds)
            if best is None or scores[i] > best[0]:
                best = (scores[i], candidate)
        history.append(float(scores.mean()))
        # centered-rank fitness shaping in [-0.5, 0.5]
        ranks = np.empty(config.population)
        ranks[np.argsort(scores, kind="stable")] = np.arange(config.population)
        shaped = ranks / (config.population - 1) - 0.5
        gradient = (shaped[:, None] * signed).sum(axis=0) / (config.population * config.sigma)
        theta = theta + config.learning_rate * gradient

    if config.iterations == 0:
        return init, history
    final = _vector_to_params(theta, k)
    final_seeds = [int(s) for s in rng.integers(0, 2**31 - 1, size=config.rollouts_per_eval)]
    final_score = evaluate(final, final_seeds)
    if best is None or final_score > best[0]:
        best = (final_score, final)
    return best[1], history


# --- standard fixtures ----------------------------------------------------------


def work_rest_model(goal_xp: float = 30.0) -> ProgressionModel:
    """Tiny two-resource-free career: work for XP, rest to refill energy."""
    return ProgressionModel(
        resources=(("energy", 10.0),),
        caps=(("energy", 10.0),),
        actions=(
            PlannerAction(id="work", cost=(("energy", 5.0),), xp=10.0),
            PlannerAction(id="rest", gain=(("energy", 5.0),)),
            PlannerAction(id=WAIT, gain=(("energy", 1.0),)),
        ),
        level_xp=(10.0, 30.0, 60.0),
        event_goal=1.0,
        goal=(("xp", goal_xp),),
    )


def event_career_model(goal_events: int = 3) -> ProgressionModel:
    """Career driven by events: trigger one, grind its tasks, recover energy."""
    return ProgressionModel(
        resources=(("energy", 10.0),),
        caps=(("energy", 10.0),),
        actions=(
            PlannerAction(
                id="attempt-event", cost=(("energy", 2.0),), starts_event=True, in_event=False
            ),
            PlannerAction(
                id="event-task", cost=(("energy", 1.0),), advances=1.0, xp=5.0, in_event=True
            ),
            PlannerAction(id="rest", gain=(("energy", 3.0),)),
            PlannerAction(id=WAIT, gain=(("energy", 1.0),)),
        ),
        level_xp=(10.0, 25.0, 45.0),
        event_goal=2.0,
        event_xp=5.0,
        goal=(("events", float(goal_events)),),
    )


# --- model document -----------------------------------------------------------


def model_to_doc(model: ProgressionModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "resources": [[n, v] for n, v in model.resources],
        "caps": [[n, v] for n, v in model.caps],
        "actions": [
            {
                "id": a.id,
                "cost": [[n, v] for n, v in a.cost],
                "gain": [[n, v] for n, v in a.gain],
                "xp": a.xp,
                "starts_event": a.starts_event,
                "advances": a.advances,
                "min_level": a.min_level,
                "in_event": a.in_event,
            }
            for a in model.actions
        ],
        "level_xp": list(model.level_xp),
        "event_goal": model.event_goal,
        "event_xp": model.event_xp,
        "goal": [[k, v] for k, v in model.goal],
    }


def model_from_doc(doc: Mapping) -> ProgressionModel:
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"not a progression model: {doc.get('format')!r}")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(
            f"model version mismatch: file has {doc.get('version')}, "
            f"reader supports {MODEL_VERSION}"
        )
    return ProgressionModel(
        resources=tuple((str(n), float(v)) for n, v in doc["resources"]),
        caps=tuple((str(n), float(v)) for n, v in doc["caps"]),
        actions=tuple(
            PlannerAction(
                id=str(a["id"]),
                cost=tuple((str(n), float(v)) for n, v in a["cost"]),
                gain=tuple((str(n), float(v)) for n, v in a["gain"]),
                xp=float(a["xp"]),
                starts_event=bool(a["starts_event"]),
                advances=float(a["advances"]),
                min_level=int(a["min_level"]),
                in_event=a["in_event"],
            )
            for a in doc["actions"]
        ),
        level_xp=tuple(float(x) for x in doc["level_xp"]),
        event_goal=float(doc["event_goal"]),
        event_xp=float(doc["event_xp"]),
        goal=tuple((str(k), float(v)) for k, v in doc["goal"]),
    )

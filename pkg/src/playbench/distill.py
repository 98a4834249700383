"""Bootstrap dataset generation and distillation into compact policy nets.

The trained Markov agent (ensemble sequence + fallback rules) plays seeded
arena instances to multiply the demonstration corpus into a supervised
dataset; each sample is (state features, motion target, discrete flags)
with its provenance. Two small nets compress the behavior: a single wide
hidden layer regresses the continuous motion channels, and an L-layer
stack classifies the on/off channels. Architecture follows two sizing
rules: motion width = twice the total quantization steps across the
continuous inputs, discrete depth = the driving ensemble's maximum Markov
order with layer width twice the input dimensionality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .arena import ArenaConfig, arg_ranges, feature_ranges, features
from .arena import reset as arena_reset
from .arena import step as arena_step
from .core import Action, Episode, State
from .markov import FALLBACK, ModelSequence, Provenance, policy_action
from .nn import DenseNet, MomentumSGD, bce_logits_loss, mse_loss, net_from_doc, net_to_doc, sigmoid
from .quantize import QuantizationScheme

DATASET_FORMAT = "playbench/bootstrap-dataset"
DATASET_VERSION = 1
POLICY_NET_FORMAT = "playbench/policy-net"
POLICY_NET_VERSION = 1

MULTIPLIER_RANGE = (5.0, 20.0)

PROVENANCES = ("demonstration", "ensemble", "fallback")

# motion channels: move dx, move dy, turn dtheta
MOTION_DIM = 3
# on/off channels
DISCRETE_CHANNELS = ("fire", "interact", "sprint-toggle")


class TrainingDiverged(RuntimeError):
    """Loss blew past 10x its initial value; carries the history so far."""

    def __init__(self, history: list[dict]):
        self.history = history
        super().__init__(f"training diverged after {len(history)} epochs")


def encode_action(action: Action) -> tuple[np.ndarray, np.ndarray]:
    """(motion target vector, discrete flags) for one action."""
    motion = np.zeros(MOTION_DIM)
    flags = np.zeros(len(DISCRETE_CHANNELS))
    if action.channel == "move":
        motion[0], motion[1] = action.args
    elif action.channel == "turn":
        motion[2] = action.args[0]
    elif action.channel in DISCRETE_CHANNELS:
        flags[DISCRETE_CHANNELS.index(action.channel)] = 1.0
    # no-op: all zeros
    return motion, flags


def decode_action(motion: np.ndarray, flag_probs: np.ndarray, motion_eps: float = 0.05) -> Action:
    """Net outputs back to a single-channel action."""
    if float(flag_probs.max()) >= 0.5:
        return Action(DISCRETE_CHANNELS[int(flag_probs.argmax())])
    mx, my, dtheta = (float(v) for v in motion)
    if abs(dtheta) > math.hypot(mx, my):
        return Action("turn", (dtheta,))
    if math.hypot(mx, my) >= motion_eps:
        return Action("move", (mx, my))
    return Action("no-op")


def state_to_vector(state: State) -> np.ndarray:
    return np.array(list(state.continuous) + [float(c) for c in state.categorical])


def vector_to_state(vec: np.ndarray, n_continuous: int) -> State:
    return State(
        continuous=tuple(float(v) for v in vec[:n_continuous]),
        categorical=tuple(int(round(float(v))) for v in vec[n_continuous:]),
    )


@dataclass
class BootstrapDataset:
    features: np.ndarray  # (S, feature_dim) float64
    motion: np.ndarray  # (S, MOTION_DIM)
    flags: np.ndarray  # (S, len(DISCRETE_CHANNELS))
    provenance: np.ndarray  # (S,) int8 index into PROVENANCES
    n_continuous: int
    demo_steps: int
    partial: bool = False

    def __len__(self) -> int:
        return len(self.features)

    @property
    def multiplier(self) -> float:
        return len(self.features) / self.demo_steps if self.demo_steps else 0.0

    def provenance_counts(self) -> dict[str, int]:
        return {
            name: int((self.provenance == i).sum()) for i, name in enumerate(PROVENANCES)
        }


def bootstrap(
    seq: ModelSequence,
    demos: Sequence[Episode],
    configs: Sequence[ArenaConfig],
    multiplier_target: float,
    seed: int = 0,
    rollout_steps: int = 500,
    step_budget: int | None = None,
) -> BootstrapDataset:
    """Multiply the demonstrations by letting the agent play seeded arenas.

    The dataset starts with the demonstration steps themselves, then grows
    with rollout samples labeled by their source (ensemble hit or fallback
    rule) until dataset size reaches multiplier_target * demo steps. If the
    step budget runs out first the dataset is returned flagged partial.
    """
    lo, hi = MULTIPLIER_RANGE
    if not lo <= multiplier_target <= hi:
        raise ValueError(f"multiplier target {multiplier_target} outside [{lo}, {hi}]")
    if not demos:
        raise ValueError("need demonstration episodes")
    if not configs:
        raise ValueError("need at least one arena config")
    if not seq.ensembles:
        raise ValueError("model sequence is empty")

    n_max = max(e.n_max for e in seq.ensembles)
    rng = np.random.default_rng(seed)
    feats: list[np.ndarray] = []
    motions: list[np.ndarray] = []
    flag_rows: list[np.ndarray] = []
    provs: list[int] = []

    demo_steps = 0
    n_continuous = None
    for episode in demos:
        for step_ in episode.steps:
            feats.append(state_to_vector(step_.state))
            motion, flags = encode_action(step_.action)
            motions.append(motion)
            flag_rows.append(flags)
            provs.append(PROVENANCES.index("demonstration"))
            demo_steps += 1
        n_continuous = episode.meta.continuous_dim
    if demo_steps == 0:
        raise ValueError("demonstrations are empty")

    target = math.ceil(multiplier_target * demo_steps)
    budget = step_budget if step_budget is not None else 4 * target
    taken = 0
    rollout_idx = 0
    while len(feats) < target and taken < budget:
        base = configs[rollout_idx % len(configs)]
        config = replace(base, seed=int(rng.integers(0, 2**31 - 1)))
        rollout_idx += 1
        sim = arena_reset(config)
        recent: list[Action] = []
        for _ in range(rollout_steps):
            if len(feats) >= target or taken >= budget:
                break
            obs = features(config, sim)
            action, prov = policy_action(seq, obs, recent, rng)
            feats.append(state_to_vector(obs))
            motion, flags = encode_action(action)
            motions.append(motion)
            flag_rows.append(flags)
            provs.append(
                PROVENANCES.index("fallback" if prov.source == FALLBACK else "ensemble")
            )
            sim, _ = arena_step(config, sim, action)
            recent.append(action)
            if len(recent) > n_max:
                recent.pop(0)
            taken += 1

    return BootstrapDataset(
        features=np.array(feats),
        motion=np.array(motions),
        flags=np.array(flag_rows),
        provenance=np.array(provs, dtype=np.int8),
        n_continuous=n_continuous or 0,
        demo_steps=demo_steps,
        partial=len(feats) < target,
    )


# --- architecture rules --------------------------------------------------------


def width_rule(steps_per_input: Sequence[int]) -> int:
    """Motion hidden width: twice the total quantization steps."""
    if not steps_per_input:
        raise ValueError("need at least one continuous input variable")
    if any(s < 1 for s in steps_per_input):
        raise ValueError(f"steps must be >= 1 each, got {steps_per_input}")
    return 2 * sum(steps_per_input)


def depth_rule(n_max: int, input_dim: int) -> tuple[int, int]:
    """Discrete net: layer count = max Markov order, width = 2 x input dim."""
    if n_max < 1:
        raise ValueError(f"discrete net needs history order >= 1, got {n_max}")
    if input_dim < 1:
        raise ValueError(f"input dim must be >= 1, got {input_dim}")
    return n_max, 2 * input_dim


def quantization_steps(
    scheme: QuantizationScheme, ranges: Sequence[tuple[float, float]]
) -> list[int]:
    """Finest-level bin counts per continuous input variable."""
    finest = scheme.state.sigma[scheme.levels]
    if len(finest) != len(ranges):
        raise ValueError(f"{len(ranges)} ranges for {len(finest)} scheme dims")
    return [max(1, math.ceil((hi - lo) / s)) for (lo, hi), s in zip(ranges, finest)]


@dataclass
class PolicyNet:
    """Motion regressor + discrete on/off classifier over state features."""

    motion: DenseNet
    discrete: DenseNet
    n_continuous: int

    @property
    def input_dim(self) -> int:
        return self.motion.dims[0]

    def act(self, vec: np.ndarray, motion_eps: float = 0.05) -> Action:
        x = np.atleast_2d(vec)
        motion = self.motion(x)[0]
        flag_probs = sigmoid(self.discrete(x)[0])
        return decode_action(motion, flag_probs, motion_eps=motion_eps)


def build_policy_net(
    config: ArenaConfig,
    scheme: QuantizationScheme,
    n_max: int,
    seed: int = 0,
) -> PolicyNet:
    """Nets sized by the width/depth rules for this arena's feature layout."""
    from .arena import N_CATEGORICAL, N_CONTINUOUS

    input_dim = N_CONTINUOUS + N_CATEGORICAL
    width = width_rule(quantization_steps(scheme, feature_ranges(config)))
    layers, layer_width = depth_rule(n_max, input_dim)
    rng = np.random.default_rng(seed)
    motion = DenseNet([input_dim, width, MOTION_DIM], rng)
    discrete = DenseNet([input_dim] + [layer_width] * layers + [len(DISCRETE_CHANNELS)], rng)
    return PolicyNet(motion=motion, discrete=discrete, n_continuous=N_CONTINUOUS)


# --- training -------------------------------------------------------------------


def train(
    net: PolicyNet,
    dataset: BootstrapDataset,
    epochs: int = 50,
    batch_size: int = 64,
    learning_rate: float = 1e-3,
    seed: int = 0,
    val_fraction: float = 0.1,
    patience: int = 10,
) -> tuple[PolicyNet, list[dict]]:
    """Joint minibatch descent: squared error on motion, BCE on flags.

    A validation split guards against overfitting: training stops early
    when validation loss has not improved for ``patience`` epochs and the
    best-validation weights are restored. Divergence past 10x the initial
    loss aborts with the history attached.
    """
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    if epochs == 0:
        return net, []

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(dataset))
    n_val = max(1, int(len(dataset) * val_fraction)) if len(dataset) > 10 else 0
    val_idx = order[:n_val]
    train_idx = order[n_val:]
    if len(train_idx) == 0:
        train_idx = order
        val_idx = order[:0]

    x = dataset.features
    y_motion = dataset.motion
    y_flags = dataset.flags

    opt_motion = MomentumSGD(net.motion, learning_rate)
    opt_discrete = MomentumSGD(net.discrete, learning_rate)

    def total_loss(idx: np.ndarray) -> tuple[float, float, float]:
        m_out, _ = net.motion.forward(x[idx])
        d_out, _ = net.discrete.forward(x[idx])
        m_loss, _ = mse_loss(m_out, y_motion[idx])
        d_loss, _ = bce_logits_loss(d_out, y_flags[idx])
        return m_loss + d_loss, m_loss, d_loss

    history: list[dict] = []
    initial = None
    best_val = math.inf
    best_weights = None
    stale = 0

    for epoch in range(epochs):
        perm = rng.permutation(len(train_idx))
        for start in range(0, len(perm), batch_size):
            idx = train_idx[perm[start : start + batch_size]]
            m_out, m_pre = net.motion.forward(x[idx])
            m_loss, m_grad = mse_loss(m_out, y_motion[idx])
            gw, gb = net.motion.backward(x[idx], m_pre, m_grad)
            opt_motion.step(gw, gb)

            d_out, d_pre = net.discrete.forward(x[idx])
            d_loss, d_grad = bce_logits_loss(d_out, y_flags[idx])
            gw, gb = net.discrete.backward(x[idx], d_pre, d_grad)
            opt_discrete.step(gw, gb)

        train_total, train_motion, train_discrete = total_loss(train_idx)
        entry = {
            "epoch": epoch,
            "train_total": train_total,
            "train_motion": train_motion,
            "train_discrete": train_discrete,
        }
        if initial is None:
            initial = train_total
        if len(val_idx):
            val_total, _, _ = total_loss(val_idx)
            entry["val_total"] = val_total
            if val_total < best_val - 1e-12:
                best_val = val_total
                best_weights = (net.motion.copy(), net.discrete.copy())
                stale = 0
            else:
                stale += 1
        history.append(entry)
        if not math.isfinite(train_total) or train_total > 10.0 * max(initial, 1e-12):
            raise TrainingDiverged(history)
        if len(val_idx) and stale >= patience:
            break

    if best_weights is not None:
        net.motion, net.discrete = best_weights
    return net, history


# --- fidelity probe --------------------------------------------------------------


def _sequence_modal(
    seq: ModelSequence, state: State, rng: np.random.Generator
) -> tuple[Action, Provenance]:
    """Ensemble policy's most-likely state-conditioned action (ties by rng).

    The probe is state-conditioned by construction, so the sequence's
    order floor does not apply here; the resolution floor does.
    """
    for idx in range(len(seq.ensembles) - 1, -1, -1):
        hit = seq.ensembles[idx].modal_action(state, (), rng, min_level=seq.min_level)
        if hit is not None:
            return hit
    if seq.fallback is None:
        raise ValueError("model sequence has no fallback policy")
    return seq.fallback(state), Provenance(source=FALLBACK)


def agreement(
    net: PolicyNet,
    seq: ModelSequence,
    heldout: np.ndarray,
    scheme: QuantizationScheme | None = None,
    seed: int = 0,
) -> float:
    """Fraction of held-out states where the net reproduces the ensemble.

    A state counts as agreed when every discrete on/off decision matches
    the ensemble's modal action and each motion component lies within one
    finest-level bin width of it.
    """
    if len(heldout) == 0:
        raise ValueError("held-out set is empty")
    if scheme is None:
        scheme = seq.ensembles[-1].scheme
    move_ladder = scheme.args.get("move")
    turn_ladder = scheme.args.get("turn")
    fine = np.array(
        [
            move_ladder.sigma[-1][0] if move_ladder else 0.1,
            move_ladder.sigma[-1][1] if move_ladder else 0.1,
            turn_ladder.sigma[-1][0] if turn_ladder else 0.1,
        ]
    )
    rng = np.random.default_rng(seed)
    x = np.atleast_2d(heldout)
    motion_out = net.motion(x)
    flag_probs = sigmoid(net.discrete(x))
    agreed = 0
    for i in range(len(x)):
        state = vector_to_state(x[i], net.n_continuous)
        target_action, _ = _sequence_modal(seq, state, rng)
        t_motion, t_flags = encode_action(target_action)
        flags_match = bool(((flag_probs[i] >= 0.5) == (t_flags >= 0.5)).all())
        motion_match = bool((np.abs(motion_out[i] - t_motion) < fine).all())
        if flags_match and motion_match:
            agreed += 1
    return agreed / len(x)


# --- documents -------------------------------------------------------------------


def dataset_to_doc(dataset: BootstrapDataset) -> dict:
    return {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "features": dataset.features.tolist(),
        "motion": dataset.motion.tolist(),
        "flags": dataset.flags.tolist(),
        "provenance": dataset.provenance.tolist(),
        "n_continuous": dataset.n_continuous,
        "demo_steps": dataset.demo_steps,
        "partial": dataset.partial,
    }


def dataset_from_doc(doc: dict) -> BootstrapDataset:
    if doc.get("format") != DATASET_FORMAT:
        raise ValueError(f"not a bootstrap dataset: {doc.get('format')!r}")
    if doc.get("version") != DATASET_VERSION:
        raise ValueError(
            f"dataset version mismatch: file has {doc.get('version')}, "
            f"reader supports {DATASET_VERSION}"
        )
    return BootstrapDataset(
        features=np.array(doc["features"], dtype=np.float64),
        motion=np.array(doc["motion"], dtype=np.float64),
        flags=np.array(doc["flags"], dtype=np.float64),
        provenance=np.array(doc["provenance"], dtype=np.int8),
        n_continuous=int(doc["n_continuous"]),
        demo_steps=int(doc["demo_steps"]),
        partial=bool(doc["partial"]),
    )


def policy_net_to_doc(net: PolicyNet) -> dict:
    return {
        "format": POLICY_NET_FORMAT,
        "version": POLICY_NET_VERSION,
        "motion": net_to_doc(net.motion),
        "discrete": net_to_doc(net.discrete),
        "n_continuous": net.n_continuous,
    }


def policy_net_from_doc(doc: dict) -> PolicyNet:
    if doc.get("format") != POLICY_NET_FORMAT:
        raise ValueError(f"not a policy net: {doc.get('format')!r}")
    if doc.get("version") != POLICY_NET_VERSION:
        raise ValueError(
            f"net version mismatch: file has {doc.get('version')}, "
            f"reader supports {POLICY_NET_VERSION}"
        )
    return PolicyNet(
        motion=net_from_doc(doc["motion"]),
        discrete=net_from_doc(doc["discrete"]),
        n_continuous=int(doc["n_continuous"]),
    )

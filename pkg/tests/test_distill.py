import math

import numpy as np
import pytest

from playbench.arena import arena_fallback, arena_scheme, record_episode
from playbench.core import Action
from playbench.distill import (
    BootstrapDataset,
    TrainingDiverged,
    agreement,
    bootstrap,
    build_policy_net,
    dataset_from_doc,
    dataset_to_doc,
    decode_action,
    depth_rule,
    encode_action,
    policy_net_from_doc,
    policy_net_to_doc,
    quantization_steps,
    train,
    width_rule,
)
from playbench.markov import ModelSequence, push_demonstration


@pytest.fixture(scope="module")
def two_behavior(config):
    """Circler + sniper demos fitted into a sequence with an order/level floor."""
    scheme = arena_scheme(config, levels=3)
    demos = [
        record_episode(config, "circler", 700, seed=1),
        record_episode(config, "sniper", 700, seed=2),
    ]
    seq = ModelSequence(
        fallback=arena_fallback(config), fallback_name="obstacle-avoidance", min_level=1
    )
    for demo in demos:
        seq = push_demonstration(seq, demo, scheme, 3)
    return scheme, demos, seq


# --- architecture rules ---


def test_width_rule_examples():
    assert width_rule([10, 10, 10]) == 60
    assert width_rule([8]) == 16


def test_width_rule_rejects_empty_and_zero():
    with pytest.raises(ValueError):
        width_rule([])
    with pytest.raises(ValueError):
        width_rule([4, 0])


def test_depth_rule_examples():
    assert depth_rule(3, 20) == (3, 40)
    assert depth_rule(1, 8) == (1, 16)


def test_depth_rule_rejects_orderless():
    with pytest.raises(ValueError):
        depth_rule(0, 8)


def test_quantization_steps(config):
    scheme = arena_scheme(config, levels=3)
    from playbench.arena import feature_ranges

    steps = quantization_steps(scheme, feature_ranges(config))
    # full-span sigma0 halved three times: 8 bins per dimension at the finest level
    assert steps == [8] * len(steps)


def test_build_policy_net_obeys_rules(config):
    scheme = arena_scheme(config, levels=3)
    net = build_policy_net(config, scheme, n_max=3, seed=0)
    assert net.motion.dims == (13, 2 * 8 * 9, 3)
    assert net.discrete.dims == (13, 26, 26, 26, 3)


# --- action encoding ---


def test_encode_decode_round_trip():
    for action in (
        Action("move", (0.6, -0.8)),
        Action("turn", (0.3,)),
        Action("fire"),
        Action("interact"),
        Action("sprint-toggle"),
        Action("no-op"),
    ):
        motion, flags = encode_action(action)
        probs = flags * 0.98 + 0.01  # confident flags
        assert decode_action(motion, probs) == action


# --- bootstrap ---


def test_bootstrap_rejects_out_of_range_multiplier(two_behavior, config):
    scheme, demos, seq = two_behavior
    for bad in (4.9, 20.1, 0.0):
        with pytest.raises(ValueError, match="multiplier"):
            bootstrap(seq, demos, [config], bad, seed=0)


def test_bootstrap_multiplier_and_partition(two_behavior, config):
    scheme, demos, seq = two_behavior
    dataset = bootstrap(seq, demos, [config], 5.0, seed=0)
    demo_steps = sum(len(d) for d in demos)
    assert dataset.multiplier >= 5.0
    assert not dataset.partial
    counts = dataset.provenance_counts()
    assert counts["demonstration"] == demo_steps
    assert sum(counts.values()) == len(dataset)


def test_bootstrap_deterministic(two_behavior, config):
    scheme, demos, seq = two_behavior
    d1 = bootstrap(seq, demos[:1], [config], 5.0, seed=4)
    d2 = bootstrap(seq, demos[:1], [config], 5.0, seed=4)
    assert np.array_equal(d1.features, d2.features)
    assert np.array_equal(d1.motion, d2.motion)
    assert np.array_equal(d1.flags, d2.flags)
    assert np.array_equal(d1.provenance, d2.provenance)


def test_bootstrap_budget_flags_partial(two_behavior, config):
    scheme, demos, seq = two_behavior
    dataset = bootstrap(seq, demos[:1], [config], 5.0, seed=0, step_budget=100)
    assert dataset.partial
    assert len(dataset) < 5 * len(demos[0])


def test_dataset_doc_round_trip(two_behavior, config):
    scheme, demos, seq = two_behavior
    dataset = bootstrap(seq, demos[:1], [config], 5.0, seed=1, rollout_steps=100)
    back = dataset_from_doc(dataset_to_doc(dataset))
    assert np.array_equal(back.features, dataset.features)
    assert np.array_equal(back.motion, dataset.motion)
    assert back.demo_steps == dataset.demo_steps
    assert back.partial == dataset.partial


# --- training ---


def _constant_dataset(n=400, varied_inputs=False):
    """Degenerate regression: one (state, motion target) sample repeated."""
    rng = np.random.default_rng(0)
    if varied_inputs:
        feats = rng.standard_normal((n, 13))
    else:
        row = np.array([3.0, 3.0, 0.0, 0.0, 0.0, 12.0, 0.5, 15.0, -0.5, 0, 0, 0, 0])
        feats = np.tile(row, (n, 1))
    motion = np.tile(np.array([0.25, -0.5, 0.0]), (n, 1))
    flags = np.zeros((n, 3))
    return BootstrapDataset(
        features=feats,
        motion=motion,
        flags=flags,
        provenance=np.zeros(n, dtype=np.int8),
        n_continuous=9,
        demo_steps=n,
    )


def test_constant_target_converges(config):
    scheme = arena_scheme(config, levels=3)
    net = build_policy_net(config, scheme, 1, seed=0)
    dataset = _constant_dataset()
    net, history = train(net, dataset, epochs=50, batch_size=32, learning_rate=2e-3, seed=0)
    pred = net.motion(dataset.features[:16])
    assert float(np.abs(pred - dataset.motion[:16]).max()) < 1e-3


def test_zero_epochs_returns_initial_net(config):
    scheme = arena_scheme(config, levels=3)
    net = build_policy_net(config, scheme, 1, seed=0)
    before = [w.copy() for w in net.motion.weights]
    out, history = train(net, _constant_dataset(50), epochs=0)
    assert history == []
    assert all(np.array_equal(a, b) for a, b in zip(before, out.motion.weights))


def test_training_loss_decreases(config):
    scheme = arena_scheme(config, levels=3)
    net = build_policy_net(config, scheme, 2, seed=1)
    net, history = train(net, _constant_dataset(varied_inputs=True), epochs=20, batch_size=32,
                         learning_rate=1e-3, seed=1)
    assert history[-1]["train_total"] < history[0]["train_total"]


def test_divergence_aborts(config):
    scheme = arena_scheme(config, levels=3)
    net = build_policy_net(config, scheme, 1, seed=0)
    with pytest.raises(TrainingDiverged):
        train(net, _constant_dataset(), epochs=60, batch_size=16, learning_rate=5.0, seed=0)


def test_training_deterministic(config):
    scheme = arena_scheme(config, levels=3)
    dataset = _constant_dataset(200)
    runs = []
    for _ in range(2):
        net = build_policy_net(config, scheme, 1, seed=7)
        net, history = train(net, dataset, epochs=5, batch_size=32, learning_rate=1e-3, seed=7)
        runs.append((history[-1]["train_total"], [w.copy() for w in net.motion.weights]))
    assert runs[0][0] == runs[1][0]
    assert all(np.array_equal(a, b) for a, b in zip(runs[0][1], runs[1][1]))


# --- agreement ---


def test_agreement_two_behavior_fixture(two_behavior, config):
    scheme, demos, seq = two_behavior
    dataset = bootstrap(seq, demos, [config], 6.0, seed=0)
    rng = np.random.default_rng(42)
    order = rng.permutation(len(dataset))
    split = int(len(dataset) * 0.8)
    train_set = BootstrapDataset(
        features=dataset.features[order[:split]],
        motion=dataset.motion[order[:split]],
        flags=dataset.flags[order[:split]],
        provenance=dataset.provenance[order[:split]],
        n_continuous=dataset.n_continuous,
        demo_steps=dataset.demo_steps,
    )
    heldout = dataset.features[order[split:]]
    net = build_policy_net(config, scheme, 3, seed=0)
    net, _ = train(net, train_set, epochs=40, batch_size=64, learning_rate=2e-3, seed=0)
    held_ratio = agreement(net, seq, heldout, seed=0)
    assert held_ratio >= 0.9
    # optimism: agreement on the training inputs is at least the held-out one
    train_ratio = agreement(net, seq, train_set.features[: len(heldout)], seed=0)
    assert train_ratio >= held_ratio - 0.02


def test_agreement_bounded_and_chance_for_untrained(two_behavior, config):
    scheme, demos, seq = two_behavior
    dataset = bootstrap(seq, demos[:1], [config], 5.0, seed=2, rollout_steps=200)
    net = build_policy_net(config, scheme, 3, seed=123)
    ratio = agreement(net, seq, dataset.features[:400], seed=0)
    assert 0.0 <= ratio <= 1.0
    # untrained nets should sit near chance level, far below the distilled bar
    assert ratio < 0.5


def test_agreement_empty_heldout_rejected(two_behavior):
    scheme, demos, seq = two_behavior
    net_doc_scheme = scheme
    with pytest.raises(ValueError, match="empty"):
        agreement(None, seq, np.empty((0, 13)))


def test_inference_cost_independent_of_corpus(two_behavior, config):
    # net shapes come from the scheme and feature layout, never the dataset;
    # a forward pass therefore costs the same however much data trained it
    scheme, demos, seq = two_behavior
    small = bootstrap(seq, demos[:1], [config], 5.0, seed=1, rollout_steps=100)
    big = bootstrap(seq, demos, [config], 8.0, seed=1)
    net_small = build_policy_net(config, scheme, 3, seed=0)
    net_big = build_policy_net(config, scheme, 3, seed=0)
    train(net_small, small, epochs=2, seed=0)
    train(net_big, big, epochs=2, seed=0)
    assert net_small.motion.dims == net_big.motion.dims
    assert net_small.discrete.dims == net_big.discrete.dims

    import time

    x = np.random.default_rng(0).standard_normal((256, 13))
    def median_forward(net):
        times = []
        for _ in range(30):
            t0 = time.perf_counter()
            net.motion(x)
            net.discrete(x)
            times.append(time.perf_counter() - t0)
        return sorted(times)[len(times) // 2]

    t_small, t_big = median_forward(net_small), median_forward(net_big)
    assert t_big < 2.0 * t_small + 1e-4


def test_policy_net_doc_round_trip(config):
    scheme = arena_scheme(config, levels=3)
    net = build_policy_net(config, scheme, 2, seed=5)
    back = policy_net_from_doc(policy_net_to_doc(net))
    x = np.random.default_rng(0).standard_normal((4, 13))
    assert np.array_equal(net.motion(x), back.motion(x))
    assert np.array_equal(net.discrete(x), back.discrete(x))

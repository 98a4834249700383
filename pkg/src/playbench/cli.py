"""Command-line front end for the whole workbench.

Every command takes --seed, --config and --out where they apply; artifact
files are the versioned text documents described in each module.
"""

from __future__ import annotations

import json
import sys

import click
import numpy as np

from . import persist
from .arena import (
    SCRIPTED_BEHAVIORS,
    arena_fallback,
    arena_scheme,
    default_config,
    features,
    record_episode,
)
from .arena import reset as arena_reset
from .arena import step as arena_step
from .core import Action, load_episode
from .distill import agreement as net_agreement
from .distill import bootstrap as run_bootstrap
from .distill import build_policy_net, train
from .markov import ModelSequence, TelemetryWindow, fit_ensemble, policy_action, push_demonstration
from .progression import (
    ESConfig,
    astar_plan,
    es_optimize,
    event_career_model,
    rollout,
)
from .style import style_distance


def _load_arena_config(path: str | None, seed: int):
    if path is None:
        return default_config(seed=seed)
    return persist.restore(path)


def _load_model(path: str | None):
    if path is None:
        return event_career_model()
    return persist.restore(path)


@click.group()
def main() -> None:
    """Desk-scale agent-training workbench."""


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=7901, show_default=True)
@click.option("--ws-port", default=7902, show_default=True, help="WebSocket port for the UI.")
@click.option("--seed", default=0, show_default=True, help="Default session seed.")
@click.option("--config", "config_path", default=None,
              help="Arena config document used when a reset names none.")
@click.option("--out", "root", default="artifacts", show_default=True, help="Persistence root.")
def serve(host: str, port: int, ws_port: int, seed: int, config_path: str | None,
          root: str) -> None:
    """Run the session gateway (TCP line protocol + WebSocket)."""
    from .server import serve as run_server

    click.echo(f"gateway on tcp://{host}:{port} and ws://{host}:{ws_port}, artifacts in {root}/")
    run_server(host=host, port=port, ws_port=ws_port, root=root, default_seed=seed,
               config_path=config_path)


@main.command()
@click.option("--behavior", type=click.Choice(SCRIPTED_BEHAVIORS), default="circler",
              show_default=True)
@click.option("--steps", default=500, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--config", "config_path", default=None, help="Arena config document.")
@click.option("--out", default="demo", show_default=True, help="Artifact name.")
@click.option("--root", default="artifacts", show_default=True)
def record(behavior: str, steps: int, seed: int, config_path: str | None, out: str, root: str) -> None:
    """Roll a scripted behavior into an episode file."""
    config = _load_arena_config(config_path, seed)
    episode = record_episode(config, behavior, steps, seed=seed)
    path = persist.save("episode", episode, root, out)
    click.echo(f"recorded {len(episode)} steps of {behavior} -> {path}")


@main.command(name="train")
@click.argument("episodes", nargs=-1, required=True)
@click.option("--n-max", default=3, show_default=True)
@click.option("--levels", default=3, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--config", "config_path", default=None)
@click.option("--out", default="ensemble", show_default=True)
@click.option("--root", default="artifacts", show_default=True)
def train_ensemble(episodes, n_max, levels, seed, config_path, out, root) -> None:
    """Fit a Markov ensemble on demonstration episode files."""
    config = _load_arena_config(config_path, seed)
    scheme = arena_scheme(config, levels=levels)
    demos = [load_episode(p) for p in episodes]
    ensemble = fit_ensemble(demos, scheme, n_max)
    path = persist.save("ensemble", ensemble, root, out)
    keys = sum(len(m) for m in ensemble.models.values())
    click.echo(f"fitted ({n_max + 1} orders x {levels + 1} levels), {keys} keys -> {path}")


@main.command()
@click.argument("ensemble_path")
@click.option("--steps", default=300, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--config", "config_path", default=None)
@click.option("--out", default=None, help="Optional trajectory episode name.")
@click.option("--root", default="artifacts", show_default=True)
def play(ensemble_path, steps, seed, config_path, out, root) -> None:
    """Roll the ensemble policy in the arena; print telemetry."""
    config = _load_arena_config(config_path, seed)
    ensemble = persist.restore(ensemble_path)
    seq = ModelSequence(
        ensembles=(ensemble,),
        fallback=arena_fallback(config),
        fallback_name="obstacle-avoidance",
    )
    rng = np.random.default_rng(seed)
    sim = arena_reset(config)
    telemetry = TelemetryWindow()
    recent: list[Action] = []
    from .core import EpisodeBuilder
    from .arena import episode_meta

    builder = EpisodeBuilder(episode_meta(config, env_id="arena/play"))
    for _ in range(steps):
        obs = features(config, sim)
        action, prov = policy_action(seq, obs, recent, rng)
        telemetry.record(prov)
        builder.append(obs, action)
        sim, _ = arena_step(config, sim, action)
        recent.append(action)
        if len(recent) > ensemble.n_max:
            recent.pop(0)
    click.echo(
        f"{steps} steps: competence {telemetry.competence:.3f}, "
        f"confidence {telemetry.confidence:.3f}"
    )
    if out:
        path = persist.save("episode", builder.build(), root, out)
        click.echo(f"trajectory -> {path}")


@main.command(name="bootstrap")
@click.argument("episodes", nargs=-1, required=True)
@click.option("--multiplier", default=10.0, show_default=True)
@click.option("--n-max", default=3, show_default=True)
@click.option("--levels", default=3, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--config", "config_path", default=None)
@click.option("--out", default="dataset", show_default=True)
@click.option("--root", default="artifacts", show_default=True)
def bootstrap_cmd(episodes, multiplier, n_max, levels, seed, config_path, out, root) -> None:
    """Multiply demonstrations into a bootstrap dataset."""
    config = _load_arena_config(config_path, seed)
    scheme = arena_scheme(config, levels=levels)
    demos = [load_episode(p) for p in episodes]
    seq = ModelSequence(fallback=arena_fallback(config), fallback_name="obstacle-avoidance")
    for demo in demos:
        seq = push_demonstration(seq, demo, scheme, n_max)
    dataset = run_bootstrap(seq, demos, [config], multiplier, seed=seed)
    path = persist.save("dataset", dataset, root, out)
    counts = dataset.provenance_counts()
    click.echo(
        f"{len(dataset)} samples (x{dataset.multiplier:.1f}), "
        f"provenance {counts}{' PARTIAL' if dataset.partial else ''} -> {path}"
    )


@main.command()
@click.argument("dataset_path")
@click.option("--epochs", default=60, show_default=True)
@click.option("--batch-size", default=64, show_default=True)
@click.option("--learning-rate", default=1e-3, show_default=True)
@click.option("--n-max", default=3, show_default=True)
@click.option("--levels", default=3, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--config", "config_path", default=None)
@click.option("--out", default="policy", show_default=True)
@click.option("--root", default="artifacts", show_default=True)
def distill(dataset_path, epochs, batch_size, learning_rate, n_max, levels, seed,
            config_path, out, root) -> None:
    """Train compact policy nets on a bootstrap dataset."""
    config = _load_arena_config(config_path, seed)
    scheme = arena_scheme(config, levels=levels)
    dataset = persist.restore(dataset_path)
    net = build_policy_net(config, scheme, n_max, seed=seed)
    net, history = train(net, dataset, epochs=epochs, batch_size=batch_size,
                         learning_rate=learning_rate, seed=seed)
    path = persist.save("net", net, root, out)
    last = history[-1] if history else {}
    click.echo(
        f"motion {net.motion.dims}, discrete {net.discrete.dims}; "
        f"final loss {last.get('train_total', float('nan')):.5f} -> {path}"
    )


@main.command(name="style-dist")
@click.option("--left", "-a", multiple=True, required=True, help="Episode files, behavior V.")
@click.option("--right", "-b", multiple=True, required=True, help="Episode files, behavior W.")
@click.option("--lam", default=0.5, show_default=True)
@click.option("--order", default=3, show_default=True, help="Maximum gram order N.")
@click.option("--metric", type=click.Choice(["jsd", "hellinger"]), default="jsd",
              show_default=True)
@click.option("--level", default=3, show_default=True, help="Quantization level j.")
@click.option("--levels", default=3, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--config", "config_path", default=None)
@click.option("--out", default=None, help="Optional report artifact name.")
@click.option("--root", default="artifacts", show_default=True)
def style_dist(left, right, lam, order, metric, level, levels, seed, config_path, out, root) -> None:
    """Style distance between two behaviors (sets of episode files)."""
    config = _load_arena_config(config_path, seed)
    scheme = arena_scheme(config, levels=levels)
    v = [load_episode(p) for p in left]
    w = [load_episode(p) for p in right]
    report = style_distance(v, w, lam, order, metric, scheme, level)
    click.echo(report.render())
    if out:
        path = persist.save("report", report, root, out)
        click.echo(f"report -> {path}")


@main.group()
def plan() -> None:
    """Progression-model playtesting."""


@plan.command(name="astar")
@click.option("--config", "model_path", default=None, help="Progression model document.")
@click.option("--cutoff", default=2000, show_default=True, help="A* node cutoff.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", default=None, help="Optional plan JSON path.")
def plan_astar(model_path, cutoff, seed, out) -> None:
    """Shortest action plan to the model's goal."""
    model = _load_model(model_path)
    result = astar_plan(model, node_cutoff=cutoff)
    status = "reached" if result.reached else "CUTOFF (partial plan)"
    click.echo(f"{status}: {len(result.actions)} actions, {result.expanded} nodes expanded")
    for i, action_id in enumerate(result.actions, 1):
        click.echo(f"  {i:3d}. {action_id}")
    if out:
        with open(out, "w", encoding="utf-8") as fp:
            json.dump({"reached": result.reached, "actions": list(result.actions),
                       "expanded": result.expanded}, fp, indent=2)
        click.echo(f"plan -> {out}")


@plan.command(name="es")
@click.option("--config", "model_path", default=None, help="Progression model document.")
@click.option("--iterations", default=200, show_default=True)
@click.option("--population", default=32, show_default=True)
@click.option("--sigma", default=0.2, show_default=True)
@click.option("--learning-rate", default=0.1, show_default=True)
@click.option("--horizon", default=60, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", default=None, help="Optional J-history JSON path.")
def plan_es(model_path, iterations, population, sigma, learning_rate, horizon, seed, out) -> None:
    """Evolve a softmax utility policy against J(N, M)."""
    model = _load_model(model_path)
    es_config = ESConfig(population=population, sigma=sigma, learning_rate=learning_rate,
                         iterations=iterations, horizon=horizon)
    params, history = es_optimize(model, es_config, seed=seed)
    stats = rollout(model, params, horizon, seed=seed + 1)
    click.echo(f"final J (mean over last 5 iters): {np.mean(history[-5:]):.4f}"
               if history else "no iterations run")
    click.echo(f"events with best params: N={stats.events_done} M={stats.events_attempted} "
               f"in {stats.steps} actions")
    step_ = max(1, len(history) // 20)
    for i in range(0, len(history), step_):
        click.echo(f"  iter {i:4d}  mean J = {history[i]:.4f}")
    if out:
        with open(out, "w", encoding="utf-8") as fp:
            json.dump({"history": history, "params": {"p": list(params.p), "q": list(params.q),
                       "temperature": params.temperature}}, fp, indent=2)
        click.echo(f"history -> {out}")


@main.command(name="eval")
@click.argument("what", type=click.Choice(["competence", "agreement"]))
@click.option("--ensemble", "ensemble_path", default=None)
@click.option("--episode", "episode_paths", multiple=True)
@click.option("--net", "net_path", default=None)
@click.option("--dataset", "dataset_path", default=None)
@click.option("--steps", default=300, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--config", "config_path", default=None)
def eval_cmd(what, ensemble_path, episode_paths, net_path, dataset_path, steps, seed,
             config_path) -> None:
    """Competence of an ensemble over a rollout, or net/ensemble agreement."""
    config = _load_arena_config(config_path, seed)
    if what == "competence":
        if not ensemble_path:
            raise click.UsageError("eval competence needs --ensemble")
        ensemble = persist.restore(ensemble_path)
        seq = ModelSequence(ensembles=(ensemble,), fallback=arena_fallback(config),
                            fallback_name="obstacle-avoidance")
        rng = np.random.default_rng(seed)
        sim = arena_reset(config)
        recent: list[Action] = []
        answered = 0
        for _ in range(steps):
            obs = features(config, sim)
            action, prov = policy_action(seq, obs, recent, rng)
            answered += prov.source != "fallback"
            sim, _ = arena_step(config, sim, action)
            recent.append(action)
            if len(recent) > ensemble.n_max:
                recent.pop(0)
        click.echo(f"competence over {steps} queries: {answered / steps:.3f}")
        return
    if not (net_path and ensemble_path and dataset_path):
        raise click.UsageError("eval agreement needs --net, --ensemble and --dataset")
    net = persist.restore(net_path)
    ensemble = persist.restore(ensemble_path)
    dataset = persist.restore(dataset_path)
    seq = ModelSequence(ensembles=(ensemble,), fallback=arena_fallback(config),
                        fallback_name="obstacle-avoidance")
    ratio = net_agreement(net, seq, dataset.features, seed=seed)
    click.echo(f"agreement over {len(dataset)} states: {ratio:.3f}")


if __name__ == "__main__":
    main()

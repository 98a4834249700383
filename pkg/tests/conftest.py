import numpy as np
import pytest

from playbench.arena import arena_scheme, default_config, feature_ranges, record_episode
from playbench.core import Action, Episode, EpisodeBuilder, EpisodeMeta, State


@pytest.fixture(scope="session")
def config():
    return default_config(seed=7)


@pytest.fixture(scope="session")
def scheme(config):
    return arena_scheme(config, levels=3)


@pytest.fixture(scope="session")
def fine_scheme(config):
    spans = [hi - lo for lo, hi in feature_ranges(config)]
    return arena_scheme(config, levels=3, sigma0=[s / 8 for s in spans])


@pytest.fixture(scope="session")
def circler_episode(config):
    return record_episode(config, "circler", 600, seed=1)


@pytest.fixture(scope="session")
def zigzag_episode(config):
    return record_episode(config, "zigzag", 600, seed=1)


def tiny_meta(continuous_dim=1, categorical_dim=0):
    return EpisodeMeta(
        env_id="test",
        seed=0,
        continuous_dim=continuous_dim,
        categorical_dim=categorical_dim,
        channels={"a": 0, "b": 0, "go": 1},
    )


def make_episode(values, channels, meta=None):
    """Episode with 1-D continuous states ``values`` and 0-arg actions."""
    meta = meta or tiny_meta()
    builder = EpisodeBuilder(meta)
    for v, ch in zip(values, channels):
        builder.append(State(continuous=(float(v),)), Action(ch))
    return builder.build()

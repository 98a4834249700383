import numpy as np
import pytest

from playbench import persist
from playbench.arena import arena_scheme, default_config, record_episode
from playbench.distill import bootstrap, build_policy_net
from playbench.markov import ModelSequence, fit_ensemble, push_demonstration
from playbench.progression import event_career_model
from playbench.style import style_distance
from playbench.arena import arena_fallback


def test_episode_round_trip(tmp_path, config, circler_episode):
    path = persist.save("episode", circler_episode, str(tmp_path), "circ")
    assert persist.restore(path) == circler_episode


def test_ensemble_round_trip_bit_exact(tmp_path, config, scheme, circler_episode):
    ens = fit_ensemble([circler_episode], scheme, 2)
    path = persist.save("ensemble", ens, str(tmp_path), "ens")
    back = persist.restore(path)
    for key in ens.models:
        assert back.models[key].table == ens.models[key].table


def test_save_load_refit_matches(tmp_path, config, scheme, circler_episode):
    # episode -> file -> ensemble equals ensemble fit on the original
    path = persist.save("episode", circler_episode, str(tmp_path), "demo")
    reloaded = persist.restore(path)
    e1 = fit_ensemble([circler_episode], scheme, 2)
    e2 = fit_ensemble([reloaded], scheme, 2)
    for key in e1.models:
        assert e1.models[key].table == e2.models[key].table


def test_scheme_report_model_config_round_trips(tmp_path, config, scheme, circler_episode,
                                                zigzag_episode):
    assert persist.restore(persist.save("scheme", scheme, str(tmp_path), "s")) == scheme
    report = style_distance([circler_episode], [zigzag_episode], 0.5, 1, "jsd", scheme, 3)
    assert persist.restore(persist.save("report", report, str(tmp_path), "r")) == report
    model = event_career_model()
    assert persist.restore(persist.save("model", model, str(tmp_path), "m")) == model
    assert persist.restore(persist.save("arena-config", config, str(tmp_path), "a")) == config


def test_net_round_trip(tmp_path, config, scheme):
    net = build_policy_net(config, scheme, 2, seed=1)
    path = persist.save("net", net, str(tmp_path), "n")
    back = persist.restore(path)
    x = np.random.default_rng(0).standard_normal((3, 13))
    assert np.array_equal(net.motion(x), back.motion(x))


def test_dataset_round_trip(tmp_path, config, scheme, circler_episode):
    seq = push_demonstration(
        ModelSequence(fallback=arena_fallback(config)), circler_episode, scheme, 2
    )
    ds = bootstrap(seq, [circler_episode], [config], 5.0, seed=0, rollout_steps=150)
    path = persist.save("dataset", ds, str(tmp_path), "d")
    back = persist.restore(path)
    assert np.array_equal(back.features, ds.features)
    assert np.array_equal(back.provenance, ds.provenance)


def test_corrupted_document_reports_offset(tmp_path):
    path = tmp_path / "broken.report.json"
    path.write_text('{"format": "playbench/style-report", "version" 1}')
    with pytest.raises(persist.PersistError) as err:
        persist.restore(str(path))
    assert err.value.offset is not None


def test_version_mismatch_is_explicit(tmp_path, scheme):
    path = persist.save("scheme", scheme, str(tmp_path), "s")
    doc = open(path).read().replace('"version": 1', '"version": 99')
    open(path, "w").write(doc)
    with pytest.raises(persist.VersionError, match="version"):
        persist.restore(path)


def test_unknown_kind_rejected(tmp_path, scheme):
    with pytest.raises(ValueError, match="unknown artifact kind"):
        persist.save("sandwich", scheme, str(tmp_path), "x")


def test_unknown_format_rejected(tmp_path):
    path = tmp_path / "alien.report.json"
    path.write_text('{"format": "who/knows", "version": 1}')
    with pytest.raises(persist.PersistError, match="unknown artifact format"):
        persist.restore(str(path))

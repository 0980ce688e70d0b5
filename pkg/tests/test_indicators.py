import numpy as np
import pytest

from tailfolio.anneal import AnnealConfig
from tailfolio.errors import LengthMismatch
from tailfolio.indicators import (MethodStream, fit_indicator_weights,
                                  indicator_report, stream_from_net,
                                  stream_from_values)
from tailfolio.marginals import sample, ExponentialMarginal

from helpers import two_site_net


def make_streams(t=400, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.laplace(0.01, 0.4, size=t)
    b = 0.3 * a + rng.laplace(-0.02, 0.5, size=t)
    return [stream_from_values("surveys", a), stream_from_values("sensors", b)]


def test_stream_shapes():
    s = stream_from_values("x", [[1.0], [2.0]])
    assert s.values.shape == (2,)
    assert isinstance(s, MethodStream)


def test_stack_guards():
    with pytest.raises(LengthMismatch, match="at least two"):
        indicator_report([stream_from_values("only", np.zeros(10))])
    bad = [stream_from_values("a", np.zeros(10)),
           stream_from_values("b", np.zeros(11))]
    with pytest.raises(LengthMismatch, match="differ in epoch count"):
        indicator_report(bad)


def test_stream_from_net_unit_scale():
    net = two_site_net()
    from tailfolio.eeg import simulate
    phi = simulate(net, 1500, seed=10)
    s = stream_from_net("eeg", net, phi)
    assert s.values.shape == (1499,)
    # innovations are standardized, and the scaled sum stays near unit variance
    assert float(np.std(s.values)) == pytest.approx(1.0, abs=0.1)


def test_report_ok_path():
    streams = make_streams()
    report, model = indicator_report(streams, holdout_fraction=0.25)
    assert report["status"] == "ok"
    assert report["methods"] == ["surveys", "sensors"]
    assert report["epochs"] == 400
    assert report["train_epochs"] == 300
    assert report["holdout_epochs"] == 100
    assert model is not None
    assert model.channels == ("surveys", "sensors")
    # positively related streams show up in the copula correlation
    assert report["correlation"][0][1] > 0.1
    w = report["weights"]["values"]
    assert w["surveys"] == pytest.approx(1.0 / np.sqrt(2.0))
    assert not report["weights"]["fitted"]
    assert report["portfolio"]["train"]["n"] == 300
    assert 0.0 < report["overlaps"]["train_holdout"] <= 1.0


def test_report_explicit_weights():
    streams = make_streams()
    report, model = indicator_report(streams, weights=(0.8, -0.6))
    assert report["weights"]["values"]["surveys"] == 0.8
    assert not report["weights"]["fitted"]
    with pytest.raises(LengthMismatch):
        indicator_report(streams, weights=(1.0,))


def test_report_degenerate_pairing():
    base = sample(ExponentialMarginal(m=0.0, chi=1.0), 300, seed=5)
    streams = [stream_from_values("a", base),
               stream_from_values("b", base.copy()),
               stream_from_values("c", sample(ExponentialMarginal(m=0.0, chi=1.0),
                                              300, seed=6))]
    report, model = indicator_report(streams)
    assert report["status"] == "degenerate_pairing"
    assert model is None
    pairs = report["degenerate_pairs"]
    assert any(p[0] == "a" and p[1] == "b" for p in pairs)
    assert all(abs(p[2]) >= 0.999 for p in pairs)
    assert "weights" not in report


def test_report_state_overlaps():
    streams = make_streams(t=600, seed=3)
    labels = ["calm"] * 300 + ["storm"] * 300
    report, _ = indicator_report(streams, state_labels=labels)
    assert set(report["states"]) == {"calm", "storm"}
    key = "calm|storm"
    assert key in report["overlaps"]["states"]
    assert 0.0 < report["overlaps"]["states"][key] <= 1.0
    with pytest.raises(LengthMismatch):
        indicator_report(streams, state_labels=["x"] * 10)


def test_report_holdout_fraction_guard():
    streams = make_streams()
    with pytest.raises(LengthMismatch):
        indicator_report(streams, holdout_fraction=0.0)
    with pytest.raises(LengthMismatch):
        indicator_report(streams, holdout_fraction=1.0)


def test_fit_weights_unit_norm():
    streams = make_streams(t=800, seed=9)
    report, _ = indicator_report(streams, fit_weights=True,
                                 config=AnnealConfig(seed=2, max_trials=800))
    w = np.array(list(report["weights"]["values"].values()))
    assert float(np.linalg.norm(w)) == pytest.approx(1.0, rel=1e-9)
    assert report["weights"]["fitted"]


def test_fit_weights_flat_surface():
    # constant training streams never fit a marginal, so every window ties
    train = np.zeros((200, 2))
    holdout = np.ones((50, 2))
    w, flat, res = fit_indicator_weights(train, holdout,
                                         AnnealConfig(seed=1, max_trials=600))
    assert flat
    assert float(np.linalg.norm(w)) == pytest.approx(1.0, rel=1e-9)


def test_fit_weights_prefers_informative_direction():
    rng = np.random.default_rng(21)
    strong = rng.laplace(0.0, 0.2, size=1200)
    noise = rng.normal(0.0, 4.0, size=1200)
    train = np.stack([strong[:900], noise[:900]], axis=1)
    holdout = np.stack([strong[900:], noise[900:]], axis=1)
    w, _, _ = fit_indicator_weights(train, holdout,
                                    AnnealConfig(seed=4, max_trials=2000))
    # the tight channel should dominate the mix
    assert abs(w[0]) > abs(w[1])

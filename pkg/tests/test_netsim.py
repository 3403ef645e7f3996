from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seccogc import rng
from seccogc.netsim import (OUTAGE, SUCCESS, NetworkConfig, heterogeneous_config, sample_link_batch,
                            sample_links, symmetric_config)


def test_stream_keys_are_prefix_free():
    a = rng.stream(5, 0, 0).random(4)
    b = rng.stream(5, 0, 0, 0).random(4)
    c = rng.stream(5 + 2**32, 0, 0).random(4)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)
    np.testing.assert_array_equal(a, rng.stream(5, 0, 0).random(4))
    with pytest.raises(ValueError):
        rng.stream(1, -1)


def test_all_up_and_all_down():
    up = sample_links(NetworkConfig.from_probs(4, 0.0, 0.0, semantics=OUTAGE), 1)
    assert up.tau_client_relay.all() and up.tau_relay_server.all()
    down = sample_links(NetworkConfig.from_probs(4, 1.0, 1.0, semantics=OUTAGE), 1)
    assert not down.tau_client_relay.any() and not down.tau_relay_server.any()


def test_symmetric_perfect():
    net = symmetric_config(3, 0.0, 0.0, seed=1, semantics=OUTAGE)
    assert not net.p_client_relay.any() and not net.p_relay_server.any()


def test_success_semantics_default():
    net = symmetric_config(10, 0.9, 0.7)
    np.testing.assert_allclose(net.success_client_relay, 0.9)
    np.testing.assert_allclose(net.success_relay_server, 0.7)
    np.testing.assert_allclose(net.p_client_relay, 0.1)
    outage = symmetric_config(10, 0.9, 0.7, semantics=OUTAGE)
    np.testing.assert_allclose(outage.success_client_relay, 0.1)


def test_up_rate_monte_carlo():
    net = NetworkConfig.from_probs(10, 0.1, 0.1, seed=4, semantics=OUTAGE)
    rates = np.mean([sample_links(net, t).tau_client_relay.mean() for t in range(1000)])
    # 10^5 link draws: the standard error is ~0.001.
    assert abs(rates - 0.9) <= 0.005


def test_determinism_and_attempt_keying():
    net = symmetric_config(6, 0.5, 0.5, seed=7)
    a, b = sample_links(net, 3, 2), sample_links(net, 3, 2)
    np.testing.assert_array_equal(a.tau_client_relay, b.tau_client_relay)
    np.testing.assert_array_equal(a.tau_relay_server, b.tau_relay_server)
    c = sample_links(net, 3, 3)
    assert not np.array_equal(a.tau_client_relay, c.tau_client_relay)


def test_link_independence():
    net = symmetric_config(3, 0.6, 0.4, seed=2)
    cr, rs = sample_link_batch(net, 100_000, rng.stream(2, 99))
    cols = np.concatenate([cr.reshape(len(cr), -1), rs], axis=1).astype(float)
    corr = np.corrcoef(cols.T)
    off = corr[~np.eye(len(corr), dtype=bool)]
    assert np.abs(off).max() <= 0.01 + 4 / np.sqrt(100_000)


def test_heterogeneous_values():
    net = heterogeneous_config(10, seed=0)
    assert set(np.round(net.success_client_relay.ravel(), 10)) == {0.95, 0.9, 0.8, 0.7, 0.6}
    np.testing.assert_allclose(net.success_relay_server, [0.9, 0.8, 0.7, 0.6, 0.5] * 2)


def test_validation():
    with pytest.raises(ValueError):
        NetworkConfig.from_probs(3, 1.2, 0.5)
    with pytest.raises(ValueError):
        NetworkConfig(3, np.zeros((2, 2)), np.zeros(3))
    with pytest.raises(ValueError):
        symmetric_config(3, -0.1, 0.5)


def test_dict_round_trip():
    net = heterogeneous_config(5, seed=9)
    back = NetworkConfig.from_dict(net.to_dict())
    np.testing.assert_array_equal(back.p_client_relay, net.p_client_relay)
    np.testing.assert_array_equal(back.p_relay_server, net.p_relay_server)
    assert back.seed == 9


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.floats(0, 1), st.floats(0, 1), st.integers(0, 2**40),
       st.integers(0, 10**6), st.integers(0, 60))
def test_sample_links_is_pure(K, pcr, prs, seed, round, attempt):
    net = symmetric_config(K, pcr, prs, seed=seed, semantics=SUCCESS)
    a, b = sample_links(net, round, attempt), sample_links(net, round, attempt)
    np.testing.assert_array_equal(a.tau_client_relay, b.tau_client_relay)
    np.testing.assert_array_equal(a.tau_relay_server, b.tau_relay_server)
    assert a.attempt == attempt

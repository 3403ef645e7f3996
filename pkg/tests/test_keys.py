from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from seccogc import keys
from seccogc.keys import DegenerateSchedule, build_key_schedule, check_schedule, sample_keys
from seccogc.rng import stream


def test_k2_unit():
    sched = build_key_schedule(2, 1.0, 4)
    np.testing.assert_array_equal(sched.A, [[1.0], [-1.0]])
    assert check_schedule(sched) == []


def test_k3_sqrt2():
    sched = build_key_schedule(3, math.sqrt(2), 4)
    assert sched.A.shape == (3, 3)
    np.testing.assert_allclose(np.abs(sched.A[sched.A != 0]), 1.0, rtol=1e-15)
    np.testing.assert_allclose(np.linalg.norm(sched.A, axis=1), math.sqrt(2), rtol=1e-15)
    np.testing.assert_allclose(sched.A.sum(axis=0), 0.0, atol=0)


def test_zero_lambda_gives_zero_keys():
    sched = build_key_schedule(5, 0.0, 7)
    assert not sched.A.any()
    assert not sample_keys(sched, stream(0, 1)).keys.any()


def test_k2_keys_are_negatives():
    real = sample_keys(build_key_schedule(2, 0.7, 50), stream(3, 1))
    np.testing.assert_array_equal(real.keys[0], -real.keys[1])


def test_degenerate():
    with pytest.raises(DegenerateSchedule):
        build_key_schedule(1, 1.0, 3)
    with pytest.raises(ValueError):
        build_key_schedule(3, -1.0, 3)


def test_moments_k5():
    K, lam = 5, 1.0
    sched = build_key_schedule(K, lam, 1000)
    gen = stream(11, 1)
    # 10^4 realizations of D=1000 coordinates, pooled per key.
    acc = np.zeros((K, K))
    n = 0
    for _ in range(100):
        N = sample_keys(sched, gen).keys
        acc += N @ N.T
        n += N.shape[1]
    cov = acc / n
    # 10^5 pooled samples per key; the stated bands are much wider than the MC error.
    for k in range(K):
        assert 0.94 <= cov[k, k] <= 1.06
    off = cov[~np.eye(K, dtype=bool)]
    assert np.all(np.abs(off - (-lam**2 / (K - 1))) <= 0.05)


def test_marginal_ks():
    sched = build_key_schedule(4, 2.0, 1)
    gen = stream(5, 1)
    draws = np.array([sample_keys(sched, gen).keys[:, 0] for _ in range(10_000)])
    for k in range(4):
        assert stats.kstest(draws[:, k] / 2.0, "norm").pvalue > 0.01


def test_masked_weight_variance_matches_gram():
    K, lam = 6, 0.8
    sched = build_key_schedule(K, lam, 1)
    w = np.array([0.0, 1.3, -0.4, 2.0, 0.0, 0.7])  # tau * g with two links down
    gen = stream(9, 1)
    Z = gen.standard_normal((sched.m, 100_000))
    sums = w @ (sched.A @ Z)
    want = float(np.sum((w @ sched.A) ** 2))
    assert abs(sums.var() / want - 1) < 0.03


def test_json_round_trip():
    sched = build_key_schedule(4, 0.3, 12)
    back = keys.loads(keys.dumps(sched))
    np.testing.assert_array_equal(back.A, sched.A)
    assert (back.lam, back.D) == (sched.lam, sched.D)


def test_check_schedule_flags_bad_rows():
    sched = build_key_schedule(4, 1.0, 2)
    A = sched.A.copy()
    A[0, 0] *= 2
    bad = keys.KeySchedule(A, 1.0, 2)
    names = {name for name, _ in check_schedule(bad)}
    assert names == {"column_sum_nonzero", "row_norm_not_lambda"}


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 12), st.floats(0, 50, allow_nan=False), st.integers(1, 20), st.integers(0, 2**32))
def test_zero_sum_property(K, lam, D, seed):
    sched = build_key_schedule(K, lam, D)
    assert check_schedule(sched, tol=1e-12) == []
    N = sample_keys(sched, stream(seed, 1)).keys
    assert np.abs(N.sum(axis=0)).max() <= 1e-10 * K * max(lam, 1e-300)

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from sibling_collector import exact
from sibling_collector import families as F
from sibling_collector.families import ProbVector, normalize
from sibling_collector.quadrature import expected_unfilled
from sibling_collector.simulator import (
    AliasTable,
    CapExceeded,
    CollectionOutcome,
    estimate,
    run_once,
    unfilled_from_counts,
)


def test_single_type_completes_at_once():
    out = run_once(ProbVector(np.array([1.0])), np.random.default_rng(1))
    assert out.t == 1
    assert out.counts.tolist() == [1]


@given(st.lists(st.floats(0.05, 10.0), min_size=1, max_size=25), st.integers(0, 2**32))
def test_outcome_invariants(w, seed):
    p = normalize(w)
    out = run_once(p, np.random.default_rng(seed))
    assert out.counts.min() >= 1
    assert out.counts.sum() == out.t
    u = unfilled_from_counts(out, 6)
    assert np.all(np.diff(u) >= 0)
    assert 1 <= u[0] and u[-1] <= p.N


def test_unfilled_from_counts_examples():
    out = CollectionOutcome(6, np.array([3, 1, 2]))
    assert unfilled_from_counts(out, 3).tolist() == [1, 2]
    ones = CollectionOutcome(5, np.ones(5, dtype=np.int64))
    assert unfilled_from_counts(ones, 4).tolist() == [5, 5, 5]
    with pytest.raises(ValueError):
        unfilled_from_counts(out, 1)


def test_two_equal_types_mean_T():
    est = estimate(ProbVector(np.array([0.5, 0.5])), 2, 100_000, seed=11)
    assert abs(est.mean_t - 3) <= 3 * est.se_t


def test_calibration_equal_twenty():
    est = estimate(F.probabilities(F.equal(), 20), 2, 100_000, seed=7)
    assert abs(est.mean_u[2] - float(exact.harmonic(20))) <= 3 * est.se_u[2]
    assert abs(est.mean_t - float(exact.mean_T_equal(20))) <= 3 * est.se_t


def test_variance_of_u2_equal():
    for N in (5, 12):
        est = estimate(F.probabilities(F.equal(), N), 2, 10**6, seed=N)
        target = float(exact.variance_u2_equal(N))
        assert abs(est.var_u[2] - target) <= 0.05 * target


def test_deterministic_and_thread_invariant():
    p = F.probabilities(F.zipf(1.0), 30)
    a = estimate(p, 4, 5000, seed=123, threads=1)
    b = estimate(p, 4, 5000, seed=123, threads=1)
    c = estimate(p, 4, 5000, seed=123, threads=4)
    for other in (b, c):
        assert a.mean_t == other.mean_t and a.se_t == other.se_t
        assert a.mean_u == other.mean_u and a.se_u == other.se_u
        for j in a.u_hist:
            assert np.array_equal(a.u_hist[j], other.u_hist[j])
    d = estimate(p, 4, 5000, seed=124, threads=1)
    assert d.mean_t != a.mean_t


def test_estimate_shape_and_monotonicity():
    est = estimate(F.probabilities(F.linear(), 15), 5, 3000, seed=5)
    means = [est.mean_u[j] for j in range(2, 6)]
    assert means == sorted(means)
    assert all(est.se_u[j] >= 0 for j in range(2, 6))
    cdf = est.empirical_cdf(3)
    assert cdf[-1] == 1.0 and np.all(np.diff(cdf) >= 0)
    assert len(est.rows()) == 4


def test_cap_exceeded():
    p = normalize([1.0, 1e-9])
    with pytest.raises(CapExceeded):
        run_once(p, np.random.default_rng(0), cap=1000)
    with pytest.raises(CapExceeded):
        estimate(p, 2, 10, seed=0, cap=1000)


def test_argument_validation():
    p = F.probabilities(F.equal(), 3)
    for kwargs in (dict(j_max=1, reps=10, seed=0), dict(j_max=2, reps=0, seed=0), dict(j_max=2, reps=10, seed=-1)):
        with pytest.raises(ValueError):
            estimate(p, **kwargs)


@given(st.lists(st.floats(1e-4, 10.0), min_size=1, max_size=60))
def test_alias_table_reproduces_probabilities(w):
    p = normalize(w).p
    table = AliasTable.build(p)
    np.testing.assert_allclose(table.implied_probabilities(), p, rtol=1e-12, atol=1e-15)


def test_alias_draw_frequencies():
    p = F.probabilities(F.zipf(1.0), 10).p
    table = AliasTable.build(p)
    rng = np.random.default_rng(99)
    n = 200_000
    col = rng.integers(0, 10, n)
    keep = rng.random(n) < table.prob[col]
    draws = np.where(keep, col, table.alias[col])
    observed = np.bincount(draws, minlength=10)
    assert stats.chisquare(observed, p * n).pvalue > 1e-4


@pytest.mark.parametrize(
    "spec,N",
    [(F.equal(), 20), (F.zipf(1.0), 30), (F.linear(), 12)],
    ids=["equal20", "zipf30", "linear12"],
)
@pytest.mark.parametrize("j", [2, 3])
def test_seed_coverage_against_quadrature(spec, N, j):
    p = F.probabilities(spec, N)
    target = expected_unfilled(p, j).value
    inside = 0
    for seed in range(100):
        est = estimate(p, j, 2000, seed=seed, threads=1)
        inside += abs(est.mean_u[j] - target) <= 3 * est.se_u[j]
    assert inside >= 99

import math
import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from sibling_collector import exact
from sibling_collector import families as F
from sibling_collector.families import ProbVector, normalize
from sibling_collector.quadrature import (
    NonConvergence,
    QuadratureConfig,
    expected_unfilled,
    expected_unfilled_on_unit_interval,
    integrate_panels,
    log1mexp,
    log_factorial,
    log_survival_sum,
)

CFG = QuadratureConfig()
TOL = CFG.rel_tol


def equal(N):
    return F.probabilities(F.equal(), N)


def scipy_reference(p, j):
    """Direct sum-of-products integrand in t, integrated by QUADPACK."""
    p = np.asarray(p)

    def g(t):
        e = -np.expm1(-p * t)
        total = 0.0
        for k in range(p.size):
            rest = np.prod(np.delete(e, k))
            total += p[k] * math.exp(-p[k] * t) * (p[k] * t) ** (j - 1) / math.factorial(j - 1) * rest
        return total

    v, _ = integrate.quad(g, 0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=400)
    return v


weight_vectors = st.lists(st.floats(0.05, 20.0), min_size=1, max_size=30)


def test_two_equal_types():
    r = expected_unfilled(ProbVector(np.array([0.5, 0.5])), 2)
    assert abs(r.value - 1.5) <= max(TOL * 1.5, CFG.abs_tol)
    assert r.error_estimate >= 0
    assert r.nodes_used > 0


def test_equal_ten_is_h10():
    r = expected_unfilled(equal(10), 2)
    assert abs(r.value - 7381 / 2520) < 1e-8


def test_three_types_closed_form():
    r = expected_unfilled(ProbVector(np.array([0.5, 0.3, 0.2])), 2)
    assert abs(r.value - exact.three_types_j2(0.5, 0.3, 0.2)) < 1e-9


def test_matches_scipy_reference():
    p = normalize([1.0, 2.0, 0.3, 5.0, 0.7]).p
    for j in (2, 3, 5):
        assert abs(expected_unfilled(ProbVector(p), j).value - scipy_reference(p, j)) < 1e-8


def test_unit_interval_examples():
    assert abs(expected_unfilled_on_unit_interval(ProbVector(np.array([0.5, 0.5])), 2).value - 1.5) < 1e-9
    for j in (2, 3, 7):
        assert abs(expected_unfilled(ProbVector(np.array([1.0])), j).value - 1) < 1e-9
        assert abs(expected_unfilled_on_unit_interval(ProbVector(np.array([1.0])), j).value - 1) < 1e-9


def test_unit_interval_agrees_for_random_vectors():
    rng = np.random.default_rng(20240611)
    for _ in range(20):
        N = int(rng.integers(1, 51))
        p = normalize(rng.dirichlet(np.ones(N)))
        j = int(rng.integers(2, 5))
        a = expected_unfilled(p, j)
        b = expected_unfilled_on_unit_interval(p, j)
        assert abs(a.value - b.value) <= a.error_estimate + b.error_estimate + 1e-12


def test_log_survival_sum_examples():
    half = ProbVector(np.array([0.5, 0.5]))
    assert abs(log_survival_sum(half, 2 * math.log(2)) + 2 * math.log(2)) < 1e-15
    far = log_survival_sum(half, 200.0)
    assert far < 0 and far > -1e-40
    near = log_survival_sum(F.probabilities(F.zipf(1.0), 1000), 1e-12)
    assert math.isfinite(near) and near < -1e4
    for bad in (0.0, -1.0):
        with pytest.raises(ValueError):
            log_survival_sum(half, bad)


def test_log1mexp_is_accurate_at_both_ends():
    x = np.array([1e-300, 1e-12, 0.5, math.log(2), 40.0, 800.0])
    got = log1mexp(x)
    want = [math.log(-math.expm1(-v)) if v < 1 else math.log1p(-math.exp(-v)) for v in x]
    np.testing.assert_allclose(got, want, rtol=1e-14)


def test_log_factorial():
    assert log_factorial(0) == 0.0
    assert abs(log_factorial(5) - math.log(120)) < 1e-15
    assert abs(log_factorial(30) - math.lgamma(31)) < 1e-12


def test_integrate_panels_polynomial_and_smooth():
    r = integrate_panels(lambda x: x**7, np.array([0.0, 1.0]), CFG)
    assert abs(r.value - 1 / 8) < 1e-15
    r = integrate_panels(np.exp, np.array([0.0, 0.5, 1.0]), CFG)
    assert abs(r.value - (math.e - 1)) < 1e-14


@pytest.mark.parametrize("N", [1, 2, 5, 17, 64, 100])
def test_oracle_equality_equal_probabilities(N):
    for j in range(2, 6):
        r = expected_unfilled(equal(N), j)
        assert abs(r.value - float(exact.hyperharmonic(N, j))) < 1e-8


def test_rare_third_type_lowers_expectation():
    r = expected_unfilled(normalize([1.0, 1.0, 0.01]), 2)
    assert r.value < 1.5
    eps = 0.01
    assert abs(r.value - exact.three_types_j2(1 / (2 + eps), 1 / (2 + eps), eps / (2 + eps))) < 1e-9


@given(weight_vectors, st.sampled_from([1e-6, 1.0, 1e6]))
def test_scale_invariance(w, s):
    a = expected_unfilled(normalize(w), 2).value
    b = expected_unfilled(normalize([s * x for x in w]), 2).value
    assert abs(a - b) <= 10 * TOL * max(a, 1)


@given(weight_vectors, st.integers(2, 6))
def test_monotone_in_j_and_bounded(w, j):
    p = normalize(w)
    lo = expected_unfilled(p, j).value
    hi = expected_unfilled(p, j + 1).value
    assert lo <= hi + 10 * TOL
    assert 1 - 1e-9 <= lo <= p.N + 1e-9


@given(st.floats(0.001, 0.999))
def test_two_types_closed_form(p1):
    p = ProbVector(np.array([p1, 1 - p1]))
    for j in (2, 3):
        assert abs(expected_unfilled(p, j).value - exact.two_types(p1, j)) < 1e-9


def test_error_estimate_contract():
    for spec, N in ((F.zipf(1.0), 500), (F.linear(), 300), (F.equal(), 1000)):
        r = expected_unfilled(F.probabilities(spec, N), 3)
        assert r.error_estimate <= max(TOL * r.value, CFG.abs_tol)


def test_threads_do_not_change_result():
    p = F.probabilities(F.zipf(0.8), 3000)
    a = expected_unfilled(p, 2, threads=1).value
    b = expected_unfilled(p, 2, threads=4).value
    assert a == b


def test_runtime_scales_subquadratically():
    def best(N):
        p = F.probabilities(F.zipf(1.0), N)
        return min(_timed(p) for _ in range(3))

    times = [best(N) for N in (1000, 2000, 4000, 8000)]
    ratios = [b / a for a, b in zip(times, times[1:])]
    assert max(ratios) <= 3.0, (times, ratios)


def _timed(p):
    start = time.perf_counter()
    expected_unfilled(p, 2, threads=1)
    return time.perf_counter() - start


def test_nonconvergence_reports_best_effort():
    cfg = QuadratureConfig(rel_tol=1e-300, abs_tol=1e-300, max_panel_doublings=2)
    with pytest.raises(NonConvergence) as info:
        expected_unfilled(F.probabilities(F.zipf(1.0), 50), 2, cfg)
    err = info.value
    assert math.isfinite(err.value) and err.error_estimate >= 0 and err.nodes_used > 0
    ref = expected_unfilled(F.probabilities(F.zipf(1.0), 50), 2).value
    assert abs(err.value - ref) < 1e-6


@pytest.mark.parametrize(
    "kwargs",
    [dict(rel_tol=0), dict(abs_tol=-1), dict(nodes_per_panel=1), dict(max_panel_doublings=0)],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        QuadratureConfig(**kwargs)


def test_result_serialization():
    r = expected_unfilled(equal(3), 2)
    d = r.to_dict()
    assert set(d) == {"method", "N", "j", "value", "error_estimate", "nodes_used"}
    assert "ms" in r.to_dict(timing=True)

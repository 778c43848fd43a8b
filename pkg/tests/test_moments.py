from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from beurling_lab.expansion import CoefficientSeries, expand_integers
from beurling_lab.moments import (AccuracyError, continuation_fast, convergence_run,
                                  cross_term_sum, diagonal, eval_continuation, eval_polynomial,
                                  fejer_pair_check, lemma_bound, mean_square_difference,
                                  moment_closed_form, moment_quadrature, pointwise_envelope,
                                  reports_csv, reports_json, rhs_series, schedule_T)
from beurling_lab.primes import DomainError, gen_rational_primes

import oracles


def _random_series(rng, m, lmax=8.0):
    nu = np.exp(np.sort(rng.uniform(0, lmax, m)))
    return CoefficientSeries.from_entries(zip(nu, rng.normal(size=m)))


def test_two_term_example():
    s = CoefficientSeries.from_entries([(1.0, 1.0), (2.0, 1.0)])
    T = 2 * math.pi / math.log(2)
    assert moment_closed_form(s, T) == pytest.approx(1.25, abs=1e-14)
    assert moment_quadrature(s, T) == pytest.approx(1.25, rel=1e-10)


def test_closed_form_against_scipy_quadrature():
    rng = np.random.default_rng(3)
    s = _random_series(rng, 12, 3.0)
    ref = oracles.mean_square_numeric(s.entries(), 40.0, n=800)
    assert moment_closed_form(s, 40.0) == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("T", [1.0, 30.0, 700.0])
def test_direct_and_expsum_agree(T):
    rng = np.random.default_rng(11)
    s = _random_series(rng, 1500)
    a = cross_term_sum(s, T, "direct")
    b = cross_term_sum(s, T, "expsum")
    assert b == pytest.approx(a, rel=1e-10, abs=1e-13)


def test_eval_polynomial_parseval_limit():
    s = CoefficientSeries.from_entries([(1.0, 1.0), (3.0, 0.5)])
    z = eval_polynomial(s, 1.0, 0.0)
    assert z == pytest.approx(1 + 0.5 / 3)


def test_quadrature_budget():
    rng = np.random.default_rng(0)
    s = _random_series(rng, 50)
    with pytest.raises(AccuracyError) as info:
        moment_quadrature(s, 1000.0, tol=1e-14, max_nodes=1000)
    assert math.isfinite(info.value.estimate)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 60), st.floats(0.5, 300.0), st.integers(0, 2**32 - 1))
def test_closed_form_equals_quadrature(m, T, seed):
    s = _random_series(np.random.default_rng(seed), m, 5.0)
    assert moment_quadrature(s, T, tol=1e-10) == pytest.approx(moment_closed_form(s, T),
                                                              rel=1e-8, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 80), st.integers(0, 2**32 - 1))
def test_moment_tends_to_diagonal(m, seed):
    s = _random_series(np.random.default_rng(seed), m, 5.0)
    T = 1e4
    w = np.abs(s.coef) / s.nu
    gap = np.abs(s.log_nu[:, None] - s.log_nu[None, :])
    iu = np.triu_indices(len(s), 1)
    envelope = 2 * np.sum((w[:, None] * w[None, :])[iu] * np.minimum(1.0, 1 / (T * gap[iu])))
    assert abs(moment_closed_form(s, T) - diagonal(s)) <= envelope * (1 + 1e-12) + 1e-15


@pytest.fixture(scope="module")
def rational_d():
    return expand_integers(gen_rational_primes(1e5), 1e5)


@pytest.mark.parametrize("t", [1.0, 2.0, 5.0, 20.0])
def test_continuation_reproduces_zeta(rational_d, t):
    v = eval_continuation(rational_d, 1.0, 1000, t)
    ref = oracles.zeta_euler_maclaurin(complex(1, t))
    assert abs(v - ref) < 5e-3
    assert abs(v - complex(mpmath.zeta(complex(1, t)))) < 5e-3


def test_continuation_independent_of_N(rational_d):
    a = eval_continuation(rational_d, 1.0, 1e3, 3.0)
    b = eval_continuation(rational_d, 1.0, 1e4, 3.0)
    c = complex(continuation_fast(rational_d, 1.0, 3.0))
    assert abs(a - b) < 1e-10 and abs(a - c) < 1e-10
    mean = eval_continuation(rational_d, 1.0, 1e3, 3.0, tail_model="mean")
    assert abs(mean - a) < pointwise_envelope(3.0, 1e3)


def test_continuation_domain(rational_d):
    with pytest.raises(DomainError):
        eval_continuation(rational_d, 1.0, 1e3, 0.5)
    with pytest.raises(DomainError):
        eval_continuation(rational_d, 1.0, 2e5, 2.0)


def test_mean_square_difference_small(rational_d):
    d = rational_d.truncate(3000)
    v, ratio = mean_square_difference(d, 1.0, 100, 30.0)
    assert v > 0 and ratio == pytest.approx(v / lemma_bound(100, 30.0))


def test_fejer_pairs():
    rng = np.random.default_rng(5)
    for T, u in zip(np.exp(rng.uniform(-2, 7, 50)), rng.uniform(-10, 10, 50)):
        assert fejer_pair_check(T, u) <= 1e-10
    assert fejer_pair_check(2.0, 0.0) <= 1e-14
    with pytest.raises(DomainError):
        fejer_pair_check(0.0, 1.0)


def test_rhs_series_tail(rational_d):
    v, tail = rhs_series(rational_d)
    assert v == pytest.approx(oracles.basel_partial_sum(10**5) - 1e-5, abs=1e-9)
    assert tail == pytest.approx(1e-5, rel=1e-6)


def test_schedules():
    assert schedule_T(math.e**2, "logcube") == pytest.approx(8.0)
    assert schedule_T(math.e**2, "logsq_eps", 0.25) == pytest.approx(2**2.25)
    with pytest.raises(DomainError):
        schedule_T(10, "other")


def test_convergence_run_outputs(rational_d):
    d = rational_d.truncate(1e4)
    reps = convergence_run(d, steps=3, quadrature=True)
    assert [r.N for r in reps] == pytest.approx([100, 1000, 10000])
    for r in reps:
        assert r.quadrature == pytest.approx(r.closed_form, rel=1e-7)
    assert reports_csv(reps, with_time=False) == reports_csv(convergence_run(d, steps=3, quadrature=True),
                                                            with_time=False)
    assert '"wall_time"' not in reports_json(reps, with_time=False)


def test_convergence_polarization(rational_d):
    reps = convergence_run(rational_d.truncate(2e4), steps=2, N_min=100, N_max=1000,
                           polarization=True, rho=1.0)
    assert all(r.polarization_bound is not None and r.polarization_bound > 0 for r in reps)

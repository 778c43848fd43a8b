from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from beurling_lab.expansion import (CoefficientSeries, ExpansionBudgetError, TooManyIndicesError,
                                    brute_force_integers, dirichlet_multiply, euler_product,
                                    expand_integers, expand_reciprocal, merge_grid,
                                    selberg_series, selberg_truncation, shift_series,
                                    unit_series)
from beurling_lab.geodesic import geodesic_system
from beurling_lab.primes import DomainError, gen_rational_primes, system_from_values

import oracles


def test_rational_d_and_e_are_ones_and_mobius():
    system = gen_rational_primes(200)
    d = expand_integers(system, 200)
    e = expand_reciprocal(system, 200)
    assert np.allclose(d.nu, np.arange(1, 201))
    assert np.all(d.coef == 1)
    assert e.coef.tolist() == [oracles.mobius(n) for n in range(1, 201)]


def test_two_three_grid():
    s = system_from_values([2, 3])
    d = expand_integers(s, 20)
    assert np.allclose(d.nu, [1, 2, 3, 4, 6, 8, 9, 12, 16, 18])


def test_multiplicity_counts_vectors():
    s = system_from_values([2.5, 2.5, 7.0])
    d = expand_integers(s, 50)
    assert d.coefficient_at(2.5) == 2
    assert d.coefficient_at(6.25) == 3
    e = expand_reciprocal(s, 50)
    assert e.coefficient_at(2.5) == -2
    assert e.coefficient_at(6.25) == 1
    assert e.coefficient_at(17.5) == 2


def test_geodesic_ruelle_example():
    g = geodesic_system(14)
    b = expand_reciprocal(g, 14, tag="ruelle_b")
    c = expand_integers(g, 14, tag="ruelle_c")
    assert b.coefficient_at(13.928203230275509) == -2
    assert c.coefficient_at(13.928203230275509) == 2


def test_geodesic_coincident_norms_merge():
    # N(P3)^2 equals the norm of the primitive trace-7 classes
    g = geodesic_system(47)
    d = expand_integers(g, 47)
    assert d.coefficient_at(46.978713763747791) == 3
    ref = brute_force_integers(g, 47)
    assert np.array_equal(d.coef, ref.coef)


def test_budget_error_has_partial():
    with pytest.raises(ExpansionBudgetError) as info:
        expand_integers(gen_rational_primes(1000), 1000, max_entries=50)
    assert info.value.partial_result
    assert info.value.partial is not None


def test_oracle_index_limit():
    with pytest.raises(TooManyIndicesError):
        brute_force_integers(gen_rational_primes(100), 100)


def test_direct_oracle_agrees_with_heap():
    primes = [2.2, 3.7, 3.7, 5.1, 9.0]
    ref = oracles.direct_generalized_integers(primes, 300)
    d = expand_integers(system_from_values(primes), 300)
    assert d.coef.sum() == len(ref)


def test_merge_grid():
    lg, cf = merge_grid(np.array([0.0, 1.0, 1.0 + 1e-12, 2.0]), np.array([1.0, 2.0, 3.0, 4.0]), 1e-9)
    assert lg.tolist() == [0.0, 1.0, 2.0]
    assert cf.tolist() == [1.0, 5.0, 4.0]


def test_series_validation():
    with pytest.raises(DomainError):
        CoefficientSeries(np.array([0.0, 0.0]), np.array([1.0, 1.0]), 2.0)
    with pytest.raises(DomainError):
        CoefficientSeries(np.array([0.5]), np.array([1.0]), 2.0, tag="d")
    with pytest.raises(DomainError):
        CoefficientSeries(np.array([0.0]), np.array([1.0]), 2.0, tag="x")


def test_series_json_round_trip():
    g = geodesic_system(1e3)
    b, _ = selberg_series(g, 1e3)
    back = CoefficientSeries.from_json(b.to_json())
    assert np.array_equal(back.log_nu, b.log_nu)
    assert np.array_equal(back.coef, b.coef)
    assert back.tag == "selberg_b" and back.meta == b.meta


def test_truncate_and_shift():
    d = expand_integers(gen_rational_primes(100), 100)
    t = d.truncate(10)
    assert len(t) == 10 and t.xmax == 10
    sh = shift_series(d, 1)
    assert np.allclose(sh.coef, 1 / d.nu)
    with pytest.raises(DomainError):
        shift_series(d, -1)


def test_unit_is_multiplicative_identity():
    d = expand_integers(gen_rational_primes(500), 500)
    p = dirichlet_multiply(unit_series(500), d)
    assert np.array_equal(p.coef, d.coef)


def test_dirichlet_multiply_rational_divisor_count():
    d = expand_integers(gen_rational_primes(300), 300)
    dd = dirichlet_multiply(d, d)
    tau = [sum(1 for k in range(1, n + 1) if n % k == 0) for n in range(1, 301)]
    assert dd.coef.tolist() == tau


def test_euler_product_matches_series():
    s = system_from_values([2.0, 3.0, 5.0])
    d = expand_integers(s, 1e6)
    approx = float(np.sum(d.coef * d.nu**-2.0))
    assert approx == pytest.approx(euler_product(s, 2.0), rel=1e-5)


def test_selberg_truncation_rule():
    assert selberg_truncation(2.0, 1e-3) == 9      # 2^-10 <= 1e-3 < 2^-9
    assert selberg_truncation(2.0, 0.6) == 0
    assert selberg_truncation(6.85, 1e-12) == 14


@pytest.mark.parametrize("K", [5, 10, 20])
def test_single_prime_selberg_matches_polynomial_oracle(K):
    s = system_from_values([2.0], xmax=2.0)
    b, c = selberg_series(s, 8.0, K=K)
    ref_b = oracles.single_prime_selberg(2.0, K)
    ref_c = oracles.single_prime_selberg(2.0, K, reciprocal=True)
    for m in (1, 2, 3):
        assert b.coefficient_at(2.0**m) == pytest.approx(ref_b.get(m, 0.0), abs=1e-12)
        assert c.coefficient_at(2.0**m) == pytest.approx(ref_c[m], abs=1e-12)


def test_selberg_k0_is_ruelle():
    g = geodesic_system(500)
    b, c = selberg_series(g, 500, K=0)
    assert np.array_equal(b.coef, expand_reciprocal(g, 500).coef)
    assert np.array_equal(c.coef, expand_integers(g, 500).coef)


def test_selberg_b_times_c_is_identity():
    g = geodesic_system(2000)
    b, c = selberg_series(g, 2000)
    p = dirichlet_multiply(b, c)
    assert abs(p.coef[0] - 1) < 1e-12
    assert np.max(np.abs(p.coef[1:])) < 1e-9


systems = st.lists(st.tuples(st.floats(1.2, 30.0), st.integers(1, 2)), min_size=1, max_size=6)


def _system(pairs):
    vals = [v for v, m in pairs for _ in range(m)]
    return system_from_values(vals, xmax=30.0)


@settings(max_examples=40, deadline=None)
@given(systems, st.floats(2.0, 500.0))
def test_heap_equals_brute_force(pairs, xmax):
    s = _system(pairs)
    for recip in (False, True):
        fast = (expand_reciprocal if recip else expand_integers)(s, xmax)
        slow = brute_force_integers(s, xmax, reciprocal=recip)
        assert np.array_equal(fast.coef, slow.coef)
        assert np.allclose(fast.log_nu, slow.log_nu, rtol=0, atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(systems, st.floats(2.0, 2000.0))
def test_dominance_and_inversion(pairs, xmax):
    s = _system(pairs)
    d = expand_integers(s, xmax)
    e = expand_reciprocal(s, xmax)
    assert np.all(np.abs(e.coef) <= d.coef)
    p = dirichlet_multiply(d, e)
    assert p.coef[0] == 1
    assert np.all(np.abs(p.coef[1:]) <= 1e-9)
    assert d.nu[0] == 1 and np.all(np.diff(d.log_nu) > 0)

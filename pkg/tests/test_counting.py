from __future__ import annotations

import math

import numpy as np
import pytest

from beurling_lab.counting import (E_E, counting_function, fit_density, residual_report,
                                   supply_density)
from beurling_lab.expansion import expand_integers, expand_reciprocal
from beurling_lab.primes import DomainError, OutOfRangeError, gen_rational_primes

import oracles


@pytest.fixture(scope="module")
def rational():
    s = gen_rational_primes(1e4)
    return expand_integers(s, 1e4), expand_reciprocal(s, 1e4)


def test_counting_is_floor(rational):
    d, _ = rational
    cf = counting_function(d)
    x = np.array([1.0, 1.5, 10.0, 10.5, 9999.9])
    assert cf(x).tolist() == [1.0, 1.0, 10.0, 10.0, 9999.0]
    assert cf(0.5) == 0.0
    with pytest.raises(OutOfRangeError):
        cf(2e4)


def test_mertens_values(rational):
    _, e = rational
    cf = counting_function(e)
    for x in (10, 100, 1000):
        assert cf(x) == sum(oracles.mobius(n) for n in range(1, x + 1))


def test_fit_density(rational):
    d, _ = rational
    cf = counting_function(d)
    assert fit_density(cf, (10, 1e4)) == pytest.approx(1.0, abs=1e-2)
    assert fit_density(cf, (10, 1e4), method="endpoint") == 1.0
    with pytest.raises(DomainError):
        fit_density(cf, (1, 10))


def test_window_mean_residual(rational):
    d, _ = rational
    cf = counting_function(d)
    supply_density(cf, 1.0)
    # floor(x) - x averages to -1/2 over whole integer windows
    assert cf.window_mean_residual(100, 200) == pytest.approx(-0.5, abs=1e-12)


def test_residual_report(rational):
    d, e = rational
    cf = counting_function(e)
    supply_density(cf, 0.0)
    rep = residual_report(cf, points=50)
    assert rep.grid[0] == pytest.approx(E_E)
    assert rep.sup_normalized > 0 and math.isfinite(rep.best_fit_c)
    assert rep.to_csv().splitlines()[0] == "x,R,normalized_log_power,normalized_exp_sqrt"
    with pytest.raises(DomainError):
        residual_report(cf, epsilon=0)
    with pytest.raises(DomainError):
        residual_report(cf, grid=[2.0])
    with pytest.raises(DomainError):
        residual_report(counting_function(d))

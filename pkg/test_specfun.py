"""
Tests for the special-function kernels and the Prabhakar function
"""
import math

import mpmath as mp
import numpy as np
import pytest
from scipy import integrate, special

from pdtp.counting import ct_state_prob
from pdtp.errors import DomainError
from pdtp.models import CtParams, NumericsSettings
from pdtp.specfun import (
    log_gamma_signed,
    pochhammer_log,
    pochhammer_log_array,
    prabhakar_E,
    prabhakar_E_mp,
    prabhakar_density,
    rising_log,
    sum_log_series,
)


@pytest.mark.parametrize("x, expected, sign", [
    (5.0, math.log(24.0), 1),
    (0.5, 0.5 * math.log(math.pi), 1),
    (-0.5, math.log(2.0 * math.sqrt(math.pi)), -1),
    (-1.5, math.log(4.0 * math.sqrt(math.pi) / 3.0), 1),
])
def test_log_gamma_signed_values(x, expected, sign):
    log_abs, s = log_gamma_signed(x)
    assert s == sign
    assert log_abs == pytest.approx(expected, rel=1e-14, abs=1e-14)


@pytest.mark.parametrize("x", [0.0, -1.0, -3.0])
def test_log_gamma_poles(x):
    assert log_gamma_signed(x) == (math.inf, 0)


@pytest.mark.parametrize("x", [math.nan, math.inf, -math.inf])
def test_log_gamma_rejects_non_finite(x):
    with pytest.raises(DomainError):
        log_gamma_signed(x)


@pytest.mark.parametrize("c, m, expected", [
    (0.5, 3, 1.875),
    (-2.5, 3, -1.875),
    (-2.0, 2, 2.0),
    (4.0, 1, 4.0),
])
def test_pochhammer_values(c, m, expected):
    log_abs, sign = pochhammer_log(c, m)
    assert sign * math.exp(log_abs) == pytest.approx(expected, rel=1e-13)


def test_pochhammer_edge_cases():
    assert pochhammer_log(0.0, 3) == (-math.inf, 0)
    assert pochhammer_log(-2.0, 3) == (-math.inf, 0)
    assert pochhammer_log(7.3, 0) == (0.0, 1)
    assert pochhammer_log(0.0, 0) == (0.0, 1)
    with pytest.raises(DomainError):
        pochhammer_log(1.0, -1)
    with pytest.raises(DomainError):
        pochhammer_log(math.nan, 2)


def test_pochhammer_array_matches_scalar():
    c = np.array([0.3, -1.0, -2.5, 4.0])
    m = np.array([5, 3, 4, 2])
    log_abs, sign = pochhammer_log_array(c, m)
    for i in range(c.size):
        expected = pochhammer_log(c[i], int(m[i]))
        assert sign[i] == expected[1]
        if expected[1] != 0:
            assert log_abs[i] == pytest.approx(expected[0], rel=1e-13, abs=1e-13)


def test_rising_log_switches_to_log_gamma_consistently():
    x = np.array([0.25, 1.5, 3.0])
    for j in (10, 64, 65, 120):
        log_abs, sign = rising_log(x, j)
        ref = np.array([float(mp.log(mp.rf(v, j))) for v in x])
        np.testing.assert_allclose(log_abs, ref, rtol=1e-12)
        assert np.all(sign == 1)


def test_sum_log_series_geometric():
    def block(m):
        return m * math.log(0.5), np.ones(m.size, dtype=int), np.abs(m * math.log(0.5))

    result = sum_log_series(block, tol=1e-15, relative=True, abs_tol=1e-13)
    assert result.converged
    assert result.value == pytest.approx(2.0, abs=1e-14)
    assert result.est_abs_error < 1e-13


def test_sum_log_series_term_cap_is_reported():
    def block(m):
        return m * math.log(0.99), np.ones(m.size, dtype=int), np.zeros(m.size)

    result = sum_log_series(block, tol=1e-15, relative=True, settings=NumericsSettings(max_terms=10))
    assert not result.converged


@pytest.mark.parametrize("a, b, c", [(0.5, 1.0, 1.0), (0.7, 2.3, 1.754), (1.0, 0.5, 3.0)])
def test_prabhakar_at_zero(a, b, c):
    result = prabhakar_E(a, b, c, 0.0)
    assert result.converged
    assert result.value == pytest.approx(1.0 / math.gamma(b), rel=1e-14)


@pytest.mark.parametrize("z", np.linspace(-5.0, 0.0, 11))
def test_prabhakar_reduces_to_exponential(z):
    tol = 1e-12
    result = prabhakar_E(1.0, 1.0, 1.0, z, tol=tol)
    assert result.converged
    assert abs(result.value - math.exp(z)) <= 10 * tol


@pytest.mark.parametrize("a, b, c, z", [
    (0.5, 0.25, 0.5, -1.0),
    (0.5, 1.0, 1.0, -2.0),
    (0.57, 1.0, 1.754, -3.0),
    (0.9, 1.5, 2.0, 1.5),
])
def test_prabhakar_matches_high_precision(a, b, c, z):
    result = prabhakar_E(a, b, c, z)
    assert result.converged
    assert abs(result.value - float(prabhakar_E_mp(a, b, c, z))) <= 1e-11


def test_prabhakar_error_never_grows_when_tol_shrinks():
    reference = float(prabhakar_E_mp(0.5, 1.0, 1.0, -2.0))
    errors = []
    for tol in (1e-4, 1e-6, 1e-8, 1e-10):
        result = prabhakar_E(0.5, 1.0, 1.0, -2.0, tol=tol)
        assert result.converged
        errors.append(abs(result.value - reference))
    for coarse, fine in zip(errors, errors[1:]):
        assert fine <= coarse + 1e-15


def test_prabhakar_flags_cancellation_without_extended_precision():
    settings = NumericsSettings(extended_precision=False)
    result = prabhakar_E(1.0, 1.0, 1.0, -40.0, settings=settings)
    assert not result.converged
    assert result.cancellation_digits > 8


def test_prabhakar_extended_precision_recovers_cancellation():
    result = prabhakar_E(1.0, 1.0, 1.0, -40.0)
    assert result.converged
    assert result.precision.startswith("mp")
    assert abs(result.value - math.exp(-40.0)) <= 1e-12


def test_prabhakar_polynomial_case():
    # (c)_m vanishes for m > 2: 1 - 2z + z^2/2
    result = prabhakar_E(1.0, 1.0, -2.0, 3.0)
    assert result.converged
    assert result.value == pytest.approx(-0.5, abs=1e-13)


@pytest.mark.parametrize("a, b", [(0.0, 1.0), (1.0, -1.0)])
def test_prabhakar_domain(a, b):
    with pytest.raises(DomainError):
        prabhakar_E(a, b, 1.0, -1.0)


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0, 4.0])
def test_density_exponential_case(t):
    density = prabhakar_density(CtParams(alpha=1.0, nu=1.0, xi0=1.0), t)
    assert density.converged
    assert density.value == pytest.approx(math.exp(-t), abs=1e-11)


@pytest.mark.parametrize("t", [0.5, 2.0, 6.0])
def test_density_erlang_case(t):
    density = prabhakar_density(CtParams(alpha=1.0, nu=2.0, xi0=1.0), t)
    assert density.value == pytest.approx(t * math.exp(-t), abs=1e-11)


def test_density_mittag_leffler_case():
    # nu = 1: t^(alpha-1) E_{alpha,alpha}(-t^alpha)
    t, alpha = 1.3, 0.6
    density = prabhakar_density(CtParams(alpha=alpha, nu=1.0, xi0=1.0), t)
    expected = t ** (alpha - 1.0) * float(prabhakar_E_mp(alpha, alpha, 1.0, -t ** alpha))
    assert density.value == pytest.approx(expected, abs=1e-11)


@pytest.mark.parametrize("t", [0.0, -1.0, math.inf])
def test_density_domain(t):
    with pytest.raises(DomainError):
        prabhakar_density(CtParams(alpha=0.5, nu=1.0, xi0=1.0), t)


def _density_integral(ct, T, points=2000):
    # trapezoid in log t from 1e-8 plus the leading small-t term of the head
    grid = np.logspace(-8.0, math.log10(T), points)
    values = np.array([prabhakar_density(ct, t).value for t in grid])
    head_t = grid[0]
    head = (ct.xi0 ** ct.nu) * head_t ** (ct.nu * ct.alpha) / special.gamma(ct.nu * ct.alpha + 1.0)
    return head + integrate.trapezoid(values * grid, np.log(grid))


@pytest.mark.slow
def test_density_integrates_to_the_exponential_law():
    ct = CtParams(alpha=1.0, nu=1.0, xi0=1.0)
    short = _density_integral(ct, 5.0)
    long = _density_integral(ct, 20.0)
    assert short == pytest.approx(1.0 - math.exp(-5.0), abs=1e-4)
    assert long == pytest.approx(1.0 - math.exp(-20.0), abs=1e-4)
    assert short < long
    assert abs(long - 1.0) <= 1e-4


@pytest.mark.slow
def test_density_integrates_to_the_arrival_probability():
    ct = CtParams(alpha=0.5, nu=0.5, xi0=1.0)
    assert _density_integral(ct, 10.0) == pytest.approx(1.0 - ct_state_prob(ct, 0, 10.0), abs=1e-4)


def test_density_small_time_converges():
    density = prabhakar_density(CtParams(alpha=0.5, nu=0.5, xi0=1.0), 1e-8)
    expected = 1e-8 ** -0.75 / math.gamma(0.25)
    assert density.value == pytest.approx(expected, rel=1e-3)

"""
Tests for truncated power series and the generating-function oracle
"""
import math

import numpy as np
import pytest

from pdtp.errors import DomainError
from pdtp.models import PdtpParams
from pdtp.powerseries import (
    TruncatedSeries,
    binomial_series,
    oracle_length_for,
    oracle_state_distribution,
    phi_coeffs,
    series_mul,
    series_real_power,
    state_prob_coeffs,
    survival_coeffs,
    theta_coeffs,
)

PARAMS = [
    PdtpParams(alpha=0.5, nu=0.5, xi=0.5),
    PdtpParams(alpha=0.57, nu=1.754, xi=2.0),
    PdtpParams(alpha=1.0, nu=1.0, xi=1.0),
    PdtpParams(alpha=0.3, nu=2.5, xi=0.25),
]


@pytest.mark.parametrize("alpha, length, expected", [
    (1.0, 3, [1.0, -1.0, 0.0]),
    (0.5, 4, [1.0, -0.5, -0.125, -0.0625]),
    (0.0, 2, [1.0, 0.0]),
    (2.0, 4, [1.0, -2.0, 1.0, 0.0]),
])
def test_binomial_series(alpha, length, expected):
    np.testing.assert_allclose(binomial_series(alpha, length).to_numpy(), expected, atol=1e-15)


def test_series_mul_examples():
    a = TruncatedSeries([1.0, 1.0, 0.0])
    np.testing.assert_array_equal(series_mul(a, a).to_numpy(), [1.0, 2.0, 1.0])

    s = TruncatedSeries([0.3, -1.2, 4.0, 0.5])
    np.testing.assert_array_equal(series_mul(s, TruncatedSeries.unit(4)).to_numpy(), s.to_numpy())

    q = 0.25
    one_minus_u = TruncatedSeries([1.0, -1.0, 0.0, 0.0])
    product = series_mul(TruncatedSeries.geometric(q, 4), one_minus_u)
    np.testing.assert_allclose(product.to_numpy(), [1.0, q - 1.0, q ** 2 - q, q ** 3 - q ** 2], atol=1e-16)


def test_series_length_mismatch():
    with pytest.raises(DomainError):
        series_mul(TruncatedSeries.unit(3), TruncatedSeries.unit(4))


@pytest.mark.parametrize("rho, expected", [
    (-1.0, [1.0] * 6),
    (0.5, binomial_series(0.5, 6).to_numpy()),
    (1.0, [1.0, -1.0, 0.0, 0.0, 0.0, 0.0]),
    (2.0, [1.0, -2.0, 1.0, 0.0, 0.0, 0.0]),
])
def test_series_real_power_examples(rho, expected):
    s = TruncatedSeries([1.0, -1.0, 0.0, 0.0, 0.0, 0.0])
    np.testing.assert_allclose(series_real_power(s, rho).to_numpy(), expected, atol=1e-15)


@pytest.mark.parametrize("rho", [0.5, 2.0, -1.0, -1.754])
def test_series_real_power_round_trip(rho):
    rng = np.random.default_rng(11)
    coeffs = 0.1 * rng.uniform(-1.0, 1.0, 16) * 0.5 ** np.arange(16)
    coeffs[0] = 1.0
    s = TruncatedSeries(coeffs)
    back = series_real_power(series_real_power(s, rho), 1.0 / rho)
    np.testing.assert_allclose(back.to_numpy(), coeffs, atol=1e-12)


def test_series_real_power_needs_constant_term():
    with pytest.raises(DomainError):
        series_real_power(TruncatedSeries([0.0, 1.0, 2.0]), 0.5)


def test_phi_geometric_case():
    phi = phi_coeffs(PdtpParams(alpha=1.0, nu=1.0, xi=1.0), 40).to_numpy()
    np.testing.assert_allclose(phi, 0.5 ** (np.arange(40) + 1.0), rtol=1e-14)


@pytest.mark.parametrize("p", PARAMS)
def test_phi_is_a_subprobability(p):
    phi = phi_coeffs(p, 200).to_numpy()
    assert phi[0] == pytest.approx((p.xi / (1.0 + p.xi)) ** p.nu, rel=1e-14)
    assert np.all(phi >= 0)
    partial = np.cumsum(phi)
    assert np.all(np.diff(partial) >= 0)
    assert partial[-1] <= 1.0 + 1e-14


@pytest.mark.parametrize("p", PARAMS)
def test_theta_is_shifted_phi(p):
    phi = phi_coeffs(p, 32).to_numpy()
    theta = theta_coeffs(p, length=32).to_numpy()
    assert theta[0] == 0.0
    np.testing.assert_array_equal(theta[1:], phi[:-1])


def test_theta_with_custom_prefactor():
    p = PdtpParams(alpha=0.5, nu=1.0, xi=0.5)
    f = TruncatedSeries([0.0, 0.5, 0.5] + [0.0] * 29)
    theta = theta_coeffs(p, f=f)
    np.testing.assert_allclose(theta.to_numpy(), series_mul(f, phi_coeffs(p, 32)).to_numpy(), atol=1e-16)
    assert theta[1] == pytest.approx(0.5 * phi_coeffs(p, 32)[0])


@pytest.mark.parametrize("coeffs", [[0.2, 0.8, 0.0], [0.0, 1.2, -0.2]])
def test_theta_rejects_bad_prefactor(coeffs):
    with pytest.raises(DomainError):
        theta_coeffs(PdtpParams(alpha=0.5, nu=1.0, xi=0.5), f=TruncatedSeries(coeffs))


def test_state_prob_coeffs_examples():
    p = PdtpParams(alpha=1.0, nu=1.0, xi=1.0)
    assert state_prob_coeffs(p, 0, 8)[0] == 1.0
    assert state_prob_coeffs(p, 1, 8)[2] == pytest.approx(0.5, abs=1e-15)
    assert state_prob_coeffs(p, 2, 8)[1] == 0.0

    q = PdtpParams(alpha=0.5, nu=0.5, xi=0.5)
    for n in range(1, 6):
        assert state_prob_coeffs(q, n, 8)[n] == pytest.approx((q.xi / (1.0 + q.xi)) ** (n * q.nu), rel=1e-13)


@pytest.mark.parametrize("p", PARAMS)
def test_renewal_factorization(p):
    length = 64
    theta = theta_coeffs(p, length=length)
    previous = state_prob_coeffs(p, 0, length)
    np.testing.assert_allclose(previous.to_numpy(), survival_coeffs(p, length).to_numpy(), atol=1e-15)
    for n in range(1, 5):
        current = state_prob_coeffs(p, n, length)
        np.testing.assert_allclose(current.to_numpy(), series_mul(theta, previous).to_numpy(), atol=1e-12)
        previous = current


@pytest.mark.parametrize("p", PARAMS)
def test_state_probabilities_are_complete(p):
    length = 48
    total = np.zeros(length)
    for n in range(length):
        total += state_prob_coeffs(p, n, length).to_numpy()
    np.testing.assert_allclose(total, np.ones(length), atol=1e-12)


def test_survival_matches_pmf_sums():
    p = PdtpParams(alpha=0.5, nu=0.5, xi=0.5)
    theta = theta_coeffs(p, length=100).to_numpy()
    survival = survival_coeffs(p, 100).to_numpy()
    np.testing.assert_allclose(survival, 1.0 - np.cumsum(theta), atol=1e-14)


def test_oracle_distribution_sums_to_one():
    p = PdtpParams(alpha=0.5, nu=0.5, xi=1.0)
    dist = oracle_state_distribution(p, 40)
    assert dist.shape == (41,)
    assert math.fsum(dist) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(dist[:5], [state_prob_coeffs(p, n, 128)[40] for n in range(5)], atol=1e-13)


def test_oracle_length_doubles_and_caps():
    assert oracle_length_for(0) == 128
    assert oracle_length_for(127) == 128
    assert oracle_length_for(128) == 256
    assert oracle_length_for(4095) == 4096
    with pytest.raises(DomainError):
        oracle_length_for(4096)

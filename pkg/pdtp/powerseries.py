"""
Power Series Module
Truncated formal power series and the generating-function oracle for the counting process
"""
import math
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Union

import numpy as np

from .errors import DomainError
from .models import NumericsSettings, PdtpParams, resolve_settings
from .utils import neumaier_cumsum

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TruncatedSeries:
    """Coefficients c_0..c_{L-1} of a power series in u, truncated at length L"""
    coeffs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.coeffs, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise DomainError("a truncated series needs at least one coefficient")
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    # --- constructors ---
    @classmethod
    def zeros(cls, length: int) -> "TruncatedSeries":
        return cls(np.zeros(length))

    @classmethod
    def unit(cls, length: int) -> "TruncatedSeries":
        return cls.monomial(0, length)

    @classmethod
    def monomial(cls, k: int, length: int) -> "TruncatedSeries":
        c = np.zeros(length)
        if k < length:
            c[k] = 1.0
        return cls(c)

    @classmethod
    def geometric(cls, q: float, length: int) -> "TruncatedSeries":
        return cls(float(q) ** np.arange(length))

    # --- container protocol ---
    @property
    def length(self) -> int:
        return int(self.coeffs.size)

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, key):
        return self.coeffs[key]

    def to_numpy(self) -> np.ndarray:
        return self.coeffs.copy()

    def truncate(self, length: int) -> "TruncatedSeries":
        """Cut or zero-pad to the given length"""
        c = np.zeros(length)
        k = min(length, self.length)
        c[:k] = self.coeffs[:k]
        return TruncatedSeries(c)

    # --- arithmetic ---
    def _check(self, other: "TruncatedSeries"):
        if other.length != self.length:
            raise DomainError(
                f"series lengths differ ({self.length} vs {other.length})",
                left=self.length,
                right=other.length,
            )

    def __add__(self, other: Union["TruncatedSeries", float]) -> "TruncatedSeries":
        if isinstance(other, TruncatedSeries):
            self._check(other)
            return TruncatedSeries(self.coeffs + other.coeffs)
        c = self.coeffs.copy()
        c[0] += float(other)
        return TruncatedSeries(c)

    __radd__ = __add__

    def __neg__(self) -> "TruncatedSeries":
        return TruncatedSeries(-self.coeffs)

    def __sub__(self, other: Union["TruncatedSeries", float]) -> "TruncatedSeries":
        return self + (-other)

    def __rsub__(self, other: float) -> "TruncatedSeries":
        return (-self) + other

    def scale(self, factor: float) -> "TruncatedSeries":
        return TruncatedSeries(self.coeffs * float(factor))

    def __mul__(self, other: Union["TruncatedSeries", float]) -> "TruncatedSeries":
        if isinstance(other, TruncatedSeries):
            return series_mul(self, other)
        return self.scale(other)

    __rmul__ = __mul__

    def shift(self, k: int) -> "TruncatedSeries":
        """Multiply by u^k, keeping the length"""
        if k < 0:
            raise DomainError(f"shift must be nonnegative, got {k}")
        c = np.zeros(self.length)
        if k < self.length:
            c[k:] = self.coeffs[: self.length - k]
        return TruncatedSeries(c)

    def __repr__(self) -> str:
        head = ", ".join(f"{v:.6g}" for v in self.coeffs[:6])
        more = ", ..." if self.length > 6 else ""
        return f"TruncatedSeries(L={self.length}, [{head}{more}])"


def _check_length(length: int):
    if int(length) != length or length < 1:
        raise DomainError(f"series length must be a positive integer, got {length!r}", length=length)


def binomial_series(alpha: float, length: int) -> TruncatedSeries:
    """
    Coefficients of (1-u)^alpha, i.e. (-1)^k C(alpha, k)

    Args:
        alpha: Real exponent
        length: Number of coefficients L

    Returns:
        TruncatedSeries of length L
    """
    _check_length(length)
    c = np.empty(length)
    c[0] = 1.0
    for k in range(1, length):
        c[k] = c[k - 1] * (k - 1 - alpha) / k
    return TruncatedSeries(c)


def series_mul(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    """
    Truncated Cauchy product with exactly-rounded coefficient sums

    Args:
        a: Left factor
        b: Right factor of the same length

    Returns:
        TruncatedSeries of the common length
    """
    a._check(b)
    x, y = a.coeffs, b.coeffs
    out = np.empty(a.length)
    for k in range(a.length):
        out[k] = math.fsum(x[: k + 1] * y[k::-1])
    return TruncatedSeries(out)


def series_real_power(s: TruncatedSeries, rho: float) -> TruncatedSeries:
    """
    Coefficients of s(u)^rho by the first-order recurrence from s p' = rho s' p

    Args:
        s: Series with nonzero constant term
        rho: Real exponent

    Returns:
        TruncatedSeries of the same length
    """
    c = s.coeffs
    s0 = float(c[0])
    if s0 == 0.0:
        raise DomainError("real power needs a nonzero constant term")
    if s0 < 0 and rho != math.floor(rho):
        raise DomainError(f"non-integer power {rho} of a series with negative constant term", rho=rho)
    length = s.length
    p = np.empty(length)
    p[0] = s0 ** rho
    for k in range(1, length):
        j = np.arange(1, k + 1)
        weights = (rho * j - (k - j)) * c[1 : k + 1]
        p[k] = math.fsum(weights * p[k - 1 :: -1][:k]) / (k * s0)
    return TruncatedSeries(p)


def unit_prefactor(length: int) -> TruncatedSeries:
    """The default prefactor f(u) = u (unit shift of the waiting time)"""
    _check_length(length)
    return TruncatedSeries.monomial(1, length)


@lru_cache(maxsize=256)
def _phi_cached(params: PdtpParams, length: int, nu: float) -> TruncatedSeries:
    if nu == 0.0:
        return TruncatedSeries.unit(length)
    base = binomial_series(params.alpha, length) + params.xi
    return series_real_power(base, -nu).scale(params.xi ** nu)


def phi_coeffs(p: PdtpParams, length: int, nu_override: Optional[float] = None) -> TruncatedSeries:
    """
    Coefficients of xi^nu / (xi + (1-u)^alpha)^nu

    Args:
        p: Process parameters
        length: Number of coefficients L
        nu_override: Exponent to use instead of p.nu (n*nu for the n-fold law)

    Returns:
        TruncatedSeries whose k-th coefficient is phi(k)
    """
    _check_length(length)
    nu = p.nu if nu_override is None else float(nu_override)
    if nu < 0:
        raise DomainError(f"exponent must be nonnegative, got {nu}", nu=nu)
    return _phi_cached(p, int(length), nu)


def theta_coeffs(
    p: PdtpParams,
    f: Optional[TruncatedSeries] = None,
    length: Optional[int] = None
) -> TruncatedSeries:
    """
    Inter-arrival pmf coefficients f(u) * phi(u)

    Args:
        p: Process parameters
        f: Prefactor series with zero constant term (u by default)
        length: Number of coefficients (defaults to len(f))

    Returns:
        TruncatedSeries of theta(t)
    """
    if f is None and length is None:
        raise DomainError("theta_coeffs needs a prefactor or a length")
    length = f.length if length is None else length
    _check_length(length)
    if f is None:
        return phi_coeffs(p, length).shift(1)
    f = f.truncate(length)
    if f[0] != 0.0:
        raise DomainError(
            f"prefactor must vanish at u=0 (zero waiting times are excluded), got f[0]={f[0]!r}",
            f0=float(f[0]),
        )
    if np.any(f.coeffs < 0):
        raise DomainError("prefactor coefficients must be nonnegative")
    mass = math.fsum(f.coeffs)
    if abs(mass - 1.0) > 1e-9:
        logger.debug(f"prefactor mass within the truncation is {mass:.12g}")
    return series_mul(f, phi_coeffs(p, length))


@lru_cache(maxsize=64)
def _survival_cached(params: PdtpParams, length: int) -> TruncatedSeries:
    phi = phi_coeffs(params, length).coeffs
    out = np.empty(length)
    out[0] = 1.0
    if length > 1:
        out[1:] = 1.0 - neumaier_cumsum(phi[: length - 1])
    return TruncatedSeries(out)


def survival_coeffs(p: PdtpParams, length: int) -> TruncatedSeries:
    """
    Coefficients of (1 - u phi(u)) / (1 - u): the no-arrival probability Phi^(0)(t)

    Args:
        p: Process parameters
        length: Number of coefficients L

    Returns:
        TruncatedSeries with S(t) = 1 - sum_{k<=t} theta(k)
    """
    _check_length(length)
    return _survival_cached(p, int(length))


def state_prob_coeffs(p: PdtpParams, n: int, length: int) -> TruncatedSeries:
    """
    Coefficients of the state generating function S(u) u^n phi^(n nu)(u)

    Args:
        p: Process parameters
        n: Number of arrivals
        length: Number of coefficients L

    Returns:
        TruncatedSeries whose t-th coefficient is Phi^(n)(t)
    """
    _check_length(length)
    if int(n) != n or n < 0:
        raise DomainError(f"state index must be a nonnegative integer, got {n!r}", n=n)
    if n >= length:
        return TruncatedSeries.zeros(length)
    arrivals = phi_coeffs(p, length, nu_override=n * p.nu).shift(n)
    return series_mul(survival_coeffs(p, length), arrivals)


# --- Oracle entry points used by the routing layer ---

def oracle_length_for(t: int, settings: Optional[NumericsSettings] = None) -> int:
    """Smallest cached length (oracle_length doubled) covering index t"""
    settings = resolve_settings(settings)
    if t + 1 > settings.oracle_max_length:
        raise DomainError(
            f"t={t} is beyond the oracle length cap {settings.oracle_max_length}",
            t=t,
            oracle_max_length=settings.oracle_max_length,
        )
    length = settings.oracle_length
    while length < t + 1:
        length *= 2
    return min(length, settings.oracle_max_length)


def oracle_interarrival_pmf(p: PdtpParams, t: int, settings: Optional[NumericsSettings] = None) -> float:
    if t <= 0:
        return 0.0
    return float(phi_coeffs(p, oracle_length_for(t - 1, settings))[t - 1])


def oracle_state_prob(p: PdtpParams, n: int, t: int, settings: Optional[NumericsSettings] = None) -> float:
    if t < n:
        return 0.0
    if n == 0:
        return float(survival_coeffs(p, oracle_length_for(t, settings))[t])
    return float(state_prob_coeffs(p, n, oracle_length_for(t, settings))[t])


@lru_cache(maxsize=64)
def _renewal_column(params: PdtpParams, t: int, length: int) -> np.ndarray:
    theta = phi_coeffs(params, length).shift(1).truncate(t + 1)
    current = survival_coeffs(params, length).truncate(t + 1)
    column = np.zeros(t + 1)
    column[0] = current[t]
    for n in range(1, t + 1):
        current = series_mul(theta, current)
        column[n] = current[t]
    column.setflags(write=False)
    return column


def oracle_state_distribution(p: PdtpParams, t: int, settings: Optional[NumericsSettings] = None) -> np.ndarray:
    """
    Phi^(n)(t) for n = 0..t through the renewal products theta * Phi^(n-1)

    Returns:
        Array of length t+1
    """
    if t < 0:
        raise DomainError(f"t must be nonnegative, got {t}", t=t)
    return _renewal_column(p, int(t), oracle_length_for(t, settings)).copy()

"""
Special Functions Module
Signed log-gamma, Pochhammer symbols, log-space series drivers and the Prabhakar function
"""
import math
import logging
from dataclasses import dataclass, replace
from typing import Callable, Iterator, List, Optional, Tuple

import mpmath as mp
import numpy as np
from scipy import special

from .errors import DomainError
from .models import CtParams, NumericsSettings, resolve_settings

logger = logging.getLogger(__name__)

EPS = float(np.finfo(float).eps)
LOG_MAX = 709.0
LN10 = math.log(10.0)

# (log_abs, sign, log_scale) for a block of summation indices
BlockFn = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray, np.ndarray]]
TermFactory = Callable[[], Iterator]


@dataclass(frozen=True)
class SeriesEval:
    """Result of a truncated series evaluation with accuracy bookkeeping"""
    value: float
    est_abs_error: float
    terms_used: int
    converged: bool
    abs_sum: float = math.nan
    cancellation_digits: float = 0.0
    precision: str = "double"

    def scaled(self, factor: float) -> "SeriesEval":
        return replace(
            self,
            value=self.value * factor,
            est_abs_error=self.est_abs_error * abs(factor),
            abs_sum=self.abs_sum * abs(factor),
        )


# --- Gamma and Pochhammer kernels ---

def log_gamma_signed(x: float) -> Tuple[float, int]:
    """
    log|Gamma(x)| and the sign of Gamma(x)

    Args:
        x: Finite real argument

    Returns:
        (log_abs, sign); at the poles x = 0, -1, -2, ... returns (inf, 0)
        so that any 1/Gamma factor built from it is exactly zero
    """
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"log-gamma needs a finite argument, got {x!r}", x=x)
    if x <= 0 and x == math.floor(x):
        return math.inf, 0
    return float(special.gammaln(x)), int(special.gammasgn(x))


def log_gamma_signed_array(x) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized log_gamma_signed"""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("log-gamma needs finite arguments")
    pole = (x <= 0) & (x == np.floor(x))
    safe = np.where(pole, 0.5, x)
    log_abs = np.where(pole, np.inf, special.gammaln(safe))
    sign = np.where(pole, 0, special.gammasgn(safe)).astype(int)
    return log_abs, sign


def pochhammer_log_array(c, m) -> Tuple[np.ndarray, np.ndarray]:
    """
    Signed log of the rising factorial (c)_m = Gamma(c+m)/Gamma(c), broadcasting

    Args:
        c: Real base(s)
        m: Nonnegative integer length(s)

    Returns:
        (log_abs, sign) arrays; vanishing symbols come back as (-inf, 0)
    """
    c, m = np.broadcast_arrays(np.asarray(c, dtype=float), np.asarray(m, dtype=float))
    if not (np.all(np.isfinite(c)) and np.all(np.isfinite(m))):
        raise DomainError("Pochhammer symbol needs finite arguments")
    if np.any(m < 0) or np.any(m != np.floor(m)):
        raise DomainError("Pochhammer length must be a nonnegative integer")

    log_abs = np.zeros(c.shape)
    sign = np.ones(c.shape, dtype=int)

    negint = (c <= 0) & (c == np.floor(c))
    vanishes = negint & (m > -c)
    reflected = negint & ~vanishes & (m > 0)
    regular = ~negint & (m > 0)

    if regular.any():
        ln, sn = log_gamma_signed_array(c[regular] + m[regular])
        ld, sd = log_gamma_signed_array(c[regular])
        log_abs[regular] = ln - ld
        sign[regular] = sn * sd
    if reflected.any():
        # (c)_m = (-1)^m Gamma(1-c) / Gamma(1-c-m) for c a nonpositive integer
        cr, mr = c[reflected], m[reflected]
        log_abs[reflected] = special.gammaln(1.0 - cr) - special.gammaln(1.0 - cr - mr)
        sign[reflected] = np.where(mr % 2 == 0, 1, -1)
    log_abs[vanishes] = -np.inf
    sign[vanishes] = 0
    return log_abs, sign


def pochhammer_log(c: float, m: int) -> Tuple[float, int]:
    """
    Signed log of the Pochhammer symbol (c)_m

    Args:
        c: Finite real base
        m: Nonnegative integer

    Returns:
        (log_abs, sign); (c)_0 = 1 exactly, vanishing symbols give (-inf, 0)
    """
    if not math.isfinite(float(c)):
        raise DomainError(f"Pochhammer symbol needs a finite base, got {c!r}", c=c)
    if int(m) != m or m < 0:
        raise DomainError(f"Pochhammer length must be a nonnegative integer, got {m!r}", m=m)
    if m == 0:
        return 0.0, 1
    log_abs, sign = pochhammer_log_array(c, m)
    return float(log_abs), int(sign)


def rising_log(x, j: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Signed log of (x)_j for an array of bases and one length

    Short products are formed factor by factor, longer ones through log-gamma.
    """
    x = np.asarray(x, dtype=float)
    if j == 0:
        return np.zeros(x.shape), np.ones(x.shape, dtype=int)
    if j > 64:
        return pochhammer_log_array(x, j)
    factors = x[..., None] + np.arange(j)
    with np.errstate(divide="ignore"):
        log_abs = np.sum(np.log(np.abs(factors)), axis=-1)
    sign = np.prod(np.sign(factors), axis=-1).astype(int)
    log_abs = np.where(sign == 0, -np.inf, log_abs)
    return log_abs, sign


def rising_mp(x, j: int):
    """(x)_j in the current mpmath precision, exact zeros included"""
    return mp.fprod(x + i for i in range(j))


# --- Series drivers ---

def sum_log_series(
    block: BlockFn,
    *,
    tol: float,
    relative: bool,
    settings: Optional[NumericsSettings] = None,
    abs_tol: Optional[float] = None,
    check_from: int = 0,
    block_size: int = 64
) -> SeriesEval:
    """
    Sum a series from sign-tracked log-space terms in double precision

    The loop stops once three consecutive nonzero terms have decreased and the
    current one is below tol (absolute) or tol*|partial sum| (relative). The
    stopping term is the first neglected one and bounds the truncation error.

    Args:
        block: Callable mapping summation indices to (log_abs, sign, log_scale)
        tol: Stopping tolerance
        relative: Whether tol is relative to the partial sum
        settings: Numeric settings (max terms, cancellation guard)
        abs_tol: Accuracy required to report convergence (defaults from tol)
        check_from: First index at which the stop rule may fire
        block_size: Number of terms evaluated per vectorized block

    Returns:
        SeriesEval with value, error estimate and convergence flag
    """
    settings = resolve_settings(settings)
    max_terms = settings.max_terms

    kept_values: List[np.ndarray] = []
    kept_scales: List[np.ndarray] = []
    partial = 0.0
    last_log = None
    run = 0
    stop_at = None
    neglected = 0.0
    overflow = False
    max_log = -math.inf
    m0 = 0

    while m0 < max_terms and stop_at is None and not overflow:
        m = np.arange(m0, min(m0 + block_size, max_terms))
        log_abs, sign, scale = block(m)
        used = len(m)
        for i in range(len(m)):
            s = int(sign[i])
            if s == 0:
                continue
            la = float(log_abs[i])
            if la > LOG_MAX:
                overflow = True
                max_log = max(max_log, la)
                used = i
                break
            max_log = max(max_log, la)
            if last_log is not None and la < last_log:
                run += 1
            else:
                run = 0
            last_log = la
            if m[i] >= check_from and run >= 3:
                threshold = tol * abs(partial) if relative else tol
                if threshold > 0 and la <= math.log(threshold):
                    stop_at = int(m[i])
                    neglected = math.exp(la)
                    used = i
                    break
            partial += s * math.exp(la)
        values = np.where(sign[:used] == 0, 0.0, sign[:used] * np.exp(np.minimum(log_abs[:used], LOG_MAX)))
        kept_values.append(values)
        # vanishing terms carry an infinite log scale and contribute no roundoff
        kept_scales.append(np.where(sign[:used] == 0, 0.0, np.asarray(scale[:used], dtype=float)))
        m0 += len(m)

    values = np.concatenate(kept_values) if kept_values else np.zeros(0)
    scales = np.concatenate(kept_scales) if kept_scales else np.zeros(0)
    terms_used = max(int(values.size), 1)

    if overflow:
        digits = max_log / LN10 + 16.0
        return SeriesEval(math.nan, math.inf, terms_used, False, math.inf, digits)

    value = math.fsum(values)
    magnitudes = np.abs(values)
    abs_sum = math.fsum(magnitudes)
    roundoff = EPS * math.fsum(magnitudes * (4.0 + scales))
    if stop_at is None:
        neglected = float(magnitudes[-1]) if magnitudes.size else 0.0
    est = neglected + roundoff

    if value != 0.0:
        ratio = abs_sum / abs(value)
    else:
        ratio = 1.0 if abs_sum == 0.0 else math.inf
    digits = math.log10(ratio) if math.isfinite(ratio) and ratio > 0 else 17.0
    target = abs_tol if abs_tol is not None else (tol * abs(value) if relative else tol)
    converged = stop_at is not None and ratio <= settings.cancellation_guard and est <= target
    return SeriesEval(value, est, terms_used, converged, abs_sum, max(digits, 0.0))


def _run_mp(terms: Iterator, tol, relative: bool, max_terms: int, check_from: int):
    total = mp.mpf(0)
    abs_sum = mp.mpf(0)
    last = None
    run = 0
    for index, term in enumerate(terms):
        if index >= max_terms:
            return total, abs_sum, index, abs(term), False
        if term == 0:
            continue
        magnitude = abs(term)
        if last is not None and magnitude < last:
            run += 1
        else:
            run = 0
        last = magnitude
        if index >= check_from and run >= 3:
            threshold = tol * abs(total) if relative else tol
            if threshold > 0 and magnitude <= threshold:
                return total, abs_sum, index, magnitude, True
        total += term
        abs_sum += magnitude
    return total, abs_sum, max_terms, mp.mpf(0), False


def sum_mp_series(
    make_terms: TermFactory,
    *,
    tol: float,
    relative: bool,
    settings: Optional[NumericsSettings] = None,
    abs_tol: Optional[float] = None,
    check_from: int = 0,
    prefactor: Optional[Callable[[], object]] = None,
    dps: Optional[int] = None
) -> SeriesEval:
    """
    Re-sum a series in software high precision

    The working precision starts at dps and is raised until the observed
    cancellation leaves at least 17 valid digits, or mp_max_dps is reached.

    Args:
        make_terms: Factory returning a fresh iterator of mpf terms
        tol: Stopping tolerance (absolute, or relative to the partial sum)
        relative: Whether tol is relative
        settings: Numeric settings
        abs_tol: Accuracy required to report convergence
        check_from: First index at which the stop rule may fire
        prefactor: Factory for an mpf factor applied to the sum
        dps: Starting decimal precision

    Returns:
        SeriesEval with precision tag "mp<dps>"
    """
    settings = resolve_settings(settings)
    dps = max(int(dps or settings.mp_base_dps), settings.mp_base_dps)

    while True:
        with mp.workdps(dps):
            total, abs_sum, used, neglected, stopped = _run_mp(
                make_terms(), mp.mpf(tol), relative, settings.max_terms, check_from
            )
            factor = prefactor() if prefactor is not None else mp.mpf(1)
            if total != 0:
                lost = float(mp.log10(abs_sum / abs(total)))
            else:
                lost = 0.0 if abs_sum == 0 else float(dps)
            value = float(total * factor)
            neglected_f = float(abs(neglected * factor))
            abs_sum_f = float(abs_sum * abs(factor))
        valid = dps - lost
        if valid >= 20 or dps >= settings.mp_max_dps:
            break
        new_dps = min(settings.mp_max_dps, max(2 * dps, int(math.ceil(lost)) + settings.mp_base_dps))
        logger.debug(f"Raising working precision {dps} -> {new_dps} (lost {lost:.1f} digits)")
        dps = new_dps

    est = neglected_f + abs(value) * 10.0 ** (-(valid - 2))
    target = abs_tol if abs_tol is not None else (tol * abs(value) if relative else tol)
    converged = stopped and valid >= 17 and est <= target
    return SeriesEval(value, est, max(used, 1), converged, abs_sum_f, max(lost, 0.0), f"mp{dps}")


def evaluate_series(
    block: BlockFn,
    make_terms: TermFactory,
    *,
    tol: float,
    relative: bool,
    settings: Optional[NumericsSettings] = None,
    abs_tol: Optional[float] = None,
    check_from: int = 0,
    prefactor: Optional[Callable[[], object]] = None,
    label: str = "series"
) -> SeriesEval:
    """
    Double-precision evaluation with the extended-precision fallback

    Returns:
        The double result when it converged, otherwise the high-precision
        re-summation (when enabled in settings)
    """
    settings = resolve_settings(settings)
    fast = sum_log_series(
        block, tol=tol, relative=relative, settings=settings, abs_tol=abs_tol, check_from=check_from
    )
    if fast.converged or not settings.extended_precision:
        return fast
    dps = settings.mp_base_dps + int(math.ceil(min(fast.cancellation_digits, settings.mp_max_dps)))
    logger.debug(
        f"{label}: double pass flagged (est_abs_error={fast.est_abs_error:.3g}, "
        f"cancellation 1e{fast.cancellation_digits:.1f}), re-summing at {dps} digits"
    )
    return sum_mp_series(
        make_terms,
        tol=tol,
        relative=relative,
        settings=settings,
        abs_tol=abs_tol,
        check_from=check_from,
        prefactor=prefactor,
        dps=dps,
    )


# --- Prabhakar function ---

def _check_prabhakar_args(a: float, b: float, c: float, z: float):
    for name, v in (("a", a), ("b", b), ("c", c), ("z", z)):
        if not math.isfinite(float(v)):
            raise DomainError(f"Prabhakar function needs finite {name}, got {v!r}", **{name: v})
    if a <= 0 or b <= 0:
        raise DomainError(f"Prabhakar function needs a > 0 and b > 0, got a={a!r}, b={b!r}", a=a, b=b)


def prabhakar_E(
    a: float,
    b: float,
    c: float,
    z: float,
    tol: Optional[float] = None,
    settings: Optional[NumericsSettings] = None
) -> SeriesEval:
    """
    Three-parameter Mittag-Leffler (Prabhakar) function E_{a,b}^c(z)

    Sums (c)_m z^m / (m! Gamma(a m + b)) with sign-tracked log-space terms and
    exactly-rounded accumulation. Heavy cancellation or a term cap is reported
    through converged=False; with extended precision enabled, flagged
    evaluations are re-summed in software high precision first.

    Args:
        a: Positive real
        b: Positive real
        c: Real
        z: Real argument
        tol: Absolute tolerance (settings.prabhakar_tol by default)
        settings: Numeric settings

    Returns:
        SeriesEval
    """
    settings = resolve_settings(settings)
    tol = settings.prabhakar_tol if tol is None else tol
    if tol <= 0:
        raise DomainError(f"tolerance must be positive, got {tol!r}", tol=tol)
    _check_prabhakar_args(a, b, c, z)

    if z == 0.0:
        return SeriesEval(float(special.rgamma(b)), 0.0, 1, True, abs(float(special.rgamma(b))))

    if c <= 0 and c == math.floor(c):
        return _prabhakar_polynomial(a, b, c, z, tol, settings)

    log_z = math.log(abs(z))
    z_sign = -1 if z < 0 else 1

    def block(m: np.ndarray):
        lp, sp = pochhammer_log_array(c, m)
        lg, sg = log_gamma_signed_array(a * m + b)
        lf = special.gammaln(m + 1.0)
        log_abs = lp + m * log_z - lf - lg
        sign = sp * sg * np.where((m % 2 == 1) & (z_sign < 0), -1, 1)
        scale = np.abs(lp) + np.abs(m * log_z) + lf + np.abs(lg)
        return log_abs, sign, scale

    def terms():
        a_, b_, c_, z_ = mp.mpf(a), mp.mpf(b), mp.mpf(c), mp.mpf(z)
        coef = mp.mpf(1)
        m = 0
        while True:
            yield coef * mp.rgamma(a_ * m + b_)
            coef *= (c_ + m) * z_ / (m + 1)
            m += 1

    return evaluate_series(
        block, terms, tol=tol, relative=False, settings=settings, label=f"E[{a},{b}]^{c}({z})"
    )


def _prabhakar_polynomial(a, b, c, z, tol, settings) -> SeriesEval:
    # (c)_m vanishes beyond m = -c, so the series is a polynomial
    degree = int(-c)
    m = np.arange(degree + 1, dtype=float)
    lp, sp = pochhammer_log_array(c, m)
    lg, sg = log_gamma_signed_array(a * m + b)
    with np.errstate(divide="ignore"):
        log_abs = lp + m * math.log(abs(z)) - special.gammaln(m + 1.0) - lg
    sign = sp * sg * np.where((m % 2 == 1) & (z < 0), -1, 1)
    values = sign * np.exp(log_abs)
    value = math.fsum(values)
    abs_sum = math.fsum(np.abs(values))
    est = EPS * abs_sum * (4.0 + degree)
    ratio = abs_sum / abs(value) if value != 0 else (1.0 if abs_sum == 0 else math.inf)
    if (ratio > settings.cancellation_guard or est > tol) and settings.extended_precision:
        with mp.workdps(settings.mp_base_dps + int(math.log10(max(ratio, 1.0))) if math.isfinite(ratio) else settings.mp_max_dps):
            exact = mp.fsum(
                mp.rf(c, k) * mp.mpf(z) ** k / (mp.factorial(k) * mp.gamma(mp.mpf(a) * k + b))
                for k in range(degree + 1)
            )
            value = float(exact)
        est = EPS * abs(value)
        ratio = 1.0
    converged = ratio <= settings.cancellation_guard and est <= tol
    return SeriesEval(value, est, degree + 1, converged, abs_sum)


def prabhakar_E_mp(a: float, b: float, c: float, z: float, dps: int = 50):
    """
    High-precision re-summation of the Prabhakar series

    Args:
        a, b, c, z: As in prabhakar_E
        dps: Working precision in decimal digits

    Returns:
        mpmath mpf value
    """
    _check_prabhakar_args(a, b, c, z)
    with mp.workdps(dps):
        a_, b_, c_, z_ = mp.mpf(a), mp.mpf(b), mp.mpf(c), mp.mpf(z)
        total = mp.mpf(0)
        coef = mp.mpf(1)
        tiny = mp.mpf(10) ** (-dps)
        run = 0
        last = None
        for m in range(100_000):
            term = coef * mp.rgamma(a_ * m + b_)
            magnitude = abs(term)
            total += term
            if coef == 0:
                break
            if last is not None and magnitude < last:
                run += 1
            else:
                run = 0
            last = magnitude
            if run >= 3 and magnitude <= tiny * max(abs(total), tiny):
                break
            coef *= (c_ + m) * z_ / (m + 1)
        return +total


def prabhakar_density(
    ct: CtParams,
    t: float,
    settings: Optional[NumericsSettings] = None
) -> SeriesEval:
    """
    Continuous-time waiting-time density chi(t) = xi0^nu t^(nu alpha - 1) E_{alpha,nu alpha}^nu(-xi0 t^alpha)

    Args:
        ct: Continuous-limit parameters
        t: Positive time
        settings: Numeric settings

    Returns:
        SeriesEval of the density; a non-converged result is returned with
        its flag set rather than raised
    """
    if not (math.isfinite(t) and t > 0):
        raise DomainError(f"density needs t > 0, got {t!r}", t=t)
    settings = resolve_settings(settings)
    alpha, nu, xi0 = ct.alpha, ct.nu, ct.xi0
    factor = xi0 ** nu * t ** (nu * alpha - 1.0)
    # near t = 0 the prefactor blows up; below 1e-15 the tolerance is under roundoff
    tol = max(settings.prabhakar_tol / max(1.0, factor), 1e-15)
    series = prabhakar_E(alpha, nu * alpha, nu, -xi0 * t ** alpha, tol=tol, settings=settings)
    density = series.scaled(factor)
    if not density.converged:
        logger.warning(
            f"Prabhakar density at t={t} not converged "
            f"(est_abs_error={density.est_abs_error:.3g}, precision={density.precision})"
        )
    return density

"""
Counting Process Module
Closed-form inter-arrival and state probabilities of the discrete-time counting process,
their continuous-time limit, power-law tails and well-scaled limit probes
"""
import math
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import mpmath as mp
import numpy as np
from scipy import special

from . import powerseries
from .errors import BranchError, ConvergenceError, DomainError, IntegrityError
from .models import (
    Branch,
    CtParams,
    NumericsSettings,
    PdtpParams,
    Route,
    TailMode,
    resolve_settings,
)
from .specfun import (
    SeriesEval,
    evaluate_series,
    pochhammer_log_array,
    prabhakar_E,
    prabhakar_density,
    rising_log,
    rising_mp,
)

logger = logging.getLogger(__name__)

CT_REFINE_PASSES = 3


@dataclass(frozen=True)
class StateDistribution:
    """Phi^(n)(t) for n = 0..t"""
    t: int
    probs: np.ndarray
    route: Route = Route.CLOSED_FORM
    residual: float = 0.0

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.shape != (self.t + 1,):
            raise IntegrityError(
                f"distribution at t={self.t} must have {self.t + 1} entries, got {probs.size}",
                residual=float(abs(probs.size - self.t - 1)),
            )
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)


@dataclass(frozen=True)
class LimitProbeRecord:
    """One step size of a well-scaled limit probe"""
    h: float
    steps: int
    rounding_residue: float
    xi_h: float
    route: Route
    discrete_value: float
    ct_value: float
    gap: float
    notes: List[str] = field(default_factory=list)


# --- Routing ---

def oracle_band(settings: Optional[NumericsSettings] = None) -> tuple:
    settings = resolve_settings(settings)
    return (1.0 - settings.oracle_band, 1.0 + settings.oracle_band)


def resolve_route(p: PdtpParams, route: Route, settings: Optional[NumericsSettings] = None) -> Route:
    """
    Concrete route (CLOSED_FORM or ORACLE) for a request

    Args:
        p: Process parameters
        route: Requested route; AUTO picks the oracle inside the band
        settings: Numeric settings

    Returns:
        Route.CLOSED_FORM or Route.ORACLE
    """
    settings = resolve_settings(settings)
    route = Route(route)
    in_band = p.branch(settings.oracle_band) is Branch.ORACLE_ONLY
    if route is Route.AUTO:
        return Route.ORACLE if in_band else Route.CLOSED_FORM
    if route is Route.CLOSED_FORM and in_band:
        raise BranchError(p.xi, oracle_band(settings))
    return route


# --- Closed-form kernels ---

def kernel_series(
    p: PdtpParams,
    c: float,
    j: int,
    shift: int,
    settings: Optional[NumericsSettings] = None
) -> SeriesEval:
    """
    Branch series shared by the pmf and the arrival distribution

    LOW (xi < 1):  xi^c / j! * sum_m (-1)^m (c)_m xi^m / m! * (alpha(m+c) + shift)_j
    HIGH (xi > 1): 1 / j! * sum_m (-1)^m (c)_m xi^-m / m! * (shift - alpha m)_j

    With shift = 0 and c = nu this is phi(j); with shift = 1 and c = n nu it is
    P(J_n <= n + j), the probability of at least n arrivals by time n + j.

    Args:
        p: Process parameters (xi outside the oracle band)
        c: Pochhammer base
        j: Nonnegative integer order
        shift: 0 or 1
        settings: Numeric settings

    Returns:
        SeriesEval of the kernel value
    """
    settings = resolve_settings(settings)
    alpha, xi = p.alpha, p.xi
    if c == 0.0:
        return SeriesEval(1.0, 0.0, 1, True, 1.0)
    if j == 0:
        # binomial summation of the m-series
        value = math.exp(c * (math.log(xi) - math.log1p(xi)))
        return SeriesEval(value, 4.0 * np.finfo(float).eps * value, 1, True, value)

    branch = p.branch(settings.oracle_band)
    if branch is Branch.ORACLE_ONLY:
        raise BranchError(xi, oracle_band(settings))

    log_xi = math.log(xi)
    log_jfact = float(special.gammaln(j + 1.0))
    low = branch is Branch.LOW

    def block(m: np.ndarray):
        lp, sp = pochhammer_log_array(c, m)
        lf = special.gammaln(m + 1.0)
        if low:
            lr, sr = rising_log(alpha * (m + c) + shift, j)
            power = (m + c) * log_xi
        else:
            lr, sr = rising_log(shift - alpha * m, j)
            power = -m * log_xi
        log_abs = lp + power - lf + lr - log_jfact
        sign = sp * sr * np.where(m % 2 == 1, -1, 1)
        scale = np.abs(lp) + np.abs(power) + lf + np.abs(lr) + log_jfact
        return log_abs, sign, scale

    def terms():
        xi_, alpha_, c_ = mp.mpf(xi), mp.mpf(alpha), mp.mpf(c)
        coef = mp.mpf(1)
        m = 0
        while True:
            if low:
                yield coef * rising_mp(alpha_ * (m + c_) + shift, j)
                coef *= -xi_ * (c_ + m) / (m + 1)
            else:
                yield coef * rising_mp(shift - alpha_ * m, j)
                coef *= -(c_ + m) / (xi_ * (m + 1))
            m += 1

    def prefactor():
        base = mp.power(mp.mpf(xi), c) if low else mp.mpf(1)
        return base / mp.factorial(j)

    check_from = 0 if low else int(math.ceil((j + shift) / alpha)) + 1
    return evaluate_series(
        block,
        terms,
        tol=settings.series_tol,
        relative=True,
        settings=settings,
        abs_tol=settings.closed_form_abs_tol,
        check_from=check_from,
        prefactor=prefactor,
        label=f"kernel[{branch.value}](c={c}, j={j}, shift={shift})",
    )


def _require(evaluation: SeriesEval, what: str) -> float:
    if not evaluation.converged:
        raise ConvergenceError(
            f"{what} did not converge (est_abs_error={evaluation.est_abs_error:.3g}, "
            f"terms_used={evaluation.terms_used}, precision={evaluation.precision})",
            evaluation,
        )
    return evaluation.value


def _clamp(value: float, what: str, settings: NumericsSettings, slack: float = 0.0) -> float:
    if value >= 0.0:
        return value
    # a negative inside the reported error of the terms is roundoff
    if value >= -max(settings.negative_clamp, slack):
        logger.debug(f"{what}: clamped roundoff {value:.3g} to 0")
        return 0.0
    raise IntegrityError(f"{what} is negative ({value:.6g}) beyond roundoff", residual=-value)


def _check_time(name: str, value: int):
    if int(value) != value or value < 0:
        raise DomainError(f"{name} must be a nonnegative integer, got {value!r}", **{name: value})


# --- Discrete-time operations ---

def arrival_cdf(
    p: PdtpParams,
    n: int,
    t: int,
    route: Route = Route.CLOSED_FORM,
    settings: Optional[NumericsSettings] = None
) -> float:
    """
    P(J_n <= t): probability of at least n arrivals within [0, t]

    Args:
        p: Process parameters
        n: Number of arrivals
        t: Time
        route: CLOSED_FORM, ORACLE or AUTO
        settings: Numeric settings

    Returns:
        Probability in [0, 1]
    """
    settings = resolve_settings(settings)
    _check_time("n", n)
    _check_time("t", t)
    if n == 0:
        return 1.0
    if t < n:
        return 0.0
    if resolve_route(p, route, settings) is Route.ORACLE:
        below = math.fsum(powerseries.oracle_state_prob(p, k, t, settings) for k in range(n))
        return _clamp(1.0 - below, f"arrival_cdf(n={n}, t={t})", settings)
    value, est = _arrival_cdf_series(p, n, t, settings)
    return _clamp(value, f"arrival_cdf(n={n}, t={t})", settings, slack=est)


def _arrival_cdf_series(p: PdtpParams, n: int, t: int, settings: NumericsSettings) -> tuple:
    # closed-form P(J_n <= t) as (value, est_abs_error), unclamped
    if n == 0:
        return 1.0, 0.0
    if t < n:
        return 0.0, 0.0
    evaluation = kernel_series(p, n * p.nu, t - n, 1, settings)
    return _require(evaluation, f"arrival_cdf(n={n}, t={t})"), evaluation.est_abs_error


def interarrival_pmf(
    p: PdtpParams,
    t: int,
    route: Route = Route.CLOSED_FORM,
    settings: Optional[NumericsSettings] = None
) -> float:
    """
    Waiting-time pmf theta(t) = phi(t - 1), theta(0) = 0

    Args:
        p: Process parameters
        t: Nonnegative integer time
        route: CLOSED_FORM (default; raises BranchError near xi = 1), ORACLE or AUTO
        settings: Numeric settings

    Returns:
        Probability theta(t)
    """
    settings = resolve_settings(settings)
    _check_time("t", t)
    if t == 0:
        return 0.0
    if resolve_route(p, route, settings) is Route.ORACLE:
        return powerseries.oracle_interarrival_pmf(p, t, settings)
    evaluation = kernel_series(p, p.nu, t - 1, 0, settings)
    value = _require(evaluation, f"interarrival_pmf(t={t})")
    return _clamp(value, f"interarrival_pmf(t={t})", settings)


def interarrival_pmf_table(
    p: PdtpParams,
    t_max: int,
    route: Route = Route.AUTO,
    settings: Optional[NumericsSettings] = None
) -> np.ndarray:
    """theta(0..t_max) as an array"""
    settings = resolve_settings(settings)
    _check_time("t_max", t_max)
    if resolve_route(p, route, settings) is Route.ORACLE:
        length = powerseries.oracle_length_for(t_max, settings)
        return powerseries.theta_coeffs(p, length=length).to_numpy()[: t_max + 1]
    return np.array([interarrival_pmf(p, t, Route.CLOSED_FORM, settings) for t in range(t_max + 1)])


def state_prob(
    p: PdtpParams,
    n: int,
    t: int,
    route: Route = Route.CLOSED_FORM,
    settings: Optional[NumericsSettings] = None
) -> float:
    """
    Probability Phi^(n)(t) of exactly n arrivals within [0, t]

    Args:
        p: Process parameters
        n: Number of arrivals
        t: Time
        route: CLOSED_FORM (default; raises BranchError near xi = 1), ORACLE or AUTO
        settings: Numeric settings

    Returns:
        Probability; exactly 0 for t < n and exactly 1 for n = t = 0
    """
    settings = resolve_settings(settings)
    _check_time("n", n)
    _check_time("t", t)
    if t < n:
        return 0.0
    if t == 0:
        return 1.0
    concrete = resolve_route(p, route, settings)
    if concrete is Route.ORACLE:
        return _clamp(powerseries.oracle_state_prob(p, n, t, settings), f"state_prob(n={n}, t={t})", settings)
    upper, upper_est = _arrival_cdf_series(p, n, t, settings)
    lower, lower_est = _arrival_cdf_series(p, n + 1, t, settings)
    return _clamp(upper - lower, f"state_prob(n={n}, t={t})", settings, slack=upper_est + lower_est)


def state_distribution(
    p: PdtpParams,
    t: int,
    route: Route = Route.AUTO,
    settings: Optional[NumericsSettings] = None
) -> StateDistribution:
    """
    Phi^(n)(t) for n = 0..t, normalization verified

    Args:
        p: Process parameters
        t: Time
        route: AUTO (default; oracle inside the band), CLOSED_FORM or ORACLE
        settings: Numeric settings

    Returns:
        StateDistribution with the residual of the normalization check
    """
    settings = resolve_settings(settings)
    _check_time("t", t)
    concrete = resolve_route(p, route, settings)
    if t == 0:
        return StateDistribution(0, np.ones(1), concrete)
    if concrete is Route.ORACLE:
        probs = powerseries.oracle_state_distribution(p, t, settings)
        slack = np.zeros(len(probs))
    else:
        cdf = np.zeros(t + 2)
        errors = np.zeros(t + 2)
        for n in range(t + 1):
            cdf[n], errors[n] = _arrival_cdf_series(p, n, t, settings)
        probs = cdf[:-1] - cdf[1:]
        slack = errors[:-1] + errors[1:]
    probs = np.array([_clamp(float(v), f"state_distribution(n={n}, t={t})", settings, slack=float(slack[n]))
                      for n, v in enumerate(probs)])
    residual = math.fsum(probs) - 1.0
    if abs(residual) > settings.normalization_tol:
        raise IntegrityError(
            f"state probabilities at t={t} sum to 1{residual:+.3g}",
            residual=residual,
            t=t,
            route=concrete.value,
        )
    return StateDistribution(t, probs, concrete, residual)


# --- Continuous-time limit ---

def ct_state_prob(
    ct: CtParams,
    n: int,
    t: float,
    settings: Optional[NumericsSettings] = None
) -> float:
    """
    Continuous-time state probability through two Prabhakar evaluations

    z^(n nu) E^(n nu)_{alpha, alpha n nu + 1}(-z) - z^((n+1) nu) E^((n+1) nu)_{alpha, alpha (n+1) nu + 1}(-z)
    with z = xi0 t^alpha.

    Args:
        ct: Continuous-limit parameters
        n: Number of arrivals
        t: Time (t = 0 gives the initial condition delta_{n0})
        settings: Numeric settings

    Returns:
        Probability in [0, 1]
    """
    settings = resolve_settings(settings)
    _check_time("n", n)
    if not (math.isfinite(t) and t >= 0):
        raise DomainError(f"t must be a nonnegative real, got {t!r}", t=t)
    if t == 0:
        return 1.0 if n == 0 else 0.0
    z = ct.xi0 * t ** ct.alpha
    log_z = math.log(z)

    def arrived(k: int) -> SeriesEval:
        c = k * ct.nu
        factor = math.exp(c * log_z)
        # the series tolerance absorbs the z^c prefactor
        tol = settings.prabhakar_tol / max(1.0, factor)
        series = prabhakar_E(ct.alpha, ct.alpha * c + 1.0, c, -z, tol=tol, settings=settings)
        # deep states sit far below the absolute tolerance; tighten it to the value
        for _ in range(CT_REFINE_PASSES):
            if not series.converged or series.value == 0.0:
                break
            if series.est_abs_error <= 10.0 * settings.prabhakar_tol * abs(series.value):
                break
            tol = max(abs(series.value) * settings.prabhakar_tol, 1e-300)
            refined = prabhakar_E(ct.alpha, ct.alpha * c + 1.0, c, -z, tol=tol, settings=settings)
            if not refined.converged:
                break
            series = refined
        return series.scaled(factor)

    upper = arrived(n)
    lower = arrived(n + 1)
    for part, label in ((upper, n), (lower, n + 1)):
        _require(part, f"ct_state_prob arrival term k={label} at t={t}")
    value = upper.value - lower.value
    return _clamp(
        value, f"ct_state_prob(n={n}, t={t})", settings, slack=upper.est_abs_error + lower.est_abs_error
    )


def tail_asymptote(
    params: Union[PdtpParams, CtParams],
    mode: TailMode,
    t: float
) -> float:
    """
    Power-law tail of the state probabilities or of the inter-arrival law

    STATE: (nu / xi) t^-alpha / Gamma(1 - alpha), the same for every n.
    INTERARRIVAL: (alpha nu / xi) t^(-alpha - 1) / Gamma(1 - alpha).
    xi is the discrete time scale for PdtpParams and xi0 for CtParams.

    Args:
        params: PdtpParams or CtParams
        mode: TailMode
        t: Positive time

    Returns:
        Asymptotic value
    """
    mode = TailMode(mode)
    alpha, nu = params.alpha, params.nu
    scale = params.xi if isinstance(params, PdtpParams) else params.xi0
    if alpha >= 1.0:
        raise DomainError("alpha = 1 has no power-law tail", alpha=alpha)
    if not (math.isfinite(t) and t > 0):
        raise DomainError(f"t must be positive, got {t!r}", t=t)
    if mode is TailMode.STATE:
        return (nu / scale) * t ** (-alpha) / special.gamma(1.0 - alpha)
    return (alpha * nu / scale) * t ** (-alpha - 1.0) / special.gamma(1.0 - alpha)


def _probe_steps(t: float, h: float) -> tuple:
    if not (math.isfinite(h) and h > 0):
        raise DomainError(f"step h must be positive, got {h!r}", h=h)
    ratio = t / h
    steps = int(math.floor(ratio + 0.5))
    return steps, ratio - steps


def scaled_limit_probe(
    ct: CtParams,
    n: int,
    t: float,
    h_list: Sequence[float],
    settings: Optional[NumericsSettings] = None
) -> List[LimitProbeRecord]:
    """
    Compare Phi^(n)(round(t/h), xi0 h^alpha) with the continuous-time value for each h

    Args:
        ct: Continuous-limit parameters
        n: Number of arrivals
        t: Positive time
        h_list: Step sizes
        settings: Numeric settings

    Returns:
        One LimitProbeRecord per step size, in input order
    """
    settings = resolve_settings(settings)
    if not (math.isfinite(t) and t > 0):
        raise DomainError(f"t must be positive, got {t!r}", t=t)
    ct_value = ct_state_prob(ct, n, t, settings)
    records = []
    for h in h_list:
        steps, residue = _probe_steps(t, h)
        discrete = ct.discrete(h)
        route = resolve_route(discrete, Route.AUTO, settings)
        notes = []
        if route is Route.ORACLE:
            notes.append(f"xi_h={discrete.xi:.6g} in the ORACLE_ONLY band, evaluated by the oracle")
            logger.warning(f"limit probe h={h}: {notes[-1]}")
        value = state_prob(discrete, n, steps, route, settings)
        records.append(
            LimitProbeRecord(h, steps, residue, discrete.xi, route, value, ct_value, abs(value - ct_value), notes)
        )
    return records


def scaled_density_probe(
    ct: CtParams,
    t: float,
    h_list: Sequence[float],
    settings: Optional[NumericsSettings] = None
) -> List[LimitProbeRecord]:
    """
    Compare theta(round(t/h), xi0 h^alpha) / h with the Prabhakar density for each h

    Returns:
        One LimitProbeRecord per step size, ct_value being the density
    """
    settings = resolve_settings(settings)
    density = prabhakar_density(ct, t, settings)
    ct_value = _require(density, f"prabhakar_density(t={t})")
    records = []
    for h in h_list:
        steps, residue = _probe_steps(t, h)
        discrete = ct.discrete(h)
        route = resolve_route(discrete, Route.AUTO, settings)
        notes = []
        if route is Route.ORACLE:
            notes.append(f"xi_h={discrete.xi:.6g} in the ORACLE_ONLY band, evaluated by the oracle")
            logger.warning(f"density probe h={h}: {notes[-1]}")
        value = interarrival_pmf(discrete, steps, route, settings) / h
        records.append(
            LimitProbeRecord(h, steps, residue, discrete.xi, route, value, ct_value, abs(value - ct_value), notes)
        )
    return records

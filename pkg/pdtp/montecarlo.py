"""
Monte Carlo Module
Seeded simulation of counting paths and subordinated walkers, with empirical estimators
"""
import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Sequence, TypeVar

import numpy as np
import pandas as pd

from . import counting
from .errors import DomainError, EmptyEnsembleError, IntegrityError, SamplerError
from .graphwalk import Graph
from .models import NumericsSettings, PdtpParams, Route, resolve_settings
from .powerseries import survival_coeffs, theta_coeffs
from .utils import Z_99, neumaier_cumsum, wilson_interval

logger = logging.getLogger(__name__)

R = TypeVar("R")

# largest time at which the table is cross-checked against the closed form
CROSS_CHECK_T = 32
MAX_WAIT = 1e12


class TailLaw(str, Enum):
    POWER_LAW = "power-law"        # alpha < 1: floor-of-Pareto tail beyond the table
    RENORMALIZED = "renormalized"  # alpha = 1: table renormalized


@dataclass(frozen=True, eq=False)
class SamplerTable:
    """Inverse-CDF table of the waiting time over t = 1..T_max plus a tail law"""
    params: PdtpParams
    cdf: np.ndarray
    truncation_mass: float
    tail_law: TailLaw
    tail_error: float
    eps_tail: float

    @property
    def t_max(self) -> int:
        return int(self.cdf.size)

    def lookup(self, u: np.ndarray) -> np.ndarray:
        """
        Map uniforms in [0, 1) to waiting times

        Args:
            u: Uniform draws

        Returns:
            Integer waiting times >= 1
        """
        u = np.asarray(u, dtype=float)
        top = self.cdf[-1]
        if self.tail_law is TailLaw.RENORMALIZED:
            u = u * top
        z = np.searchsorted(self.cdf, u, side="left").astype(np.int64) + 1
        in_tail = u >= top
        if np.any(in_tail):
            # P(Z >= t) = S(T) ((T+1) / t)^alpha for t > T
            w = np.minimum((1.0 - u[in_tail]) / self.truncation_mass, 1.0)
            w = np.maximum(w, np.finfo(float).tiny)
            scale = float(self.t_max + 1)
            tail = np.floor(scale * w ** (-1.0 / self.params.alpha))
            # capped so cumulative arrival times stay within int64
            z[in_tail] = np.clip(tail, scale, MAX_WAIT).astype(np.int64)
        return z


@dataclass(frozen=True, eq=False)
class WalkPath:
    """Arrival times of one walker and the node held after each arrival"""
    arrival_times: np.ndarray
    node_sequence: np.ndarray
    horizon: int

    def position(self, t: int) -> int:
        k = int(np.searchsorted(self.arrival_times, t, side="right"))
        return int(self.node_sequence[k])

    def counts(self) -> np.ndarray:
        """N(t) for t = 0..horizon"""
        return np.searchsorted(self.arrival_times, np.arange(self.horizon + 1), side="right")


@dataclass(frozen=True)
class EmpiricalHistogram:
    """Frequencies of an ensemble at one time, with Wilson half-widths"""
    t: int
    counts: np.ndarray
    total: int
    frequencies: np.ndarray
    centers: np.ndarray
    halfwidths: np.ndarray


# --- Sampler table ---

def _tail_errors(
    theta: np.ndarray, survival: np.ndarray, alpha: float, candidates: range, eps: float
) -> np.ndarray:
    # total variation between theta and the attached tail over the visible window,
    # plus the mismatch of the mass beyond it; stops at the first cut within eps
    length = theta.size - 1
    t = np.arange(length + 1, dtype=float)
    errors = []
    for cut in candidates:
        s = survival[cut]
        window = t[cut + 1 :]
        q = s * ((window / (cut + 1)) ** (-alpha) - ((window + 1) / (cut + 1)) ** (-alpha))
        beyond = s * ((length + 1) / (cut + 1)) ** (-alpha)
        errors.append(math.fsum(np.abs(theta[cut + 1 :] - q)) + abs(survival[length] - beyond))
        if errors[-1] <= eps:
            break
    return np.array(errors)


def build_sampler(
    p: PdtpParams,
    eps_tail: Optional[float] = None,
    settings: Optional[NumericsSettings] = None
) -> SamplerTable:
    """
    Tabulate the waiting-time law for inversion sampling

    The table grows by doubling until the tail criterion holds: survival
    S(T) <= eps_tail for alpha = 1, or the total-variation error of the
    attached power-law tail <= eps_tail for alpha < 1.

    Args:
        p: Process parameters
        eps_tail: Tail accuracy in (0, 1e-3] (settings.eps_tail by default)
        settings: Numeric settings

    Returns:
        SamplerTable
    """
    settings = resolve_settings(settings)
    eps = settings.eps_tail if eps_tail is None else float(eps_tail)
    if not 0 < eps <= 1e-3:
        raise DomainError(f"eps_tail must lie in (0, 1e-3], got {eps!r}", eps_tail=eps)

    power_law = p.alpha < 1.0
    length = 64
    best = math.inf
    while True:
        theta = theta_coeffs(p, length=length + 1).coeffs
        survival = survival_coeffs(p, length + 1).coeffs
        if power_law:
            candidates = range(1, length // 2 + 1)
            errors = _tail_errors(theta, survival, p.alpha, candidates, eps)
        else:
            candidates = range(1, length + 1)
            errors = survival[1 : length + 1]
        ok = np.flatnonzero(errors <= eps)
        best = min(best, float(np.min(errors)))
        if ok.size:
            cut = candidates[int(ok[0])]
            tail_error = float(errors[int(ok[0])])
            break
        if length >= settings.sampler_max_table:
            raise SamplerError(
                f"tail accuracy {eps:g} not reached within {length} table entries "
                f"(best {best:.3g}); raise eps_tail or sampler_max_table",
                achieved=best,
                table_length=length,
            )
        length = min(2 * length, settings.sampler_max_table)

    cdf = neumaier_cumsum(theta[1 : cut + 1])
    truncation = float(survival[cut])
    _cross_check(p, cdf, settings)
    table = SamplerTable(
        params=p,
        cdf=cdf,
        truncation_mass=truncation,
        tail_law=TailLaw.POWER_LAW if power_law else TailLaw.RENORMALIZED,
        tail_error=tail_error,
        eps_tail=eps,
    )
    logger.info(
        f"Sampler built for {p.echo()}: T_max={table.t_max}, tail={table.tail_law.value}, "
        f"truncation_mass={truncation:.3g}, tail_error={tail_error:.3g}"
    )
    return table


def _cross_check(p: PdtpParams, cdf: np.ndarray, settings: NumericsSettings) -> None:
    t = min(cdf.size, CROSS_CHECK_T)
    expected = counting.state_prob(p, 0, t, Route.AUTO, settings)
    residual = abs((1.0 - cdf[t - 1]) - expected)
    if residual > 1e-9:
        raise IntegrityError(
            f"sampler survival at t={t} disagrees with the no-arrival probability by {residual:.3g}",
            residual=residual,
            t=t,
        )


# --- Random streams ---

def walker_rng(seed: int, walker_index: int) -> np.random.Generator:
    """Counter-based stream keyed by (master seed, walker index)"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(walker_index)])))


def sample_interarrival(table: SamplerTable, rng: np.random.Generator) -> int:
    return int(table.lookup(np.array([rng.random()]))[0])


def _arrivals(table: SamplerTable, horizon: int, rng: np.random.Generator) -> np.ndarray:
    # waiting times are >= 1, so horizon + 1 draws always pass the horizon
    waits = table.lookup(rng.random(horizon + 1))
    times = np.cumsum(waits)
    return times[times <= horizon]


def simulate_counting(table: SamplerTable, horizon: int, rng: np.random.Generator) -> np.ndarray:
    """
    One counting path N(t), t = 0..horizon

    Returns:
        Nondecreasing integer array starting at 0 with unit jumps
    """
    if int(horizon) != horizon or horizon < 0:
        raise DomainError(f"horizon must be a nonnegative integer, got {horizon!r}", horizon=horizon)
    arrivals = _arrivals(table, horizon, rng)
    return np.searchsorted(arrivals, np.arange(horizon + 1), side="right")


def simulate_walk(
    g: Graph,
    table: SamplerTable,
    horizon: int,
    start: int,
    rng: np.random.Generator
) -> WalkPath:
    """
    One walker: rests between arrivals, jumps to a uniform neighbor at each arrival

    Returns:
        WalkPath with node_sequence[0] = start
    """
    start = g.check_node(start)
    if int(horizon) != horizon or horizon < 0:
        raise DomainError(f"horizon must be a nonnegative integer, got {horizon!r}", horizon=horizon)
    arrivals = _arrivals(table, horizon, rng)
    nodes = np.empty(arrivals.size + 1, dtype=np.int64)
    nodes[0] = start
    for k in range(arrivals.size):
        nbrs = g.neighbors(nodes[k])
        nodes[k + 1] = nbrs[rng.integers(nbrs.size)]
    return WalkPath(arrivals, nodes, int(horizon))


def _run_walkers(job: Callable[[int], R], walkers: int, threads: int) -> List[R]:
    if walkers < 1:
        raise DomainError(f"need at least one walker, got {walkers}", walkers=walkers)
    if threads <= 1:
        return [job(i) for i in range(walkers)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        # map preserves walker order
        return list(pool.map(job, range(walkers)))


def simulate_counting_ensemble(
    table: SamplerTable,
    horizon: int,
    walkers: int,
    seed: int,
    threads: int = 1
) -> np.ndarray:
    """
    Counting paths of an ensemble, one row per walker index

    Returns:
        Array of shape (walkers, horizon + 1)
    """
    paths = _run_walkers(lambda i: simulate_counting(table, horizon, walker_rng(seed, i)), walkers, threads)
    logger.info(f"Simulated {walkers} counting paths to t={horizon} (seed={seed})")
    return np.vstack(paths)


def simulate_walk_ensemble(
    g: Graph,
    table: SamplerTable,
    horizon: int,
    start: int,
    walkers: int,
    seed: int,
    threads: int = 1
) -> List[WalkPath]:
    paths = _run_walkers(lambda i: simulate_walk(g, table, horizon, start, walker_rng(seed, i)), walkers, threads)
    logger.info(f"Simulated {walkers} walkers on {g.name} to t={horizon} (seed={seed})")
    return paths


# --- Estimators ---

def _histogram(values: np.ndarray, t: int, bins: int, z: float) -> EmpiricalHistogram:
    total = int(values.size)
    counts = np.bincount(values, minlength=bins)[:bins]
    center, half = wilson_interval(counts, total, z)
    return EmpiricalHistogram(t, counts, total, counts / total, center, half)


def empirical_state_probs(paths: np.ndarray, t: int, z: float = Z_99) -> EmpiricalHistogram:
    """
    Frequencies of N(t) = n, n = 0..t, over an ensemble of counting paths

    Args:
        paths: Array (walkers, horizon + 1) from simulate_counting_ensemble
        t: Time, at most the horizon
        z: Normal quantile of the Wilson band

    Returns:
        EmpiricalHistogram over n = 0..t
    """
    paths = np.atleast_2d(np.asarray(paths))
    if paths.shape[0] == 0 or paths.size == 0:
        raise EmptyEnsembleError("empirical state probabilities need at least one path")
    if not 0 <= t < paths.shape[1]:
        raise DomainError(f"t={t} is outside the simulated horizon 0..{paths.shape[1] - 1}", t=t)
    return _histogram(paths[:, t].astype(np.int64), t, t + 1, z)


def empirical_occupation(paths: Sequence[WalkPath], t: int, N: int, z: float = Z_99) -> EmpiricalHistogram:
    """Frequencies of the walker position at time t over nodes 0..N-1"""
    if len(paths) == 0:
        raise EmptyEnsembleError("empirical occupation needs at least one walker")
    positions = np.array([path.position(t) for path in paths], dtype=np.int64)
    return _histogram(positions, t, N, z)


def compare_to_analytic(hist: EmpiricalHistogram, analytic: Sequence[float], index_name: str = "n") -> pd.DataFrame:
    """
    Tabulate empirical frequencies against analytic probabilities

    Returns:
        DataFrame with columns t, <index_name>, empirical, analytic,
        wilson_halfwidth, within_band
    """
    analytic = np.asarray(analytic, dtype=float)
    if analytic.size != hist.counts.size:
        raise DomainError(
            f"analytic vector has {analytic.size} entries, histogram has {hist.counts.size}",
        )
    return pd.DataFrame({
        "t": hist.t,
        index_name: np.arange(hist.counts.size),
        "empirical": hist.frequencies,
        "analytic": analytic,
        "wilson_halfwidth": hist.halfwidths,
        "within_band": np.abs(analytic - hist.centers) <= hist.halfwidths,
    })

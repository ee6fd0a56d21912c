"""Continuous-time Yule tree: birth times, the zeta limit, and event simulation.

Indexing of birth times: T_1 = 0 and, with k - 1 particles alive, the next
birth comes after an Exp(k - 1) wait, so

    T_k = T_{k-1} + V_k / (k - 1),   V_2, V_3, ... iid Exp(1),

and E[T_n] = sum_{j=1}^{n-1} 1/j.

The particle simulator draws inter-event times from a separate clock stream
and picks the branching particle with one ``uniform_int(k)`` per event on the
choice stream, counting particles from the highest position downwards. That is
the same draw discipline as the profile simulator, so the two can be run on a
shared choice stream and compared event by event.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .errors import ContractError, NumericalRangeError, ResourceLimitError
from .rng import RandomStream, exponential, uniform01, uniform_int

POPULATION_CAP = 10**7
PSI_THETA_RANGE = (-2.0, 1.5)
ZETA_DIRECT_TERMS = 4096
EULER_GAMMA = 0.5772156649015329


# samplers

@nb.njit(cache=True)
def _normal(state):
    # Marsaglia polar method, one variate per call
    while True:
        u = 2.0 * uniform01(state) - 1.0
        v = 2.0 * uniform01(state) - 1.0
        s = u * u + v * v
        if 0.0 < s < 1.0:
            return u * math.sqrt(-2.0 * math.log(s) / s)


@nb.njit(cache=True)
def _gamma(state, shape):
    """Gamma(shape, 1) for shape >= 1 (Marsaglia & Tsang)."""
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = _normal(state)
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = uniform01(state)
        if math.log(1.0 - u) < 0.5 * x * x + d - d * v + d * math.log(v):
            return d * v


@nb.njit(cache=True)
def _birth_times(state, n, out):
    out[0] = 0.0
    for k in range(2, n + 1):
        out[k - 1] = out[k - 2] + exponential(state) / (k - 1)


@nb.njit(cache=True)
def _t_direct(state, n):
    t = 0.0
    for j in range(1, n):
        t += exponential(state) / j
    return t


@nb.njit(cache=True)
def _t_split(state, n, direct_terms):
    """T_n = sum_{j<K} V/j + tail, with the tail drawn from its exact law.

    sum_{j=K}^{m} E_j / j (m = n - 1) is the (m-K+1)-th order statistic of m
    unit exponentials, i.e. -log B with B ~ Beta(K, m-K+1), and
    -log B = log1p(G_{m-K+1} / G_K) for independent gammas.
    """
    m = n - 1
    if m < direct_terms:
        return _t_direct(state, n)
    t = 0.0
    for j in range(1, direct_terms):
        t += exponential(state) / j
    g_k = _gamma(state, float(direct_terms))
    g_rest = _gamma(state, float(m - direct_terms + 1))
    return t + math.log1p(g_rest / g_k)


@nb.njit(cache=True)
def _terminal_batch(state, n, m, direct_terms, out):
    for i in range(m):
        if direct_terms > 0:
            out[i] = _t_split(state, n, direct_terms)
        else:
            out[i] = _t_direct(state, n)


@nb.njit(cache=True)
def _yule_run(choice, clock, horizon, max_events, counts, t_state):
    """Advance the particle system in ``counts`` (particles per depth).

    t_state = [elapsed time, events so far, population, deepest level].
    Returns 0 when finished, 1 when the depth buffer needs to grow,
    2 when the population cap is hit.
    """
    t = t_state[0]
    events = np.int64(t_state[1])
    k = np.int64(t_state[2])
    top = np.int64(t_state[3])
    status = 0
    while events < max_events:
        if top + 1 >= counts.shape[0]:
            status = 1
            break
        if k >= 10000000:
            status = 2
            break
        dt = exponential(clock) / k
        if t + dt > horizon:
            # memorylessness: discarding the overshooting wait is exact
            t = horizon
            break
        u = uniform_int(choice, k)
        level = 0
        acc = counts[0]
        while acc < u:
            level += 1
            acc += counts[level]
        counts[level] -= 1
        counts[level + 1] += 2
        if level + 1 > top:
            top = level + 1
        k += 1
        events += 1
        t += dt
    t_state[0] = t
    t_state[1] = events
    t_state[2] = k
    t_state[3] = top
    return status


@nb.njit(cache=True)
def _psi_trials(state, theta, trials, horizon):
    """Welford mean and M2 of sum_u exp(theta * depth_u) at ``horizon``."""
    counts = np.zeros(4096, dtype=np.int64)
    mean = 0.0
    m2 = 0.0
    for i in range(trials):
        counts[:] = 0
        counts[0] = 1
        k = 1
        top = 0
        t = 0.0
        while True:
            dt = exponential(state) / k
            if t + dt > horizon:
                break
            t += dt
            u = uniform_int(state, k)
            level = 0
            acc = counts[0]
            while acc < u:
                level += 1
                acc += counts[level]
            counts[level] -= 1
            counts[level + 1] += 2
            if level + 1 > top:
                top = level + 1
            k += 1
            if top + 2 >= counts.shape[0]:
                return np.nan, np.nan
        w = 0.0
        for d in range(top + 1):
            if counts[d] > 0:
                w += counts[d] * math.exp(theta * d)
        delta = w - mean
        mean += delta / (i + 1)
        m2 += delta * (w - mean)
    return mean, m2


# public surface

@dataclass
class BirthTimes:
    times: np.ndarray

    @property
    def n(self) -> int:
        return len(self.times)

    @property
    def zeta_proxy(self) -> float:
        """T_n - log n."""
        return float(self.times[-1] - math.log(self.n))

    def scaled_increments(self) -> np.ndarray:
        """(k - 1)(T_k - T_{k-1}) for k = 2..n; iid Exp(1)."""
        k = np.arange(2, self.n + 1)
        return (k - 1) * np.diff(self.times)

    def martingale(self) -> np.ndarray:
        """T_k - sum_{j<k} 1/j, zero-mean with variance below pi^2 / 6."""
        harmonic = np.concatenate(([0.0], np.cumsum(1.0 / np.arange(1, self.n))))
        return self.times - harmonic


def expected_birth_time(n: int) -> float:
    return math.fsum(1.0 / j for j in range(1, n))


def birth_times(rng: RandomStream, n: int) -> BirthTimes:
    if n < 1:
        raise ContractError("n must be >= 1")
    out = np.empty(n, dtype=np.float64)
    _birth_times(rng.state, n, out)
    return BirthTimes(out)


def terminal_birth_times(rng: RandomStream, n: int, m: int, method: str = "split") -> np.ndarray:
    """m independent draws of T_n.

    ``method="direct"`` sums all n - 1 scaled spacings; ``"split"`` sums the
    first ``ZETA_DIRECT_TERMS`` and draws the rest from its exact law.
    """
    if n < 1 or m < 1:
        raise ContractError("need n >= 1 and m >= 1")
    if method not in ("split", "direct"):
        raise ContractError("method must be 'split' or 'direct'")
    out = np.empty(m, dtype=np.float64)
    _terminal_batch(rng.state, n, m, ZETA_DIRECT_TERMS if method == "split" else 0, out)
    return out


def zeta_samples(rng: RandomStream, n_stop: int = 10**6, m: int = 10**4,
                 method: str = "split") -> np.ndarray:
    """m independent draws of T_{n_stop} - log n_stop."""
    if n_stop < 100:
        raise ContractError("need n_stop >= 100")
    return terminal_birth_times(rng, n_stop, m, method) - math.log(n_stop)


def zeta_bias(n_stop: int) -> float:
    """E[T_n] - log n - (Euler-Mascheroni); the finite-n offset of the mean."""
    return expected_birth_time(n_stop) - math.log(n_stop) - EULER_GAMMA


# Kolmogorov-Smirnov

def exp1_cdf(x):
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, -np.expm1(-np.maximum(x, 0.0)), 0.0)


def gumbel_cdf(x):
    return np.exp(-np.exp(-np.asarray(x, dtype=float)))


def uniform_cdf(x):
    return np.clip(np.asarray(x, dtype=float), 0.0, 1.0)


REFERENCE_CDFS = {"exp1": exp1_cdf, "gumbel": gumbel_cdf, "uniform": uniform_cdf}


def kolmogorov_sf(lam: float, terms: int = 100) -> float:
    """P(K > lam) = 2 sum_{j>=1} (-1)^(j-1) exp(-2 j^2 lam^2)."""
    if lam < 0.1:
        return 1.0
    s = 0.0
    for j in range(1, terms + 1):
        s += (-1) ** (j - 1) * math.exp(-2.0 * j * j * lam * lam)
    return min(1.0, max(0.0, 2.0 * s))


def ks_statistic(samples, reference="exp1") -> tuple[float, float]:
    """One-sample KS distance and its asymptotic p-value.

    ``reference`` is a name from ``REFERENCE_CDFS`` or a vectorised CDF.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    m = len(x)
    if m < 8:
        raise ContractError("KS needs at least 8 samples")
    cdf = REFERENCE_CDFS[reference] if isinstance(reference, str) else reference
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, m + 1)
    d = float(max(np.max(i / m - f), np.max(f - (i - 1) / m)))
    return d, kolmogorov_sf(math.sqrt(m) * d)


# particle simulation

@dataclass
class ParticleSet:
    """Multiset of particle positions, stored as counts per depth (position = -depth)."""
    depth_counts: np.ndarray
    t: float
    events: int

    @property
    def size(self) -> int:
        return int(self.depth_counts.sum())

    @property
    def positions(self) -> np.ndarray:
        depths = np.repeat(np.arange(len(self.depth_counts)), self.depth_counts)
        return -depths

    @property
    def min_position(self) -> int:
        return -int(np.flatnonzero(self.depth_counts)[-1])

    @property
    def max_position(self) -> int:
        return -int(np.flatnonzero(self.depth_counts)[0])

    def frontier_size(self) -> int:
        return int(self.depth_counts[-self.min_position])

    def weighted_sum(self, theta: float) -> float:
        """sum_u exp(-theta X_u)."""
        d = np.arange(len(self.depth_counts))
        mask = self.depth_counts > 0
        return float(np.sum(self.depth_counts[mask] * np.exp(theta * d[mask])))


def simulate_yule(rng: RandomStream, horizon: float = math.inf, clock: RandomStream | None = None,
                  max_events: int | None = None, population_cap: int = POPULATION_CAP) -> ParticleSet:
    """Run the Yule tree to ``horizon`` (or until ``max_events`` births).

    Branching choices come from ``rng``; waiting times from ``clock``
    (default: an independent substream of ``rng``).
    """
    if horizon < 0:
        raise ContractError("horizon must be >= 0")
    if math.isinf(horizon) and max_events is None:
        raise ContractError("an infinite horizon needs max_events")
    if clock is None:
        clock = rng.substream(1)
    cap_events = population_cap - 1 if max_events is None else min(max_events, population_cap - 1)
    counts = np.zeros(64, dtype=np.int64)
    counts[0] = 1
    t_state = np.array([0.0, 0.0, 1.0, 0.0])
    while True:
        status = _yule_run(rng.state, clock.state, float(horizon), cap_events, counts, t_state)
        if status == 1:
            counts = np.concatenate([counts, np.zeros_like(counts)])
            continue
        break
    if status == 2 or (int(t_state[1]) >= cap_events and (max_events is None or max_events > cap_events)):
        raise ResourceLimitError(f"population cap {population_cap} reached")
    top = int(t_state[3])
    return ParticleSet(counts[: top + 1].copy(), float(t_state[0]), int(t_state[1]))


def psi_mc_estimate(theta: float, trials: int, rng: RandomStream) -> tuple[float, float]:
    """Monte Carlo mean and standard error of sum_{u in N(1)} exp(-theta X_u(1))."""
    lo, hi = PSI_THETA_RANGE
    if not lo <= theta <= hi:
        raise NumericalRangeError(f"theta={theta} outside the safe range {PSI_THETA_RANGE}")
    if trials < 2:
        raise ContractError("need at least 2 trials")
    mean, m2 = _psi_trials(rng.state, float(theta), int(trials), 1.0)
    if not (math.isfinite(mean) and math.isfinite(m2)):
        raise NumericalRangeError("weighted sum overflowed")
    var = m2 / (trials - 1)
    return float(mean), math.sqrt(var / trials)

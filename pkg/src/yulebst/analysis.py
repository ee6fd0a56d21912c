"""Ensemble statistics, fringe tracking and the frontier / hitting-time checks.

Running extrema after a burn-in are finite-horizon proxies for the liminf and
limsup of the recentred statistics. log log n is about 3 even at n = 1e9, so
no extrapolation is attempted.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numba as nb
import numpy as np

from .constants import ConstantsSet, default_constants, recentre_height, recentre_saturation
from .errors import ContractError, ResourceLimitError
from .profile import (
    CheckpointSchedule,
    LevelProfile,
    TrajectoryRecord,
    _advance_tracked,
    _frontier_verdict,
    checkpoint_schedule,
    new_profile,
    observables,
    run_trajectory,
)
from .rng import RandomStream, exponential

QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)
FRINGE_FIELDS = ("n", "F", "F_minus1", "F_minus2")


def recentre(record: TrajectoryRecord, const: ConstantsSet | None = None) -> TrajectoryRecord:
    """Fill the recentred columns of ``record`` (left empty below n = 3)."""
    if record.n >= 3:
        record.R_height = recentre_height(record.n, record.H, const)
        record.R_saturation = recentre_saturation(record.n, record.h, const)
    return record


def recentred_trajectory(rng: RandomStream, n_max: int, schedule: CheckpointSchedule,
                         step_budget: int | None = None) -> Iterable[TrajectoryRecord]:
    const = default_constants()
    for rec in run_trajectory(rng, n_max, schedule, step_budget):
        yield recentre(rec, const)


def running_extrema(values: Sequence[float], burn_in: float = 0.1) -> tuple[float, float]:
    """(min, max) of ``values`` after dropping the first ``burn_in`` fraction."""
    if not 0 <= burn_in < 1:
        raise ContractError("burn_in must lie in [0, 1)")
    vals = list(values)
    kept = vals[int(math.floor(burn_in * len(vals))):]
    if not kept:
        raise ContractError("no values left after burn-in")
    return min(kept), max(kept)


# ensembles

@dataclass
class EnsembleConfig:
    n_max: int = 10**6
    members: int = 200
    base_seed: int = 0
    ratio: float = 1.05
    burn_in: float = 0.1
    jobs: int = 1


@dataclass
class EnsembleSummary:
    """Per-checkpoint moments and raw values of the recentred statistics.

    Moments are pooled with Chan's parallel update, so merging member
    summaries is order independent up to floating reassociation. Raw values
    are kept keyed by member so quantiles are exact after any merge order.
    """
    n_grid: list[int]
    count: int = 0
    mean: dict = field(default_factory=dict)
    m2: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)       # member -> {stat: array}
    extrema: dict = field(default_factory=dict)      # member -> {stat: (min, max)}
    base_seed: int = 0
    complete: bool = True

    STATS = ("R_height", "R_saturation")

    @classmethod
    def from_member(cls, member: int, n_grid: list[int], series: dict, burn_in: float,
                    base_seed: int = 0) -> "EnsembleSummary":
        s = cls(list(n_grid), 1, base_seed=base_seed)
        s.values[member] = {}
        s.extrema[member] = {}
        for stat in cls.STATS:
            arr = np.asarray(series[stat], dtype=float)
            s.mean[stat] = arr.copy()
            s.m2[stat] = np.zeros_like(arr)
            s.values[member][stat] = arr
            s.extrema[member][stat] = running_extrema(arr, burn_in)
        return s

    def merge(self, other: "EnsembleSummary") -> "EnsembleSummary":
        if self.n_grid != other.n_grid:
            raise ContractError("cannot merge summaries on different grids")
        if set(self.values) & set(other.values):
            raise ContractError("member sets overlap")
        na, nb_ = self.count, other.count
        out = EnsembleSummary(list(self.n_grid), na + nb_, base_seed=self.base_seed,
                              complete=self.complete and other.complete)
        for stat in self.STATS:
            delta = other.mean[stat] - self.mean[stat]
            out.mean[stat] = self.mean[stat] + delta * (nb_ / (na + nb_))
            out.m2[stat] = self.m2[stat] + other.m2[stat] + delta**2 * (na * nb_ / (na + nb_))
        out.values = {**self.values, **other.values}
        out.extrema = {**self.extrema, **other.extrema}
        return out

    @property
    def members(self) -> list[int]:
        return sorted(self.values)

    def variance(self, stat: str) -> np.ndarray:
        if self.count < 2:
            return np.zeros_like(self.mean[stat])
        return self.m2[stat] / (self.count - 1)

    def quantiles(self, stat: str, qs: Sequence[float] = QUANTILES) -> np.ndarray:
        """Array of shape (len(qs), len(n_grid)), sorted along the first axis."""
        mat = np.vstack([self.values[m][stat] for m in self.members])
        return np.quantile(mat, qs, axis=0)

    def final_mean(self, stat: str) -> float:
        return float(self.mean[stat][-1])

    def gap_fraction(self, stat: str) -> float:
        """Share of members whose running min is strictly below their running max."""
        gaps = [bool(lo < hi) for lo, hi in (self.extrema[m][stat] for m in self.members)]
        return sum(gaps) / len(gaps)

    def as_dict(self) -> dict:
        out = {"n_grid": self.n_grid, "members": self.count, "base_seed": self.base_seed,
               "stream_indices": self.members, "complete": self.complete, "quantile_levels": list(QUANTILES)}
        for stat in self.STATS:
            out[stat] = {
                "mean": self.mean[stat].tolist(),
                "variance": self.variance(stat).tolist(),
                "quantiles": self.quantiles(stat).tolist(),
                "running_min": [self.extrema[m][stat][0] for m in self.members],
                "running_max": [self.extrema[m][stat][1] for m in self.members],
                "gap_fraction": self.gap_fraction(stat),
            }
        return out

    def to_json(self) -> str:
        return json.dumps(self.as_dict())


def _member_summary(args) -> EnsembleSummary:
    member, config = args
    schedule = checkpoint_schedule(config.n_max, config.ratio)
    grid = [t for t in schedule.targets if t >= 3]
    series = {"R_height": [], "R_saturation": []}
    for rec in recentred_trajectory(RandomStream(config.base_seed, member), config.n_max, schedule):
        if rec.n >= 3:
            series["R_height"].append(rec.R_height)
            series["R_saturation"].append(rec.R_saturation)
    return EnsembleSummary.from_member(member, grid, series, config.burn_in, config.base_seed)


def ensemble_run(config: EnsembleConfig) -> EnsembleSummary:
    """Independent trajectories on stream indices 0..members-1, folded in index order."""
    if config.members < 1:
        raise ContractError("members must be >= 1")
    if config.n_max < 3:
        raise ContractError("n_max must be >= 3")
    tasks = [(m, config) for m in range(config.members)]
    parts: list[EnsembleSummary] = []
    try:
        if config.jobs > 1:
            with ProcessPoolExecutor(max_workers=config.jobs) as pool:
                parts = list(pool.map(_member_summary, tasks))
        else:
            for t in tasks:
                parts.append(_member_summary(t))
    except ResourceLimitError as exc:
        if parts:
            partial = _fold(parts)
            partial.complete = False
            exc.partial = partial
        raise
    return _fold(parts)


def _fold(parts: list[EnsembleSummary]) -> EnsembleSummary:
    parts = sorted(parts, key=lambda s: s.members[0])
    out = parts[0]
    for p in parts[1:]:
        out = out.merge(p)
    return out


# fringe tracking

@dataclass
class FringeStats:
    """Per-step diagnostics folded over every state n >= 2 of a run."""
    min_F: int
    max_F: int
    steps_with_F2: int
    lemma_pass: int
    lemma_fail: int
    lemma_not_applicable: int
    first_hits: dict


@dataclass
class FringeTrace:
    window: int
    rows: list[tuple[int, ...]] = field(default_factory=list)
    stats: FringeStats | None = None

    def write_csv(self, fh: IO[str]) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["n", "F"] + [f"F_minus{i}" for i in range(1, self.window)]
        writer.writerow(header)
        for row in self.rows:
            writer.writerow(row)


def _near_frontier(profile: LevelProfile, window: int) -> tuple[int, ...]:
    top = profile.max_level
    return tuple(int(profile.counts[top - i]) if top - i >= 0 else 0 for i in range(window))


class _Tracker:
    """Drives a profile with the tracked kernel and exposes its fold."""

    def __init__(self, rng: RandomStream, k_max: int = 0):
        self.rng = rng
        self.profile = new_profile()
        self.track = np.array([np.iinfo(np.int64).max, 0, 0, 0, 0, 0], dtype=np.int64)
        self.hits = np.full(k_max + 1, -1, dtype=np.int64)

    def advance_to(self, n_target: int) -> None:
        p = self.profile
        while p.n < n_target:
            p.ensure_headroom()
            _advance_tracked(p.counts, p.tree, p.meta, self.rng.state, n_target, self.track, self.hits)

    def stats(self) -> FringeStats:
        t = [int(x) for x in self.track]
        hits = {2 * k: (int(self.hits[k]) if self.hits[k] >= 0 else None)
                for k in range(1, len(self.hits))}
        return FringeStats(t[0] if t[1] > 0 else 0, t[1], t[2], t[3], t[4], t[5], hits)


def fringe_trace(rng: RandomStream, n_max: int, window: int = 3,
                 schedule: CheckpointSchedule | None = None, k_max: int = 0,
                 sink=None) -> FringeTrace:
    """Counts at levels H, H-1, ..., H-window+1 at each checkpoint n >= 2.

    ``sink``, if given, is called with every row as soon as it is produced.
    """
    if n_max < 2 or window < 1:
        raise ContractError("need n_max >= 2 and window >= 1")
    if schedule is None:
        schedule = checkpoint_schedule(n_max, 1.05)
    tracker = _Tracker(rng, k_max)
    trace = FringeTrace(window)
    for target in schedule.targets:
        if target > n_max:
            break
        if target < 2:
            continue
        tracker.advance_to(target)
        row = (tracker.profile.n,) + _near_frontier(tracker.profile, window)
        trace.rows.append(row)
        if sink is not None:
            sink(row)
    tracker.advance_to(n_max)
    trace.stats = tracker.stats()
    return trace


def frontier_lemma_check(profile: LevelProfile) -> str:
    """Is some non-frontier leaf within floor(log2 F) levels of the frontier?

    Only applies when the frontier is deeper than floor(log2 F).
    """
    if profile.n < 2:
        raise ContractError("needs n >= 2")
    v = int(_frontier_verdict(profile.counts, profile.max_level))
    return {1: "pass", 0: "fail", -1: "not-applicable"}[v]


@dataclass
class HittingTimes:
    times: dict  # 2k -> first n, or None

    def to_json(self) -> str:
        return json.dumps({str(k): v for k, v in sorted(self.times.items())})


def fringe_hitting_times(rng: RandomStream, n_max: int, k_max: int) -> HittingTimes:
    """First n at which F = 2k with H > floor(log2 2k), for k = 1..k_max."""
    if n_max < 2 or k_max < 1:
        raise ContractError("need n_max >= 2 and k_max >= 1")
    tracker = _Tracker(rng, k_max)
    tracker.advance_to(n_max)
    return HittingTimes(tracker.stats().first_hits)


def _race_depth(k: int) -> int:
    return (2 * k).bit_length() - 1


def gamma_lower_bound(k: int) -> float:
    """P(sum of floor(log2 2k) unit exponentials < min of 2k unit exponentials).

    The minimum is Exp(2k), so this is the Laplace transform of a
    Gamma(floor(log2 2k)) variable at 2k: (1 + 2k) ** -floor(log2 2k).
    """
    if k < 1:
        raise ContractError("k must be >= 1")
    return (1.0 + 2 * k) ** -_race_depth(k)


@nb.njit(cache=True)
def _race(state, m, k2, trials):
    wins = 0
    for _ in range(trials):
        s = 0.0
        for _ in range(m):
            s += exponential(state)
        low = np.inf
        for _ in range(k2):
            e = exponential(state)
            if e < low:
                low = e
        if s < low:
            wins += 1
    return wins


def gamma_mc(k: int, trials: int, rng: RandomStream) -> tuple[float, float]:
    """Monte Carlo frequency of the race in ``gamma_lower_bound`` and its s.e."""
    if k < 1 or trials < 1:
        raise ContractError("need k >= 1 and trials >= 1")
    wins = int(_race(rng.state, _race_depth(k), 2 * k, trials))
    p = wins / trials
    return p, math.sqrt(max(p * (1 - p), 0.0) / trials)

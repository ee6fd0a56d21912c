"""Random BST growth on the compressed level profile.

Only the number of leaves at each depth is kept. Expanding a uniformly chosen
leaf at depth j moves one unit of mass from level j to two units at j + 1, so
the per-level leaf counts form a Markov chain, and (H, h, F) are read off it:

    H = deepest occupied level, h = shallowest occupied level, F = counts[H].

h equals the minimum leaf depth because every level above the shallowest leaf
is fully internal. The coupled Yule process is usually written with
``-S(T_n) = h_n + 1``; on this model ``-S(T_n) = h_n`` (n = 2 has both
particles at -1 and h_2 = 1), and h is computed from the tree definition.

Leaf levels are sampled through a Fenwick (binary indexed) tree over levels,
so one step costs O(log depth).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Sequence

import numba as nb
import numpy as np

from .errors import ConfigError, ContractError, ResourceLimitError
from .rng import RandomStream, uniform_int

INITIAL_CAPACITY = 64
MAX_CAPACITY = 1 << 16

# meta layout
_N, _MIN, _MAX = 0, 1, 2


@nb.njit(cache=True)
def _fen_add(tree, level, delta):
    i = level + 1
    size = tree.shape[0] - 1
    while i <= size:
        tree[i] += delta
        i += i & (-i)


@nb.njit(cache=True)
def _fen_search(tree, u):
    """Smallest level whose cumulative leaf count reaches u (1-based)."""
    size = tree.shape[0] - 1
    pos = 0
    bit = 1
    while bit * 2 <= size:
        bit *= 2
    rem = u
    while bit > 0:
        nxt = pos + bit
        if nxt <= size and tree[nxt] < rem:
            pos = nxt
            rem -= tree[nxt]
        bit //= 2
    return pos


@nb.njit(cache=True)
def _fen_build(counts, tree):
    size = counts.shape[0]
    tree[:] = 0
    for i in range(1, size + 1):
        tree[i] += counts[i - 1]
        j = i + (i & (-i))
        if j <= size:
            tree[j] += tree[i]


@nb.njit(cache=True)
def _apply(counts, tree, meta, level):
    counts[level] -= 1
    counts[level + 1] += 2
    _fen_add(tree, level, -1)
    _fen_add(tree, level + 1, 2)
    meta[_N] += 1
    if level == meta[_MAX]:
        meta[_MAX] = level + 1
    if level == meta[_MIN] and counts[level] == 0:
        meta[_MIN] = level + 1


@nb.njit(cache=True)
def _step_once(counts, tree, meta, state):
    u = uniform_int(state, meta[_N])
    level = _fen_search(tree, u)
    _apply(counts, tree, meta, level)
    return level


@nb.njit(cache=True)
def _advance(counts, tree, meta, state, n_target):
    """Step until n == n_target or the level buffer is nearly full."""
    limit = counts.shape[0] - 2
    n = meta[_N]
    lo = meta[_MIN]
    hi = meta[_MAX]
    while n < n_target and hi < limit:
        level = _fen_search(tree, uniform_int(state, n))
        counts[level] -= 1
        counts[level + 1] += 2
        _fen_add(tree, level, -1)
        _fen_add(tree, level + 1, 2)
        n += 1
        if level == hi:
            hi = level + 1
        if level == lo and counts[level] == 0:
            lo = level + 1
    meta[_N] = n
    meta[_MIN] = lo
    meta[_MAX] = hi


@nb.njit(cache=True)
def _frontier_verdict(counts, top):
    """1 pass, 0 fail, -1 not applicable; see analysis.frontier_lemma_check."""
    f = counts[top]
    d = 0
    while (np.int64(1) << (d + 1)) <= f:
        d += 1
    if top <= d:
        return -1
    for j in range(top - d, top):
        if counts[j] > 0:
            return 1
    return 0


@nb.njit(cache=True)
def _advance_tracked(counts, tree, meta, state, n_target, track, hits):
    """Like ``_advance`` but folds per-step fringe diagnostics into ``track``.

    track: [min F over n >= 2, max F, #steps with F == 2,
            lemma passes, lemma failures, lemma not-applicable]
    hits[k]: first n with F == 2k and H > floor(log2(2k)), -1 if unseen.
    """
    limit = counts.shape[0] - 2
    k_max = hits.shape[0] - 1
    while meta[_N] < n_target and meta[_MAX] < limit:
        _step_once(counts, tree, meta, state)
        top = meta[_MAX]
        f = counts[top]
        if f < track[0]:
            track[0] = f
        if f > track[1]:
            track[1] = f
        if f == 2:
            track[2] += 1
        v = _frontier_verdict(counts, top)
        if v == 1:
            track[3] += 1
        elif v == 0:
            track[4] += 1
        else:
            track[5] += 1
        k = f // 2
        if k <= k_max and hits[k] < 0 and v != -1:
            # v != -1 is exactly H > floor(log2(F))
            hits[k] = meta[_N]


class LevelProfile:
    """Leaf counts per depth of a random BST, plus the sampling index."""

    def __init__(self, capacity: int = INITIAL_CAPACITY):
        self.counts = np.zeros(capacity, dtype=np.int64)
        self.tree = np.zeros(capacity + 1, dtype=np.int64)
        self.meta = np.zeros(3, dtype=np.int64)

    @classmethod
    def from_counts(cls, counts: Sequence[int]) -> "LevelProfile":
        counts = [int(c) for c in counts]
        if any(c < 0 for c in counts) or sum(counts) < 1:
            raise ContractError("counts must be non-negative with positive total")
        for j, c in enumerate(counts):
            if c > 2**j:
                raise ContractError(f"level {j} holds {c} > 2**{j} leaves")
        capacity = INITIAL_CAPACITY
        while capacity < len(counts) + 2:
            capacity *= 2
        prof = cls(capacity)
        prof.counts[: len(counts)] = counts
        _fen_build(prof.counts, prof.tree)
        occupied = [j for j, c in enumerate(counts) if c > 0]
        prof.meta[:] = (sum(counts), occupied[0], occupied[-1])
        return prof

    @property
    def n(self) -> int:
        return int(self.meta[_N])

    @property
    def min_level(self) -> int:
        return int(self.meta[_MIN])

    @property
    def max_level(self) -> int:
        return int(self.meta[_MAX])

    @property
    def capacity(self) -> int:
        return self.counts.shape[0]

    def level_counts(self) -> list[int]:
        """Counts trimmed to ``[0..max_level]``."""
        return [int(c) for c in self.counts[: self.max_level + 1]]

    def copy(self) -> "LevelProfile":
        other = LevelProfile(self.capacity)
        other.counts[:] = self.counts
        other.tree[:] = self.tree
        other.meta[:] = self.meta
        return other

    def ensure_headroom(self) -> None:
        """Grow the level buffer geometrically when the frontier nears its end."""
        if self.max_level < self.capacity - 2:
            return
        new_cap = self.capacity * 2
        if new_cap > MAX_CAPACITY:
            raise ResourceLimitError(f"depth capacity {MAX_CAPACITY} exhausted")
        counts = np.zeros(new_cap, dtype=np.int64)
        counts[: self.capacity] = self.counts
        self.counts = counts
        self.tree = np.zeros(new_cap + 1, dtype=np.int64)
        _fen_build(self.counts, self.tree)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LevelProfile):
            return NotImplemented
        return self.level_counts() == other.level_counts()

    def __repr__(self) -> str:
        return f"LevelProfile(counts={self.level_counts()}, n={self.n})"


@dataclass(frozen=True)
class StepOutcome:
    chosen_level: int
    new_H: int
    new_h: int
    new_F: int


@dataclass(frozen=True)
class CheckpointSchedule:
    targets: tuple[int, ...]
    ratio: float

    def __post_init__(self):
        if not self.targets or self.targets[0] < 1:
            raise ConfigError("targets must start at n >= 1")
        if any(b <= a for a, b in zip(self.targets, self.targets[1:])):
            raise ConfigError("targets must be strictly increasing")

    def __len__(self) -> int:
        return len(self.targets)


@dataclass
class TrajectoryRecord:
    n: int
    H: int
    h: int
    F: int
    R_height: float | None = None
    R_saturation: float | None = None


CSV_FIELDS = ("n", "H", "h", "F", "R_height", "R_saturation")


def new_profile() -> LevelProfile:
    return LevelProfile.from_counts([1])


def observables(profile: LevelProfile) -> tuple[int, int, int]:
    """(H, h, F) of the tree behind ``profile``."""
    top = profile.max_level
    return top, profile.min_level, int(profile.counts[top])


def sample_leaf_level(profile: LevelProfile, u: int) -> int:
    """Level of the u-th leaf when leaves are ordered by depth (1-based u)."""
    if not 1 <= u <= profile.n:
        raise ContractError(f"u={u} outside [1, {profile.n}]")
    return int(_fen_search(profile.tree, np.int64(u)))


def step(profile: LevelProfile, rng: RandomStream) -> StepOutcome:
    """Expand one uniformly chosen leaf in place."""
    profile.ensure_headroom()
    level = int(_step_once(profile.counts, profile.tree, profile.meta, rng.state))
    H, h, F = observables(profile)
    return StepOutcome(level, H, h, F)


def advance_to(profile: LevelProfile, rng: RandomStream, n_target: int) -> None:
    """Step ``profile`` until it has ``n_target`` leaves (no-op if already there)."""
    while profile.n < n_target:
        profile.ensure_headroom()
        _advance(profile.counts, profile.tree, profile.meta, rng.state, n_target)


def checkpoint_schedule(n_max: int, ratio: float) -> CheckpointSchedule:
    """Geometric checkpoints ``{1} U {ceil(ratio**k)} U {n_max}`` within [1, n_max]."""
    if n_max < 1:
        raise ConfigError("n_max must be >= 1")
    if not ratio > 1:
        raise ConfigError("ratio must be > 1")
    targets = {1, n_max}
    k = 0
    while True:
        t = math.ceil(ratio**k)
        if t > n_max:
            break
        if t >= 2:
            targets.add(t)
        k += 1
    return CheckpointSchedule(tuple(sorted(targets)), float(ratio))


def run_trajectory(
    rng: RandomStream,
    n_max: int,
    schedule: CheckpointSchedule | None = None,
    step_budget: int | None = None,
) -> Iterator[TrajectoryRecord]:
    """Grow one tree to ``n_max`` leaves, yielding a record at each target.

    Targets beyond ``n_max`` are ignored. With ``step_budget`` set, records up
    to the budget are yielded before ``ResourceLimitError`` is raised.
    """
    if n_max < 1:
        raise ConfigError("n_max must be >= 1")
    if schedule is None:
        schedule = CheckpointSchedule((n_max,), 2.0)
    limit = n_max if step_budget is None else min(n_max, step_budget + 1)
    profile = new_profile()
    for target in schedule.targets:
        if target > n_max:
            break
        if target > limit:
            raise ResourceLimitError(
                f"step budget {step_budget} reached at n={profile.n} before n_max={n_max}")
        advance_to(profile, rng, target)
        yield TrajectoryRecord(profile.n, *observables(profile))


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(float(value)) if isinstance(value, float) else str(value)


def write_records_csv(records: Iterable[TrajectoryRecord], fh: IO[str]) -> int:
    """Stream records as CSV, flushing after each row. Returns rows written."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    fh.flush()
    rows = 0
    for rec in records:
        writer.writerow([_fmt(getattr(rec, f)) for f in CSV_FIELDS])
        fh.flush()
        rows += 1
    return rows


def read_records_csv(fh: IO[str]) -> list[TrajectoryRecord]:
    out = []
    for row in csv.DictReader(fh):
        out.append(TrajectoryRecord(
            int(row["n"]), int(row["H"]), int(row["h"]), int(row["F"]),
            float(row["R_height"]) if row["R_height"] else None,
            float(row["R_saturation"]) if row["R_saturation"] else None,
        ))
    return out

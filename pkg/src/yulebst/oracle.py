"""Ground truth for the profile simulator.

Two independent routes: an explicit tree that stores every node and reads
the saturation level off the node set, and an exact dynamic program over
level profiles in rational arithmetic. The explicit tree does not know about
keys; growing by uniform leaf expansion gives the same (H, h, F) law as
inserting a uniformly random permutation.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numba as nb
import numpy as np
from scipy import stats

from .errors import ContractError, ResourceLimitError
from .profile import _advance, new_profile
from .rng import RandomStream, seed_state, uniform_int

EXPLICIT_CAP = 10**6
EXACT_CAP = 12
STATISTICS = ("H", "h", "F", "joint")


@nb.njit(cache=True)
def _grow(state, n, depth, is_leaf, left, leaves):
    """Grow an explicit tree in preallocated arrays (2n - 1 nodes, n leaves)."""
    depth[0] = 0
    is_leaf[0] = True
    left[0] = -1
    leaves[0] = 0
    nodes = 1
    for k in range(1, n):
        u = uniform_int(state, k)
        parent = leaves[u - 1]
        is_leaf[parent] = False
        left[parent] = nodes
        for c in range(2):
            depth[nodes + c] = depth[parent] + 1
            is_leaf[nodes + c] = True
            left[nodes + c] = -1
        leaves[u - 1] = nodes
        leaves[k] = nodes + 1
        nodes += 2
    return nodes


@nb.njit(cache=True)
def _explicit_observables(depth, is_leaf, nodes):
    top = 0
    for i in range(nodes):
        if depth[i] > top:
            top = depth[i]
    per_level = np.zeros(top + 2, dtype=np.int64)
    fringe = 0
    shallowest_leaf = top
    for i in range(nodes):
        per_level[depth[i]] += 1
        if is_leaf[i]:
            if depth[i] == top:
                fringe += 1
            if depth[i] < shallowest_leaf:
                shallowest_leaf = depth[i]
    sat = 0
    while sat + 1 <= top and per_level[sat + 1] == (np.int64(1) << (sat + 1)):
        sat += 1
    return top, sat, fringe, shallowest_leaf


@nb.njit(cache=True)
def _explicit_trials(seed, n, trials, out):
    """out[t] = (H, h, F) of trial t on stream (seed, t); returns h mismatches."""
    size = 2 * n - 1
    depth = np.empty(size, dtype=np.int64)
    is_leaf = np.empty(size, dtype=np.bool_)
    left = np.empty(size, dtype=np.int64)
    leaves = np.empty(n, dtype=np.int64)
    state = np.empty(4, dtype=np.uint64)
    mismatches = 0
    for t in range(trials):
        seed_state(seed, np.uint64(t), state)
        nodes = _grow(state, n, depth, is_leaf, left, leaves)
        top, sat, fringe, shallow = _explicit_observables(depth, is_leaf, nodes)
        out[t, 0] = top
        out[t, 1] = sat
        out[t, 2] = fringe
        if sat != shallow:
            mismatches += 1
    return mismatches


@nb.njit(cache=True)
def _profile_trials(seed, n, trials, capacity, out):
    counts = np.zeros(capacity, dtype=np.int64)
    tree = np.zeros(capacity + 1, dtype=np.int64)
    meta = np.zeros(3, dtype=np.int64)
    state = np.empty(4, dtype=np.uint64)
    for t in range(trials):
        counts[:] = 0
        tree[:] = 0
        counts[0] = 1
        # Fenwick entries covering level 0
        i = 1
        while i <= capacity:
            tree[i] = 1
            i += i & (-i)
        meta[0] = 1
        meta[1] = 0
        meta[2] = 0
        seed_state(seed, np.uint64(t), state)
        _advance(counts, tree, meta, state, n)
        out[t, 0] = meta[2]
        out[t, 1] = meta[1]
        out[t, 2] = counts[meta[2]]


@dataclass
class ExplicitTree:
    depth: np.ndarray
    is_leaf: np.ndarray
    left: np.ndarray
    leaves: np.ndarray
    n: int

    @property
    def node_count(self) -> int:
        return 2 * self.n - 1

    def leaf_depths(self) -> list[int]:
        return sorted(int(self.depth[i]) for i in self.leaves)

    def children(self, node: int) -> tuple[int, int] | None:
        c = int(self.left[node])
        return None if c < 0 else (c, c + 1)


def grow_explicit(rng: RandomStream, n: int) -> ExplicitTree:
    if n < 1:
        raise ContractError("n must be >= 1")
    if n > EXPLICIT_CAP:
        raise ResourceLimitError(f"explicit trees are capped at {EXPLICIT_CAP} leaves")
    size = 2 * n - 1
    depth = np.empty(size, dtype=np.int64)
    is_leaf = np.empty(size, dtype=np.bool_)
    left = np.empty(size, dtype=np.int64)
    leaves = np.empty(n, dtype=np.int64)
    _grow(rng.state, n, depth, is_leaf, left, leaves)
    return ExplicitTree(depth, is_leaf, left, leaves, n)


def observables_explicit(tree: ExplicitTree) -> tuple[int, int, int]:
    """(H, h, F) with h taken from per-level node counts, not from leaf depths."""
    top, sat, fringe, _ = _explicit_observables(tree.depth, tree.is_leaf, tree.node_count)
    return int(top), int(sat), int(fringe)


# exact laws

def _key(statistic: str, counts: tuple[int, ...]):
    top = len(counts) - 1
    lo = next(j for j, c in enumerate(counts) if c)
    obs = (top, lo, counts[top])
    if statistic == "joint":
        return obs
    return obs["HhF".index(statistic)]


@lru_cache(maxsize=None)
def reachable_profiles(n: int) -> dict[tuple[int, ...], Fraction]:
    """Exact law of the level profile after n leaves, keyed by trimmed counts."""
    if n < 1:
        raise ContractError("n must be >= 1")
    if n > EXACT_CAP:
        raise ResourceLimitError(f"exact enumeration is capped at n={EXACT_CAP}")
    if n == 1:
        return {(1,): Fraction(1)}
    out: dict[tuple[int, ...], Fraction] = {}
    for counts, p in reachable_profiles(n - 1).items():
        for j, c in enumerate(counts):
            if not c:
                continue
            nxt = list(counts) + [0]
            nxt[j] -= 1
            nxt[j + 1] += 2
            while nxt[-1] == 0:
                nxt.pop()
            key = tuple(nxt)
            out[key] = out.get(key, Fraction(0)) + p * Fraction(c, n - 1)
    return out


@dataclass
class DistributionTable:
    n: int
    statistic: str
    entries: dict = field(default_factory=dict)

    def total(self) -> Fraction:
        return sum(self.entries.values(), Fraction(0))

    def to_json(self) -> str:
        rows = []
        for value in sorted(self.entries):
            v = list(value) if isinstance(value, tuple) else value
            rows.append({"value": v, "p": str(self.entries[value])})
        return json.dumps({"n": self.n, "statistic": self.statistic, "entries": rows})

    @classmethod
    def from_json(cls, text: str) -> "DistributionTable":
        obj = json.loads(text)
        entries = {}
        for row in obj["entries"]:
            v = tuple(row["value"]) if isinstance(row["value"], list) else row["value"]
            entries[v] = Fraction(row["p"])
        return cls(obj["n"], obj["statistic"], entries)


def exact_distribution(n: int, statistic: str) -> DistributionTable:
    if statistic not in STATISTICS:
        raise ContractError(f"statistic must be one of {STATISTICS}")
    if n < 1:
        raise ContractError("n must be >= 1")
    table = DistributionTable(n, statistic)
    for counts, p in reachable_profiles(n).items():
        key = _key(statistic, counts)
        table.entries[key] = table.entries.get(key, Fraction(0)) + p
    return table


def enumerate_sequences(n: int, statistic: str) -> DistributionTable:
    """Brute force over every leaf-choice sequence, each leaf its own branch."""
    if n > 7:
        raise ResourceLimitError("sequence enumeration is limited to n <= 7")
    table = DistributionTable(n, statistic)

    def walk(leaf_depths: list[int], p: Fraction):
        k = len(leaf_depths)
        if k == n:
            top = max(leaf_depths)
            counts = [0] * (top + 1)
            for d in leaf_depths:
                counts[d] += 1
            key = _key(statistic, tuple(counts))
            table.entries[key] = table.entries.get(key, Fraction(0)) + p
            return
        for i, d in enumerate(leaf_depths):
            walk(leaf_depths[:i] + leaf_depths[i + 1:] + [d + 1, d + 1], p / k)

    walk([0], Fraction(1))
    return table


# simulator comparison

@dataclass
class ComparisonReport:
    n: int
    trials: int
    profile_counts: dict
    explicit_counts: dict
    p_profile_vs_exact: dict
    p_explicit_vs_exact: dict
    p_profile_vs_explicit: dict
    saturation_mismatches: int

    def min_p(self) -> float:
        return min(min(d.values()) for d in
                   (self.p_profile_vs_exact, self.p_explicit_vs_exact, self.p_profile_vs_explicit))


def _tally(samples: np.ndarray, statistic: str) -> dict:
    if statistic == "joint":
        values, counts = np.unique(samples, axis=0, return_counts=True)
        return {tuple(int(x) for x in v): int(c) for v, c in zip(values, counts)}
    values, counts = np.unique(samples[:, "HhF".index(statistic)], return_counts=True)
    return {int(v): int(c) for v, c in zip(values, counts)}


def chi_square_vs_exact(observed: dict, table: DistributionTable) -> float:
    """Goodness-of-fit p-value; observations outside the support give p = 0."""
    if set(observed) - set(table.entries):
        return 0.0
    support = sorted(table.entries)
    if len(support) == 1:
        return 1.0
    total = sum(observed.values())
    f_obs = np.array([observed.get(v, 0) for v in support], dtype=float)
    f_exp = np.array([float(table.entries[v]) * total for v in support])
    return float(stats.chisquare(f_obs, f_exp).pvalue)


def chi_square_two_sample(a: dict, b: dict) -> float:
    support = sorted(set(a) | set(b))
    if len(support) == 1:
        return 1.0
    table = np.array([[a.get(v, 0) for v in support], [b.get(v, 0) for v in support]])
    return float(stats.chi2_contingency(table, correction=False).pvalue)


def simulate_profile_trials(rng: RandomStream, n: int, trials: int) -> np.ndarray:
    """(trials, 3) array of (H, h, F) from independent profile-core runs."""
    capacity = 64
    while capacity < n + 2:
        capacity *= 2
    out = np.empty((trials, 3), dtype=np.int64)
    _profile_trials(np.uint64(rng.seed), n, trials, capacity, out)
    return out


def simulate_explicit_trials(rng: RandomStream, n: int, trials: int) -> tuple[np.ndarray, int]:
    out = np.empty((trials, 3), dtype=np.int64)
    mism = _explicit_trials(np.uint64(rng.seed), n, trials, out)
    return out, int(mism)


def compare_simulators(n: int, trials: int, rng: RandomStream) -> ComparisonReport:
    """Chi-square both simulators against the exact law and each other."""
    if n > EXACT_CAP:
        raise ResourceLimitError(f"exact comparison is capped at n={EXACT_CAP}")
    prof_rng = rng.substream(0)
    expl_rng = rng.substream(1)
    prof = simulate_profile_trials(prof_rng, n, trials)
    expl, mism = simulate_explicit_trials(expl_rng, n, trials)
    pc, ec, pv_p, pv_e, pv_pe = {}, {}, {}, {}, {}
    for s in STATISTICS:
        table = exact_distribution(n, s)
        pc[s] = _tally(prof, s)
        ec[s] = _tally(expl, s)
        pv_p[s] = chi_square_vs_exact(pc[s], table)
        pv_e[s] = chi_square_vs_exact(ec[s], table)
        pv_pe[s] = chi_square_two_sample(pc[s], ec[s])
    return ComparisonReport(n, trials, pc, ec, pv_p, pv_e, pv_pe, mism)

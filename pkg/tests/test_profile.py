import io
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from yulebst.errors import ConfigError, ContractError, ResourceLimitError
from yulebst.profile import (
    CheckpointSchedule,
    LevelProfile,
    TrajectoryRecord,
    advance_to,
    checkpoint_schedule,
    new_profile,
    observables,
    read_records_csv,
    run_trajectory,
    sample_leaf_level,
    step,
    write_records_csv,
)
from yulebst.rng import RandomStream


def test_new_profile():
    p = new_profile()
    assert p.level_counts() == [1] and p.n == 1
    assert p.min_level == p.max_level == 0
    assert observables(p) == (0, 0, 1)


def test_first_two_steps_are_forced(rng):
    p = new_profile()
    out = step(p, rng)
    assert p.level_counts() == [0, 2] and p.n == 2
    assert out.chosen_level == 0 and (out.new_H, out.new_h, out.new_F) == (1, 1, 2)
    out = step(p, rng)
    assert p.level_counts() == [0, 1, 2] and out.chosen_level == 1


@pytest.mark.parametrize("u,level", [(1, 1), (2, 2), (3, 3), (4, 3)])
def test_sample_leaf_level_cumulative(u, level):
    assert sample_leaf_level(LevelProfile.from_counts([0, 1, 1, 2]), u) == level


def test_sample_leaf_level_single_level():
    p = LevelProfile.from_counts([0, 0, 4])
    assert {sample_leaf_level(p, u) for u in range(1, 5)} == {2}


@pytest.mark.parametrize("u", [0, 5, -1])
def test_sample_leaf_level_out_of_range(u):
    with pytest.raises(ContractError):
        sample_leaf_level(LevelProfile.from_counts([0, 1, 1, 2]), u)


@st.composite
def profiles(draw):
    depth = draw(st.integers(0, 12))
    counts = [draw(st.integers(0, min(2**j, 50))) for j in range(depth + 1)]
    if sum(counts) == 0:
        counts[-1] = 1
    return counts


@given(profiles())
def test_fenwick_sampling_matches_linear_scan(counts):
    p = LevelProfile.from_counts(counts)
    cum = np.cumsum(counts)
    for u in range(1, p.n + 1):
        assert sample_leaf_level(p, u) == int(np.searchsorted(cum, u))


def test_transition_law_from_unbalanced_four():
    # exact: enumerate every u in [1..n]; H rises iff a level-3 leaf is chosen
    p = LevelProfile.from_counts([0, 1, 1, 2])
    rises = sum(sample_leaf_level(p, u) == 3 for u in range(1, p.n + 1))
    assert Fraction(rises, p.n) == Fraction(1, 2)


@pytest.mark.parametrize("counts,obs", [([0, 1, 2], (2, 1, 2)), ([0, 0, 4], (2, 2, 4)), ([1], (0, 0, 1))])
def test_observables(counts, obs):
    assert observables(LevelProfile.from_counts(counts)) == obs


def test_from_counts_rejects_overfull_level():
    with pytest.raises(ContractError):
        LevelProfile.from_counts([0, 3])


@given(st.integers(0, 2**32), st.integers(1, 400))
@settings(max_examples=60, deadline=None)
def test_step_invariants(seed, steps):
    rng = RandomStream(seed)
    p = new_profile()
    H, h, F = observables(p)
    for _ in range(steps):
        n_before = p.n
        out = step(p, rng)
        assert p.n == n_before + 1
        assert sum(p.level_counts()) == p.n
        assert out.new_H - H in (0, 1) and out.new_h - h in (0, 1)
        assert out.new_h <= out.new_H
        assert out.new_F % 2 == 0 and out.new_F >= 2
        counts = p.level_counts()
        assert all(c <= 2**j for j, c in enumerate(counts))
        assert counts[p.min_level] > 0 and counts[p.max_level] > 0
        assert all(c == 0 for c in counts[: p.min_level])
        H, h, F = out.new_H, out.new_h, out.new_F


def test_bulk_advance_matches_single_steps():
    a, b = new_profile(), new_profile()
    ra, rb = RandomStream(99), RandomStream(99)
    for _ in range(5000):
        step(a, ra)
    advance_to(b, rb, 5001)
    assert a == b and a.min_level == b.min_level
    assert ra.next_u64() == rb.next_u64()


def test_capacity_grows_geometrically():
    # a deep caterpillar forces the level buffer to grow
    counts = [0] + [1] * 100 + [2]
    p = LevelProfile.from_counts([c if c <= 2**j else 2**j for j, c in enumerate(counts)])
    cap = p.capacity
    advance_to(p, RandomStream(1), p.n + 50000)
    assert p.capacity >= cap
    assert sum(p.level_counts()) == p.n


def test_checkpoint_schedule_examples():
    assert checkpoint_schedule(10, 2.0).targets == (1, 2, 4, 8, 10)
    assert checkpoint_schedule(1, 1.05).targets == (1,)


def test_checkpoint_schedule_length_at_1e9():
    sched = checkpoint_schedule(10**9, 1.05)
    # independent count: distinct ceil(1.05**k) in [2, 1e9], plus 1 and n_max
    kmax = math.floor(math.log(10**9) / math.log(1.05))
    brute = {math.ceil(1.05**k) for k in range(kmax + 2)} | {1, 10**9}
    brute = {t for t in brute if t <= 10**9}
    assert len(sched) == len(brute)
    # early duplicates make it shorter than log(1e9)/log(1.05) ~ 425
    assert 0.85 * 425 < len(sched) <= 426


@given(st.integers(1, 10**7), st.floats(1.01, 4.0))
@settings(max_examples=80)
def test_checkpoint_schedule_properties(n_max, ratio):
    t = checkpoint_schedule(n_max, ratio).targets
    assert t[0] == 1 and t[-1] == n_max
    assert all(b > a for a, b in zip(t, t[1:]))
    assert all(b <= math.ceil(ratio * a * (1 + 1e-12)) for a, b in zip(t, t[1:]))


@pytest.mark.parametrize("ratio", [1.0, 0.5])
def test_checkpoint_schedule_bad_ratio(ratio):
    with pytest.raises(ConfigError):
        checkpoint_schedule(10, ratio)


def test_schedule_must_increase():
    with pytest.raises(ConfigError):
        CheckpointSchedule((1, 3, 3), 2.0)


def test_run_trajectory_n1():
    recs = list(run_trajectory(RandomStream(1), 1, CheckpointSchedule((1,), 2.0)))
    assert [(r.n, r.H, r.h, r.F) for r in recs] == [(1, 0, 0, 1)]


def test_run_trajectory_n4_support():
    seen = {(r.H, r.h, r.F) for s in range(200)
            for r in run_trajectory(RandomStream(s), 4, CheckpointSchedule((4,), 2.0))}
    assert seen == {(2, 2, 4), (3, 1, 2)}


def test_run_trajectory_deterministic():
    sched = checkpoint_schedule(10**5, 1.1)
    a = list(run_trajectory(RandomStream(5), 10**5, sched))
    b = list(run_trajectory(RandomStream(5), 10**5, sched))
    assert a == b and [r.n for r in a] == list(sched.targets)


def test_run_trajectory_step_budget_yields_prefix():
    sched = checkpoint_schedule(1000, 2.0)
    got = []
    with pytest.raises(ResourceLimitError):
        for rec in run_trajectory(RandomStream(5), 1000, sched, step_budget=100):
            got.append(rec.n)
    assert got == [1, 2, 4, 8, 16, 32, 64]


def test_csv_roundtrip_and_schema():
    recs = [TrajectoryRecord(1, 0, 0, 1), TrajectoryRecord(3, 2, 1, 2, 0.25, -1.5)]
    buf = io.StringIO()
    write_records_csv(recs, buf)
    text = buf.getvalue()
    assert text.splitlines()[0] == "n,H,h,F,R_height,R_saturation"
    assert "\r" not in text and text.splitlines()[1] == "1,0,0,1,,"
    assert read_records_csv(io.StringIO(text)) == recs

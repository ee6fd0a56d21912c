import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from yulebst.rng import RandomStream, _mul128, mix

U64 = st.integers(0, 2**64 - 1)


def test_same_identity_same_sequence():
    a, b = RandomStream(7, 3), RandomStream(7, 3)
    assert [a.next_u64() for _ in range(100)] == [b.next_u64() for _ in range(100)]


def test_distinct_streams_differ():
    a, b, c = RandomStream(7, 0), RandomStream(7, 1), RandomStream(8, 0)
    seqs = [tuple(r.next_u64() for _ in range(4)) for r in (a, b, c)]
    assert len(set(seqs)) == 3


def test_known_first_outputs_are_pinned():
    # freezes the generator identity; a change here breaks reproducibility
    r = RandomStream(0, 0)
    assert [r.next_u64() for _ in range(3)] == [
        18110106563157542208, 8650457082529208451, 3032169436225125478]


def test_negative_stream_index_rejected():
    with pytest.raises(ValueError):
        RandomStream(1, -1)


@given(U64, U64)
def test_mul128_matches_python_ints(a, b):
    hi, lo = _mul128(np.uint64(a), np.uint64(b))
    assert (int(hi) << 64) | int(lo) == a * b


@given(st.integers(0, 2**63), st.integers(1, 2**62))
@settings(max_examples=50)
def test_uniform_int_in_range(seed, n):
    r = RandomStream(seed)
    for _ in range(20):
        assert 1 <= r.uniform_int(n) <= n


@pytest.mark.parametrize("n", [2, 3, 6, 7])
def test_uniform_int_is_uniform(n):
    r = RandomStream(11, n)
    draws = np.array([r.uniform_int(n) for _ in range(30000)])
    counts = np.bincount(draws, minlength=n + 1)[1:]
    assert stats.chisquare(counts).pvalue > 0.001


def test_uniform_int_large_n_upper_half_balanced():
    # for n = 1.5 * 2**62 a plain modulo map leaves only 7/16 of the mass above n/2
    n = 3 * 2**61
    r = RandomStream(5)
    above = sum(r.uniform_int(n) > n // 2 for _ in range(20000))
    assert abs(above - 10000) < 4 * 71


def test_uniform_int_rejects_out_of_range():
    with pytest.raises(ValueError):
        RandomStream(1).uniform_int(2**63)


def test_random_and_exponential_moments():
    r = RandomStream(3)
    u = np.array([r.random() for _ in range(20000)])
    e = np.array([r.exponential() for _ in range(20000)])
    assert 0 <= u.min() and u.max() < 1
    assert stats.kstest(u, "uniform").pvalue > 0.001
    assert stats.kstest(e, "expon").pvalue > 0.001


def test_substream_is_deterministic_and_distinct():
    r = RandomStream(4, 2)
    assert r.substream(1).next_u64() == RandomStream(4, 2).substream(1).next_u64()
    assert r.substream(1).next_u64() != r.substream(2).next_u64()
    assert mix(4, 2) == RandomStream(4, 2).substream(0).seed

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from knapp_cantor.cantor import (EndpointSet, StageMeasure, build_all_stages, build_progression,
                                 check_isolation, child_digits, digits_to_key, keys_to_digits,
                                 read_endpoints, write_endpoints)
from knapp_cantor.params import ParamSequences, derive_exponents


def test_progression_tiny(tiny):
    P1 = build_progression(tiny, 1)
    assert P1.fractions() == [Fraction(9, 8), Fraction(11, 8)]
    P2 = build_progression(tiny, 2)
    assert len(P2) == 2
    assert all(int(k) % 12 == 1 for k in P2.keys)  # digit 1 is the only odd digit when s=1


def test_p_parent_excludes_small_even_digits():
    rng = np.random.default_rng(0)
    for _ in range(50):
        d = child_digits(True, 3, 7, 16, rng)
        assert len(d) == len(set(d)) == 7
        assert {1, 3, 5} <= set(d)
        assert not set(d) & {0, 2, 4, 6}


@pytest.mark.parametrize("seed", range(3))
def test_stage_counts_and_nesting(seq6, seed):
    stages = build_all_stages(seq6, 4, seed)
    for j in range(1, 5):
        P, A, mu = stages[j]
        assert len(P) == seq6.S[j] and len(A) == seq6.T[j]
        assert P.key_set() <= A.key_set()
        parents = {k // seq6.n_(j) for k in A.key_set()}
        assert parents == stages[j - 1][1].key_set()
        assert check_isolation(A, P, seq6)


def test_digit_roundtrip(seq6, stages6):
    A = stages6[3][1]
    digits = keys_to_digits(A.keys, seq6, 3)
    assert [digits_to_key(row, seq6) for row in digits] == [int(k) for k in A.keys]


def test_measure_exact(stages6, seq6):
    mu = stages6[4][2]
    assert mu.total_mass() == 1
    assert mu.interval_mass == Fraction(1, seq6.T[4])
    assert mu.interval_length == Fraction(1, seq6.N[4])


def test_sample_radii_inside(stages6):
    mu = stages6[3][2]
    r = mu.sample_radii(np.random.default_rng(1), 1000)
    idx = np.floor((r - 1) * mu.N).astype(np.int64)
    assert np.isin(idx, mu.A.keys).all()


def test_isolation_detects_neighbour(tiny):
    P = build_progression(tiny, 1)
    keys = np.array(sorted({9, 10, 11, 3}), dtype=np.int64)
    A = EndpointSet(1, "A", 8, keys)
    P_bad = EndpointSet(1, "P", 8, np.array([1, 3], dtype=np.int64))
    assert not check_isolation(A, P_bad)
    assert check_isolation(EndpointSet(1, "A", 8, np.array([1, 3, 6])), P)


def test_endpoint_file_roundtrip(tmp_path, stages6):
    A = stages6[3][1]
    path = tmp_path / "A.txt"
    write_endpoints(path, A, "abc")
    back = read_endpoints(path)
    assert back.N == A.N and np.array_equal(back.keys, A.keys) and back.kind == "A"


def test_deterministic_for_seed(seq6):
    a = build_all_stages(seq6, 3, 7)[3][1]
    b = build_all_stages(seq6, 3, 7)[3][1]
    c = build_all_stages(seq6, 3, 8)[3][1]
    assert np.array_equal(a.keys, b.keys)
    assert not np.array_equal(a.keys, c.keys)


@settings(max_examples=25, deadline=None)
@given(s=st.lists(st.integers(1, 3), min_size=1, max_size=3), extra=st.integers(0, 2),
       seed=st.integers(0, 2 ** 31))
def test_random_instances_are_consistent(s, extra, seed):
    t = [x + extra for x in s]
    n = [2 * x + 2 + (x % 2) for x in t]
    n = [max(m, 2 * (2 * a + 1)) for m, a in zip(n, s)]  # room for 2s+1 banned digits plus the rest
    seq = ParamSequences(derive_exponents(2, 1.5, 1.5), tuple(s), tuple(t), tuple(n))
    if seq.hard_violations():
        return
    stages = build_all_stages(seq, len(s), seed)
    for j in range(1, len(s) + 1):
        P, A, mu = stages[j]
        assert len(A) == seq.T[j] and len(P) == seq.S[j]
        assert mu.total_mass() == 1
        assert check_isolation(A, P)


def test_stage_zero(seq6):
    P0 = build_progression(seq6, 0)
    assert P0.fractions() == [Fraction(1)]


def test_two_odd_digits_when_s_is_two():
    rng = np.random.default_rng(4)
    for _ in range(30):
        d = set(child_digits(True, 2, 4, 12, rng))
        assert {1, 3} <= d and not d & {0, 2, 4}


@pytest.mark.parametrize("seed", range(4))
def test_isolation_with_full_progression(seed):
    # s = t and n = 2s + 2 leaves only the even buffer digits around P
    seq = ParamSequences(derive_exponents(2, 1.5, 1.5), (2, 3), (2, 3), (6, 8))
    for P, A, _ in build_all_stages(seq, 2, seed)[1:]:
        assert check_isolation(A, P, seq)

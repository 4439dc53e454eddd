import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from knapp_cantor.cantor import EndpointSet, build_progression
from knapp_cantor.energy import (BoundViolation, InstanceTooLarge, check_chain, direct_power,
                                 energy_bruteforce, energy_lower_bound, sumset_profile, weighted_energy)
from knapp_cantor.params import ParamSequences, derive_exponents


def test_tiny_energy(tiny):
    P1 = build_progression(tiny, 1)
    prof = sumset_profile(P1, 2)
    assert prof.M == 6 == energy_bruteforce(P1, 2)
    # sums of {9/8, 11/8} pairs: 18/8, 20/8, 22/8 with counts 1, 2, 1
    assert prof.as_dict() == {2: 1, 4: 2, 6: 1}
    assert list(prof.b_scaled) == [18, 20, 22]


def test_direct_power_small():
    g = direct_power([0, 1], 3)
    assert list(g) == [1, 3, 3, 1]


@pytest.mark.parametrize("r", [1, 2, 3])
def test_fft_matches_bruteforce(seq6, r):
    for l in range(0, 3):
        P = build_progression(seq6, l)
        if len(P) ** (2 * r) > 1e7:
            continue
        assert sumset_profile(P, r).M == energy_bruteforce(P, r)


def test_fft_and_direct_agree(seq6):
    P = build_progression(seq6, 3)
    a = sumset_profile(P, 3, method="fft")
    b = sumset_profile(P, 3, method="direct")
    assert a.method == "fft" and b.method == "direct"
    assert np.array_equal(a.counts, b.counts) and a.M == b.M


def test_bruteforce_refuses_large(seq6):
    with pytest.raises(InstanceTooLarge):
        energy_bruteforce(build_progression(seq6, 4), 3)


@pytest.mark.parametrize("r", [2, 3])
def test_chain_holds(seq6, r):
    for l in range(0, 5):
        out = check_chain(sumset_profile(build_progression(seq6, l), r), seq6, l)
        assert out["bound_ok"]


def test_chain_detects_violation(seq6):
    prof = sumset_profile(build_progression(seq6, 2), 2)
    prof.counts = np.ones_like(prof.counts)
    with pytest.raises(BoundViolation):
        check_chain(prof, seq6, 2)


def test_lower_bound_exact(seq6):
    assert energy_lower_bound(seq6, 2, 2) == Fraction(seq6.S[2] ** 3, 16)


def test_weighted_energy_unit_weights(seq6):
    P = build_progression(seq6, 2)
    assert abs(weighted_energy(P, np.ones(len(P)), 2) - sumset_profile(P, 2).M) < 1e-6


def test_object_dtype_path():
    # S^r beyond 2^62 forces Python integers in the direct convolution
    keys = np.arange(0, 40, 2)
    g = direct_power(keys, 15, 40)
    assert g.dtype == object
    assert sum(g) == 20 ** 15


@settings(max_examples=40, deadline=None)
@given(keys=st.sets(st.integers(0, 60), min_size=1, max_size=7), r=st.integers(1, 3))
def test_profile_matches_naive_counting(keys, r):
    P = EndpointSet(1, "P", 61, np.array(sorted(keys), dtype=np.int64))
    prof = sumset_profile(P, r)
    naive = {}
    for tup in itertools.product(sorted(keys), repeat=r):
        naive[sum(tup)] = naive.get(sum(tup), 0) + 1
    assert prof.as_dict() == naive
    assert prof.total == len(keys) ** r
    assert prof.M * prof.size >= prof.total ** 2


@settings(max_examples=20, deadline=None)
@given(s=st.lists(st.integers(1, 3), min_size=1, max_size=3), r=st.integers(2, 3))
def test_chain_on_random_progressions(s, r):
    t = tuple(x + 1 for x in s)
    n = tuple(4 * x + 4 for x in t)
    seq = ParamSequences(derive_exponents(2, 1.5, 1.5), tuple(s), t, n)
    for l in range(len(s) + 1):
        assert check_chain(sumset_profile(build_progression(seq, l), r), seq, l)["bound_ok"]


def test_tiny_chain_values(tiny):
    prof = sumset_profile(build_progression(tiny, 1), 2)
    assert prof.total == 4
    assert energy_lower_bound(tiny, 1, 2) == 2 <= prof.M
    assert prof.size == 3 <= 8


def test_size_bound_two_stages():
    seq = ParamSequences(derive_exponents(2, 1.5, 1.5), (2, 2), (3, 3), (8, 12))
    prof = sumset_profile(build_progression(seq, 2), 3)
    assert prof.size <= 144


@pytest.mark.parametrize("seed", range(3))
def test_lower_bound_random_sequences(seed):
    rng = np.random.default_rng(seed)
    s = tuple(int(x) for x in rng.integers(1, 4, 3))
    t = tuple(x + int(rng.integers(0, 3)) for x in s)
    n = tuple(2 * x + 2 * y + 4 for x, y in zip(s, t))
    seq = ParamSequences(derive_exponents(2, 1.5, 1.5), s, t, n)
    for l in range(4):
        assert energy_lower_bound(seq, l, 2) <= sumset_profile(build_progression(seq, l), 2).M

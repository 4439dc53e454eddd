import math

import pytest
from hypothesis import given, settings, strategies as st

from knapp_cantor.params import (DomainError, GenerationError, ParamSequences, derive_exponents,
                                 generate_sequences, sequences_from_config, validate_sequences)


def test_reduced_exponents():
    e = derive_exponents(3, 2.5, 2.25)
    assert (e.alpha0, e.beta0) == (0.5, 0.25)


@pytest.mark.parametrize("d,a,b", [(2, 1.0, 1.0), (2, 1.5, 1.6), (2, 2.0, 1.5), (1, 0.5, 0.6), (2, 1.2, 0.9), (0, 0.5, 0.5)])
def test_domain_rejected(d, a, b):
    with pytest.raises(DomainError):
        derive_exponents(d, a, b)


def test_products_exact(tiny):
    assert tiny.S == (1, 2, 2)
    assert tiny.T == (1, 3, 12)
    assert tiny.N == (1, 8, 96)
    assert tiny.hard_violations() == []


def test_products_are_python_ints(exp2):
    seq = ParamSequences(exp2, (1,) * 30, (2,) * 30, (1000,) * 30)
    assert seq.N[30] == 1000 ** 30
    assert isinstance(seq.N[30], int)


def test_hard_violation_reported(exp2):
    seq = ParamSequences(exp2, (3,), (2,), (8,))
    assert seq.hard_violations()
    seq = ParamSequences(exp2, (1,), (4,), (8,))
    assert seq.hard_violations()  # t must be < n/2


def test_generated_default_schedule(seq6):
    rep = validate_sequences(seq6)
    assert rep.hard_ok
    assert rep.n_nondecreasing and rep.n_over_j_nonincreasing
    assert rep.r27 < 4.0


def test_generation_fails_without_room(exp2):
    with pytest.raises(GenerationError):
        generate_sequences(exp2, 3, n_schedule=(8, 2, 8))


def test_config_roundtrip(seq6):
    cfg = {"d": 2, "alpha": 1.5, "beta": 1.5, "s": list(seq6.s), "t": list(seq6.t), "n": list(seq6.n)}
    again = sequences_from_config(cfg)
    assert again.N == seq6.N and again.S == seq6.S


@settings(max_examples=40, deadline=None)
@given(d=st.integers(2, 4), a=st.floats(0.05, 0.95), b=st.floats(0.05, 1.0), J=st.integers(2, 5))
def test_generated_sequences_satisfy_hard_constraints(d, a, b, J):
    alpha = d - 1 + a
    beta = d - 1 + a * b
    seq = generate_sequences(derive_exponents(d, alpha, beta), J)
    assert seq.hard_violations() == []
    for j in range(1, J + 1):
        assert 1 <= seq.s_(j) <= seq.t_(j) < seq.n_(j) / 2
    assert seq.T[J] == math.prod(seq.t)


def test_reference_schedule_ratios():
    e = derive_exponents(2, 1.5, 1.5)
    seq = generate_sequences(e, 3, n_schedule=(16, 20, 24), C_ratio=100.0)
    rep = validate_sequences(seq)
    assert math.isfinite(rep.r26) and math.isfinite(rep.r27)
    tight = validate_sequences(generate_sequences(e, 3, n_schedule=(16, 20, 24),
                                                  C_ratio=max(rep.r26, rep.r27)))
    assert tight.approx_26_ok and tight.approx_27_ok

import random

import pytest
from hypothesis import given, settings, strategies as st

from morsefam.exact_algebra import ContractViolation, FgAbGroup, IntMatrix
from morsefam.morse import (
    ContinuationData,
    MorseData,
    circle_base,
    circle_local_system,
    circle_monodromy,
    homology_local_coeffs,
    morse_complex,
    morse_homology,
    search_homotopy,
    sphere_base,
    verify_continuation,
)
from morsefam.random_data import random_unimodular

from oracles import monodromy_oracle


def test_circle_homology():
    H = morse_homology(circle_base())
    assert H[0].group == FgAbGroup(1) and H[1].group == FgAbGroup(1)


def test_sphere_base_has_no_flows():
    assert morse_complex(sphere_base(2)).d(2).is_zero()


def test_net_counts_cancel():
    assert circle_base().net_counts() in ({}, {("x1", "x0"): 0})


def test_json_round_trip():
    M = MorseData.build([("a", 1), ("b", 0)], [("a", "b", 2)])
    assert MorseData.from_json(M.to_json()) == M


def test_flow_must_drop_index_by_one():
    with pytest.raises((ContractViolation, ValueError)):
        MorseData.build([("a", 2), ("b", 0)], [("a", "b", 1)])


def test_negated_reflects_indices():
    M = MorseData.build([("a", 1), ("b", 0)], [("a", "b", 2)]).negated(1)
    assert M.indices == {"a": 0, "b": 1}


def test_continuation_identity_and_homotopy():
    M = MorseData.build([("a", 1), ("b", 0), ("c", 0)], [("a", "b", 1), ("a", "c", -1)])
    I = ContinuationData.identity(M)
    assert verify_continuation(I)
    # phi = I + dK + Kd with K: b -> a is chain homotopic to the identity
    phi = ContinuationData(M, M, IntMatrix.from_rows([[2, 0, 0], [0, 2, 0], [0, -1, 1]]))
    assert verify_continuation(phi)
    K = search_homotopy(phi, I)
    assert K is not None
    assert verify_continuation(phi, I, K)


def test_continuation_rejects_index_change():
    M = MorseData.build([("a", 1), ("b", 0)])
    with pytest.raises(ContractViolation):
        ContinuationData(M, M, IntMatrix.from_rows([[1, 1], [0, 1]]))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 3))
def test_circle_monodromy_matches_oracle(seed, n):
    phi = random_unimodular(random.Random(seed), n)
    assert circle_monodromy(phi) == monodromy_oracle(phi)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 3))
def test_local_coefficients_match_monodromy(seed, n):
    phi = random_unimodular(random.Random(seed), n)
    H = homology_local_coeffs(circle_local_system(phi))
    coker, ker = circle_monodromy(phi)
    assert H.get((0, 0), FgAbGroup()) == coker
    assert H.get((1, 0), FgAbGroup()) == ker


def test_reflection_monodromy():
    assert circle_monodromy([[-1]]) == (FgAbGroup(0, (2,)), FgAbGroup())


def test_non_invertible_monodromy_refused():
    with pytest.raises(ContractViolation):
        circle_monodromy([[2]])

import pytest
from hypothesis import given, settings, strategies as st

from morsefam.complexes import (
    ChainMap,
    FilteredComplex,
    FilteredHomotopy,
    GradedComplex,
    InvalidComplex,
    dual_complex,
    homology_groups,
    homology_in_degree,
    verify_filtered,
    verify_homotopy,
)
from morsefam.exact_algebra import FgAbGroup, IntMatrix
from morsefam.random_data import random_complex, random_filtered_complex

from oracles import homology_oracle
import random


def rp2_cells():
    # CW structure of RP^2: one cell in each degree, d_1 = 0, d_2 = 2
    return GradedComplex({0: ["v"], 1: ["e"], 2: ["f"]},
                         {1: [[0]], 2: [[2]]})


def test_rp2_homology():
    H = homology_groups(rp2_cells())
    assert H[0] == FgAbGroup(1)
    assert H[1] == FgAbGroup(0, (2,))
    assert H.get(2, FgAbGroup()).is_trivial()


def test_d_squared_rejected_with_location():
    with pytest.raises(InvalidComplex, match="d\\^2 != 0"):
        GradedComplex({0: ["a"], 1: ["b"], 2: ["c"]}, {1: [[1]], 2: [[1]]})


def test_shape_mismatch_rejected():
    with pytest.raises(InvalidComplex, match="shape"):
        GradedComplex({0: ["a"], 1: ["b", "c"]}, {1: IntMatrix.from_rows([[1]])})


def test_filtration_violation_rejected():
    with pytest.raises(InvalidComplex):
        FilteredComplex({0: ["a"], 1: ["b"]}, {1: [[1]]}, {0: [1], 1: [0]})


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_homology_matches_oracle(seed):
    C = random_complex(random.Random(seed))
    for m in C.degrees():
        g = homology_in_degree(C, m).presentation.group
        assert (g.free_rank, g.torsion) == homology_oracle(C, m)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_random_filtered_complexes_are_valid(seed):
    F = random_filtered_complex(random.Random(seed))
    assert verify_filtered(F)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_dual_complex_universal_coefficients(seed):
    # H^n = Hom(H_n) + Ext(H_{n-1}): same free rank, torsion shifted up by one
    C = random_complex(random.Random(seed))
    D = dual_complex(C)
    H, Hd = homology_groups(C), homology_groups(D)
    for n in C.degrees():
        h = Hd.get(-n, FgAbGroup())
        assert h.free_rank == H.get(n, FgAbGroup()).free_rank
        assert h.torsion == H.get(n - 1, FgAbGroup()).torsion


def test_identity_chain_map_and_homotopy():
    C = rp2_cells()
    I = ChainMap.identity(C)
    assert I.verify()
    assert not I.residual()
    K = FilteredHomotopy(C, C, {})
    assert verify_homotopy(K, I, I)


def test_bad_chain_map_detected():
    C = GradedComplex({0: ["a"], 1: ["b"]}, {1: [[1]]})
    f = ChainMap(C, C, {0: [[0]], 1: [[1]]})
    assert f.residual()
    assert not f.verify()

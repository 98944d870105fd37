import itertools
from math import gcd

import pytest
from hypothesis import given, settings, strategies as st

from morsefam.exact_algebra import (
    FgAbGroup,
    IntMatrix,
    Subgroup,
    full_lattice,
    image,
    induced_map,
    intersection,
    is_isomorphism,
    kernel,
    preimage,
    quotient,
    smith_normal_form,
    subgroup_sum,
)

small = st.integers(min_value=-6, max_value=6)


@st.composite
def matrices(draw, max_rows=4, max_cols=4):
    r = draw(st.integers(1, max_rows))
    c = draw(st.integers(1, max_cols))
    rows = draw(st.lists(st.lists(small, min_size=c, max_size=c), min_size=r, max_size=r))
    return IntMatrix.from_rows(rows, cols=c)


def _det(M):
    n = len(M)
    if n == 0:
        return 1
    return sum((-1) ** j * M[0][j] * _det([row[:j] + row[j + 1:] for row in M[1:]])
               for j in range(n) if M[0][j])


def determinantal_invariants(A: IntMatrix) -> list[int]:
    """Oracle: ``d_1 ... d_k = gcd of all k x k minors``."""
    rows = A.to_rows()
    out, prev = [], 1
    for k in range(1, min(A.shape) + 1):
        g = 0
        for ri in itertools.combinations(range(A.rows), k):
            for ci in itertools.combinations(range(A.cols), k):
                g = gcd(g, _det([[rows[i][j] for j in ci] for i in ri]))
        if g == 0:
            break
        out.append(g // prev)
        prev = g
    return out


def test_smith_small_example():
    S = smith_normal_form([[2, 4, 4], [-6, 6, 12], [10, -4, -16]])
    assert S.d == (2, 6, 12)


@settings(max_examples=150, deadline=None)
@given(matrices())
def test_smith_transforms_and_invariants(A):
    S = smith_normal_form(A)
    assert S.U @ A @ S.V == S.diagonal_matrix(A.rows, A.cols)
    assert S.U @ S.U_inv == IntMatrix.identity(A.rows)
    nz = [x for x in S.d if x]
    assert all(x > 0 for x in nz)
    assert all(b % a == 0 for a, b in zip(nz, nz[1:]))
    assert nz == determinantal_invariants(A)


@settings(max_examples=100, deadline=None)
@given(matrices())
def test_kernel_and_image(A):
    K = kernel(A)
    assert all(not any(A.apply(v)) for v in K.basis)
    assert K.rank + image(A).rank == A.cols
    # every column lies in the image
    for col in A.columns():
        assert image(A).contains(col)


@settings(max_examples=100, deadline=None)
@given(matrices(), matrices())
def test_sum_and_intersection(A, B):
    if A.rows != B.rows:
        B = IntMatrix.from_rows([r[:1] * 1 for r in A.to_rows()], cols=1)
    S, T = image(A), image(B)
    U, I = subgroup_sum(S, T), intersection(S, T)
    assert U.rank == max(S.rank, T.rank, U.rank)
    assert U.contains_subgroup(S) and U.contains_subgroup(T)
    assert S.contains_subgroup(I) and T.contains_subgroup(I)
    assert S.rank + T.rank == U.rank + I.rank


def test_preimage():
    A = IntMatrix.from_rows([[2, 0], [0, 3]])
    S = Subgroup.span(2, [(4, 0), (0, 3)])
    P = preimage(A, S)
    assert P.contains((2, 0)) and P.contains((0, 1)) and not P.contains((1, 0))


def test_quotient_z_mod_2():
    Q = quotient(full_lattice(1), Subgroup.span(1, [(2,)]))
    assert Q.group == FgAbGroup(0, (2,))
    assert Q.reduce(Q.coords((3,))) == Q.reduce(Q.coords((1,)))


def test_quotient_mixed():
    Q = quotient(full_lattice(3), Subgroup.span(3, [(2, 0, 0), (0, 6, 0)]))
    assert Q.group == FgAbGroup(1, (2, 6))
    assert str(FgAbGroup(1, (2, 6)))


def test_from_orders_normalises():
    assert FgAbGroup.from_orders([6, 0, 4, 1]) == FgAbGroup(1, (2, 12))
    assert FgAbGroup.from_orders([]).is_trivial()


def test_induced_map_and_isomorphism():
    src = quotient(full_lattice(1), Subgroup.span(1, [(4,)]))
    dst = quotient(full_lattice(1), Subgroup.span(1, [(4,)]))
    f = induced_map(IntMatrix.from_rows([[3]]), src, dst)
    assert is_isomorphism(f, src.orders, dst.orders)
    g = induced_map(IntMatrix.from_rows([[2]]), src, dst)
    assert not is_isomorphism(g, src.orders, dst.orders)


def test_induced_map_rejects_ill_defined():
    src = quotient(full_lattice(1), Subgroup.span(1, [(2,)]))
    dst = quotient(full_lattice(1), Subgroup.span(1, [(3,)]))
    with pytest.raises(ValueError):
        induced_map(IntMatrix.from_rows([[1]]), src, dst)

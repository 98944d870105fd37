"""Acceptance criteria 1 to 12, one or more tests each.

Tests are named ``test_criterion_NN_*``; the terminal summary prints one
``criterion N: PASS/FAIL`` line per criterion.  Everything topological is
exact.  The numeric tolerances used by criterion 11 are pinned below.
"""

import random
from fractions import Fraction

import pytest

from morsefam import catalog, checks
from morsefam.cubical import assemble_cubical, compare_with_family, mayer_vietoris
from morsefam.exact_algebra import FgAbGroup, IntMatrix
from morsefam.family import (
    Block,
    DualityRefused,
    FamilyDescriptor,
    assemble,
    continuation,
    e2_crosscheck,
    family_homology,
    family_pages,
    identity_continuation,
    poincare_check,
)
from morsefam.flowcount import Tolerances, count_bundle, emit_descriptor, metric_continuation
from morsefam.morse import MorseData, circle_base, morse_homology
from morsefam.novikov import (
    CoeffLattice,
    NovikovComplexData,
    NovikovElement,
    ReferenceFamily,
    Transport,
    circle_one_form,
    from_morse,
    invert,
    novikov_homology,
    reference_rescaling_check,
)
from morsefam.random_data import _fiber_matrix, random_descriptor, random_fiber, random_unimodular
from morsefam.spectral import SpectralSequence, associated_graded_check

from oracles import (
    cellular_homology,
    homology_oracle,
    monodromy_oracle,
    rational_pages,
)
from test_flowcount import golden_klein

# pinned tolerances
PERTURBATION_EPS = 1e-3
PERTURBATION_TRIALS = 5
TIGHTENING = 10.0
NOVIKOV_PRECISIONS = range(-1, -11, -1)
N_RANDOM_PHI = 10
N_RANDOM_DESCRIPTORS = 200
MAX_GENERATORS = 16

Z = FgAbGroup(1)
Z2 = FgAbGroup(0, (2,))
ZERO = FgAbGroup()


def groups_of(H: dict, top: int):
    return tuple((H[m].free_rank, H[m].torsion) if m in H else (0, ()) for m in range(top + 1))


def oracle_of(name: str, top: int):
    ref = cellular_homology(name)
    return tuple(ref.get(m, (0, ())) for m in range(top + 1))


# 1 -------------------------------------------------------------------------


def test_criterion_01_klein_family():
    D = catalog.klein()
    C = assemble(D)
    H = family_homology(C)
    assert H.as_tuple(2) == (Z, FgAbGroup(1, (2,)), ZERO)
    assert groups_of(H.groups, 2) == oracle_of("klein", 2)
    ss = SpectralSequence(C)
    E2 = ss.page(2).groups()
    assert E2 == {(0, 0): Z, (1, 0): Z, (0, 1): Z2}  # (1, 1) is zero
    assert ss.infinity_page().groups() == E2


# 2 -------------------------------------------------------------------------


def test_criterion_02_trivial_torus():
    D = catalog.get("torus-trivial")
    ss = family_pages(D)
    assert ss.collapses_at(2)
    H = family_homology(assemble(D))
    assert H.as_tuple(2) == (Z, FgAbGroup(2), Z)
    assert groups_of(H.groups, 2) == oracle_of("torus", 2)
    assert checks.check_triviality(D)


# 3 -------------------------------------------------------------------------

# Leray-Serre pages written out by hand from H_p(B; H_q(F)) and the known total spaces
LERAY_SERRE = {
    "torus": ({(0, 0): Z, (1, 0): Z, (0, 1): Z, (1, 1): Z},) * 2,
    "rotating_torus": ({(0, 0): Z, (1, 0): Z, (0, 1): Z, (1, 1): Z},) * 2,
    "klein": ({(0, 0): Z, (1, 0): Z, (0, 1): Z2},) * 2,
    # Hopf fibration: d_2 kills E_{2,0} against E_{0,1}
    "sphere_base_toy": ({(0, 0): Z, (2, 0): Z, (0, 1): Z, (2, 1): Z}, {(0, 0): Z, (2, 1): Z}),
}


@pytest.mark.parametrize("name", sorted(LERAY_SERRE))
def test_criterion_03_leray_serre(name):
    E2, Einf = LERAY_SERRE[name]
    ss = family_pages(catalog.get(name))
    k = catalog.get(name).base.dimension
    for r in range(2, ss.length + 3):
        assert ss.page(r).groups() == (E2 if r <= k else Einf), f"E^{r}"
    assert ss.infinity_page().groups() == Einf
    assert checks.check_leray_serre(name)


# 4 -------------------------------------------------------------------------


@pytest.mark.parametrize("name", ["klein", "torus", "rotating_torus"])
def test_criterion_04_cubical_equals_family(name):
    cub = checks.cubical_example(name)
    D = catalog.get(name)
    assert compare_with_family(cub, D)
    Fc, Ff = assemble_cubical(cub), assemble(D)
    a, b = SpectralSequence(Fc), SpectralSequence(Ff)
    for r in range(2, max(a.length, b.length) + 2):
        assert a.page(r).groups() == b.page(r).groups()
        assert rational_pages(Fc, r) == rational_pages(Ff, r)  # d_r ranks, independently


# 5 -------------------------------------------------------------------------


@pytest.mark.parametrize("name", ["torus-trivial", "s1_x_s2"])
def test_criterion_05_poincare_duality(name):
    res = poincare_check(catalog.get(name))
    assert res, res.message


def test_criterion_05_klein_refused():
    with pytest.raises(DualityRefused):
        poincare_check(catalog.klein())


# 6 -------------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(N_RANDOM_PHI))
def test_criterion_06_monodromy(seed):
    rng = random.Random(1000 + seed)
    phi = random_unimodular(rng, rng.randint(1, 3))
    assert abs(_det(phi.to_rows())) == 1
    coker, ker = monodromy_oracle(phi)
    for degree in (0, 1):
        E2 = family_pages(catalog.circle_family(phi, degree)).page(2)
        assert E2.group(0, degree) == coker
        assert E2.group(1, degree) == ker


def _det(rows):
    if not rows:
        return 1
    return sum((-1) ** j * rows[0][j] * _det([r[:j] + r[j + 1:] for r in rows[1:]])
               for j in range(len(rows)))


# 7 -------------------------------------------------------------------------


def test_criterion_07_random_descriptors():
    for seed in range(N_RANDOM_DESCRIPTORS):
        D = random_descriptor(random.Random(seed), max_generators=MAX_GENERATORS)
        C = assemble(D)  # raises unless delta^2 = 0
        assert sum(C.rank(m) for m in C.degrees()) <= MAX_GENERATORS
        assert e2_crosscheck(D), seed
        assert associated_graded_check(C), seed
        H = family_homology(C).groups
        for m in C.degrees():
            g = H.get(m, ZERO)
            assert (g.free_rank, g.torsion) == homology_oracle(C, m), seed


# 8 -------------------------------------------------------------------------


def test_criterion_08_continuation_between_metrics(klein_continuation):
    phi, _, irregular = klein_continuation
    assert not irregular
    res = continuation(phi)
    assert res, res.message


def test_criterion_08_constant_family_is_identity(klein_bundle):
    phi, _, irregular = metric_continuation(klein_bundle, klein_bundle)
    assert not irregular
    assert all(b.k == 0 and b.matrix == IntMatrix.identity(b.matrix.rows) for b in phi.blocks)
    assert {b.from_x for b in phi.blocks} == set(catalog.klein().base.labels)
    assert continuation(identity_continuation(catalog.klein()))


# 9 -------------------------------------------------------------------------


RP2 = MorseData.build([("x2", 2), ("x1", 1), ("x0", 0)],
                      [("x2", "x1", 1), ("x2", "x1", 1), ("x1", "x0", 1), ("x1", "x0", -1)])


def flat_rp2_family(rng: random.Random) -> FamilyDescriptor:
    """Random fiber complex over RP^2 with a chain involution as monodromy, no delta_2."""
    counts, d = random_fiber(rng, max_gens=5)
    M = _fiber_matrix(counts, d)
    n = len(M)
    labels = [f"g{i}" for i in range(n)]
    deg = [j for j, c in enumerate(counts) for _ in range(c)]
    F = MorseData.build(list(zip(labels, deg)),
                        [(labels[c], labels[r], M[r][c]) for r in range(n) for c in range(n) if M[r][c]])
    dM = IntMatrix.from_rows(M, cols=n)
    T = IntMatrix.identity(n)
    for _ in range(50):
        perm = list(range(n))
        for j in range(len(counts)):
            idx = [i for i in range(n) if deg[i] == j]
            if len(idx) >= 2 and rng.random() < 0.7:
                a, b = rng.sample(idx, 2)
                perm[a], perm[b] = perm[b], perm[a]
        sign = rng.choice([1, -1])
        cand = IntMatrix.from_rows([[sign * int(perm[c] == r) for c in range(n)] for r in range(n)], cols=n)
        if cand @ dM == dM @ cand:
            T = cand
            break
    one = IntMatrix.identity(n)
    blocks = [Block(1, "x1", "x0", T - one), Block(1, "x2", "x1", T + one)]
    return FamilyDescriptor(RP2, 2, max(len(counts) - 1, 0), {x: F for x in RP2.labels}, blocks,
                            False, "flat_rp2")


def test_criterion_09_rational_collapse_without_higher_deltas():
    rng = random.Random(9)
    for _ in range(60):
        D = random_descriptor(rng, max_generators=MAX_GENERATORS, base_kind=rng.choice(
            ["point", "circle", "circle4"]))
        assert all(b.k <= 1 for b in D.blocks)
        assert family_pages(D).collapses_at(2, rational=True)
    for _ in range(60):
        D = flat_rp2_family(rng)
        assert family_pages(D).collapses_at(2, rational=True)


def test_criterion_09_integral_failure_only_through_torsion():
    D = catalog.rp2_swap()
    assert all(b.k <= 1 for b in D.blocks)
    C = assemble(D)
    ss = SpectralSequence(C)
    assert ss.collapses_at(2, rational=True)
    assert not ss.collapses_at(2)
    # independent witness: E^2 in total degree 1 has order 4, H_1 has order 2
    E2 = ss.page(2).groups()
    assert E2[(1, 0)] == Z2 and E2[(0, 1)] == Z2
    assert homology_oracle(C, 1) == (0, (2,))
    # the differential that fails to vanish only moves torsion: free ranks agree
    Einf = ss.infinity_page().groups()
    for key in set(E2) | set(Einf):
        assert E2.get(key, ZERO).free_rank == Einf.get(key, ZERO).free_rank
    assert rational_pages(C, 2) == rational_pages(C, ss.length + 1)


# 10 ------------------------------------------------------------------------


@pytest.mark.parametrize("c", [1, 2, 3])
def test_criterion_10_unit_inverse(c):
    lat = CoeffLattice(1, (-Fraction(c),))
    u = NovikovElement.one(lat) - NovikovElement.monomial(lat, (1,))
    one = NovikovElement.one(lat)
    for p in NOVIKOV_PRECISIONS:
        assert (u * invert(u, p)).agrees_with(one, Fraction(p)), p
    assert checks.check_novikov_units(NOVIKOV_PRECISIONS, c)


@pytest.mark.parametrize("omega", [1, -1, 2, Fraction(1, 2)])
def test_criterion_10_circle_vanishing(omega):
    H = novikov_homology(circle_one_form(omega), "Q", -10)
    assert all(h.rank == 0 for h in H.values())


def _morse_examples():
    out = {"circle_base": circle_base()}
    for name in sorted(catalog.BUILTINS):
        D = catalog.get(name)
        out[f"{name}/base"] = D.base
        for x, F in D.fibers.items():
            out[f"{name}/{x}"] = F
    return out


def test_criterion_10_exact_form_mode():
    for name, M in _morse_examples().items():
        H = novikov_homology(from_morse(M), "Z")
        ref = morse_homology(M)
        for n in set(H) | set(ref):
            g = ref[n].group if n in ref else ZERO
            assert H.get(n) is not None and H[n].group == g, name


@pytest.mark.parametrize("A", [(1,), (-1,), (2,), (-3,)])
def test_criterion_10_reference_shift(A):
    lat = CoeffLattice(1, (-1,))
    fib = NovikovComplexData(lat, [("g", 0)], [])
    transports = [Transport("x1", "x0", 1, [[1]]), Transport("x1", "x0", -1, [[1]], winding=1)]
    res = reference_rescaling_check(circle_base(), {"x1": fib, "x0": fib}, transports,
                                    ReferenceFamily((1,)), A)
    assert res, res.message


# 11 ------------------------------------------------------------------------


def test_criterion_11_golden_descriptor(klein_counts):
    assert emit_descriptor(klein_counts).to_json() == golden_klein().to_json()


def test_criterion_11_tightened_tolerances(klein_bundle, klein_counts):
    tight = count_bundle(klein_bundle, 0, Tolerances().tightened(TIGHTENING))
    assert tight.integer_data() == klein_counts.integer_data()


def test_criterion_11_metric_perturbations(klein_regularity):
    assert klein_regularity.trials == PERTURBATION_TRIALS
    assert klein_regularity.eps == PERTURBATION_EPS
    assert klein_regularity.stable and not klein_regularity.differences


def test_criterion_11_energy_bound(klein_counts):
    assert klein_counts.records
    for r in klein_counts.records:
        assert 0 <= r.energy <= r.energy_bound


# 12 ------------------------------------------------------------------------


def test_criterion_12_mayer_vietoris():
    rep = mayer_vietoris(checks.cubical_example("klein"), {"v0", "e0", "v1"}, {"v1", "e1", "v0"})
    assert rep.ok, rep.message
    assert rep.nodes and all(node["exact"] for node in rep.nodes)

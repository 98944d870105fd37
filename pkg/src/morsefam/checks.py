"""Named verification routines shared by the command line and the test suite.

Each check returns a :class:`CheckResult`.  A combination that makes no
sense (duality on a non-orientable family, a reference oracle that does not
exist) raises :class:`Unsupported` instead of failing.
"""

from __future__ import annotations

import random
from fractions import Fraction
from math import gcd
from typing import Callable

from . import catalog
from .complexes import CheckResult, homology_groups
from .cubical import CubicalFamily, circle_family_cubical, compare_with_family, mayer_vietoris
from .exact_algebra import ContractViolation, FgAbGroup, IntMatrix
from .family import (
    DualityRefused,
    FamilyDescriptor,
    continuation,
    e2_crosscheck,
    family_pages,
    identity_continuation,
    poincare_check,
)
from .morse import circle_monodromy, morse_complex
from .novikov import (
    CoeffLattice,
    NovikovElement,
    circle_one_form,
    from_morse,
    invert,
    novikov_homology,
)
from .random_data import random_unimodular

__all__ = [
    "Unsupported",
    "CHECKS",
    "CUBICAL",
    "cubical_example",
    "check_e2",
    "check_leray_serre",
    "check_poincare",
    "check_triviality",
    "check_alternate",
    "check_mayer_vietoris",
    "check_monodromy",
    "check_novikov_units",
    "check_novikov_vanishing",
    "check_continuation",
    "tensor",
    "tor",
]


class Unsupported(ContractViolation):
    """The requested check does not apply to this input."""


def _klein_cubical() -> CubicalFamily:
    return circle_family_cubical(catalog.circle_fiber(),
                                 {("e1", "v0"): IntMatrix.from_rows([[-1, 0], [0, 1]])},
                                 name="klein")


def _torus_cubical() -> CubicalFamily:
    return circle_family_cubical(catalog.circle_fiber(), {}, name="torus")


CUBICAL: dict[str, Callable[[], CubicalFamily]] = {
    "klein": _klein_cubical,
    "torus": _torus_cubical,
    "torus-trivial": _torus_cubical,
    "rotating_torus": _torus_cubical,
}


def cubical_example(name: str) -> CubicalFamily:
    try:
        return CUBICAL[name]()
    except KeyError:
        raise Unsupported(f"no cubical dataset for {name!r}; known: {sorted(CUBICAL)}") from None


def _groups_json(groups: dict) -> dict:
    return {f"{p},{q}": g.to_json() for (p, q), g in sorted(groups.items())}


def check_e2(D: FamilyDescriptor) -> CheckResult:
    return e2_crosscheck(D)


def check_leray_serre(name: str, D: FamilyDescriptor | None = None) -> CheckResult:
    """Pages against the hand-derived Leray-Serre tables, r = 2 and r = infinity."""
    if name not in catalog.LERAY_SERRE:
        raise Unsupported(f"no Leray-Serre reference table for {name!r}")
    D = D or catalog.get(name)
    ss = family_pages(D)
    ref = catalog.LERAY_SERRE[name]
    got = {"2": ss.page(2).groups(), "inf": ss.infinity_page().groups()}
    for key in ("2", "inf"):
        if got[key] != ref[key]:
            return CheckResult(False, f"E^{key} differs from the reference",
                               {"page": key, "got": _groups_json(got[key]),
                                "expected": _groups_json(ref[key])})
    # intermediate pages sit between E^2 and E^inf; all of them must match one of the tables
    for r in range(3, ss.length + 2):
        g = ss.page(r).groups()
        if g not in (ref["2"], ref["inf"]):
            return CheckResult(False, f"E^{r} matches neither reference page", {"r": r})
    return CheckResult(True, "pages agree with the Leray-Serre reference tables",
                       {"E2": _groups_json(got["2"]), "Einf": _groups_json(got["inf"])})


def check_poincare(D: FamilyDescriptor) -> CheckResult:
    try:
        return poincare_check(D)
    except DualityRefused as e:
        raise Unsupported(str(e)) from None


def _cyclic(g: FgAbGroup) -> list[int]:
    return [0] * g.free_rank + list(g.torsion)


def tensor(a: FgAbGroup, b: FgAbGroup) -> FgAbGroup:
    orders = []
    for x in _cyclic(a):
        for y in _cyclic(b):
            orders.append(gcd(x, y) if x or y else 0)
    return FgAbGroup.from_orders([o for o in orders if o != 1])


def tor(a: FgAbGroup, b: FgAbGroup) -> FgAbGroup:
    orders = [gcd(x, y) for x in a.torsion for y in b.torsion]
    return FgAbGroup.from_orders([o for o in orders if o > 1])


def _direct_sum(a: FgAbGroup, b: FgAbGroup) -> FgAbGroup:
    return FgAbGroup.from_orders(_cyclic(a) + _cyclic(b))


def check_triviality(D: FamilyDescriptor) -> CheckResult:
    """A product family collapses at E^2 with Kunneth E^2."""
    fibers = list(D.fibers.values())
    trivial = all(F.critical_points == fibers[0].critical_points and
                  F.net_counts() == fibers[0].net_counts() for F in fibers)
    trivial = trivial and all(b.matrix.is_zero() for b in D.blocks if b.k >= 1)
    if not trivial:
        raise Unsupported(f"{D.name or 'descriptor'} is not a product family")
    ss = family_pages(D)
    HB = homology_groups(morse_complex(D.base))
    HF = homology_groups(morse_complex(fibers[0]))
    expect = {}
    for p in range(0, D.base.dimension + 1):
        for q in range(0, D.fiber_dim + 1):
            g = _direct_sum(tensor(HB.get(p, FgAbGroup()), HF.get(q, FgAbGroup())),
                            tor(HB.get(p - 1, FgAbGroup()), HF.get(q, FgAbGroup())))
            if not g.is_trivial():
                expect[(p, q)] = g
    E2 = ss.page(2).groups()
    if E2 != expect:
        return CheckResult(False, "E^2 is not H(B) (x) H(F)",
                           {"got": _groups_json(E2), "expected": _groups_json(expect)})
    if not ss.collapses_at(2):
        return CheckResult(False, "spectral sequence does not collapse at E^2")
    return CheckResult(True, "collapse at E^2 with E^2 = H(B) (x) H(F)",
                       {"collapse_at_E2": True, "E2": _groups_json(E2)})


def check_alternate(name: str) -> CheckResult:
    return compare_with_family(cubical_example(name), catalog.get(name))


def check_mayer_vietoris(name: str) -> CheckResult:
    Z = cubical_example(name)
    rep = mayer_vietoris(Z, {"v0", "e0", "v1"}, {"v1", "e1", "v0"})
    return CheckResult(rep.ok, rep.message or ("exact at every node" if rep.ok else "not exact"),
                       {"nodes": rep.nodes})


def check_monodromy(phi=None, seed: int = 0, degree: int = 0) -> CheckResult:
    """``E^2_{0,j} = coker(1 - phi)`` and ``E^2_{1,j} = ker(1 - phi)``."""
    if phi is None:
        rng = random.Random(seed)
        phi = random_unimodular(rng, rng.randint(1, 3))
    phi = phi if isinstance(phi, IntMatrix) else IntMatrix.from_rows(phi)
    D = catalog.circle_family(phi, degree)
    E2 = family_pages(D).page(2)
    coker, ker = circle_monodromy(phi)
    got = (E2.group(0, degree), E2.group(1, degree))
    details = {"phi": phi.to_rows(), "E2_0": got[0].to_json(), "E2_1": got[1].to_json(),
               "coker": coker.to_json(), "ker": ker.to_json()}
    ok = got == (coker, ker)
    return CheckResult(ok, "E^2 = coker / ker of 1 - phi" if ok else "monodromy formula fails",
                       details)


def check_novikov_units(precisions=range(-1, -11, -1), c=1) -> CheckResult:
    """``(1 - e^A) invert(1 - e^A) = 1`` modulo every requested precision."""
    lat = CoeffLattice(1, (-Fraction(c),))
    u = NovikovElement.one(lat) - NovikovElement.monomial(lat, (1,))
    one = NovikovElement.one(lat)
    for p in precisions:
        prod = u * invert(u, p)
        if not prod.agrees_with(one, Fraction(p)):
            return CheckResult(False, f"product differs from 1 at precision {p}", {"product": repr(prod)})
    return CheckResult(True, "(1 - e^A) invert(1 - e^A) = 1 at every precision",
                       {"precisions": [int(p) for p in precisions]})


def check_novikov_vanishing(omega=1, precision=-10) -> CheckResult:
    """Novikov homology of S^1 with a closed 1-form of class ``omega``."""
    omega = Fraction(omega)
    if omega == 0:
        H = novikov_homology(from_morse(catalog.circle_fiber()), "Z", precision)
        ranks = {n: h.rank for n, h in H.items()}
        ok = ranks == {0: 1, 1: 1}
        return CheckResult(ok, "exact form: ordinary homology of S^1", {"ranks": ranks})
    H = novikov_homology(circle_one_form(omega), "Q", precision)
    ranks = {n: h.rank for n, h in H.items()}
    ok = not any(ranks.values())
    return CheckResult(ok, "Novikov homology vanishes" if ok else "Novikov homology is nonzero",
                       {"ranks": ranks, "omega": str(omega)})


def check_continuation(D: FamilyDescriptor) -> CheckResult:
    res = continuation(identity_continuation(D))
    return CheckResult(res.ok, res.message)


CHECKS = ("e2", "leray-serre", "poincare", "triviality", "alternate", "mayer-vietoris",
          "monodromy", "novikov-units", "novikov-vanishing", "continuation")

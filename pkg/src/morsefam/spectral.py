"""Spectral sequence of a finite filtered complex over Z.

Pages are computed from the cycle lattices

    Z^r_p = {x in F_p C : d x in F_{p-r} C}
    E^r_p = Z^r_p / (Z^{r-1}_{p-1} + d Z^{r-1}_{p+r-1})

in each total degree, so every entry comes with explicit ambient
representatives and the page differentials are honest integer matrices
between presentations.  Bidegrees are ``(p, q)`` with total degree ``p + q``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

from .complexes import CheckResult, ChainMap, FilteredComplex
from .exact_algebra import (
    FgAbGroup,
    IntMatrix,
    Quotient,
    Subgroup,
    induced_map,
    intersection,
    is_isomorphism,
    kernel,
    quotient,
    subgroup_sum,
    subquotient_homology,
)

__all__ = [
    "Page",
    "SpectralSequence",
    "SpectralMorphism",
    "page",
    "stable_page",
    "associated_graded_check",
    "induced_morphism",
    "page_homology_check",
]


@dataclass
class Page:
    """One page ``E^r``: presented entries and the differential ``d_r``.

    ``differentials[(p, q)]`` is the matrix of
    ``E^r_{p,q} -> E^r_{p-r, q+r-1}`` in the presentation coordinates.
    """

    r: int
    entries: dict[tuple[int, int], Quotient]
    differentials: dict[tuple[int, int], IntMatrix] = field(default_factory=dict)

    def group(self, p: int, q: int) -> FgAbGroup:
        e = self.entries.get((p, q))
        return e.group if e is not None else FgAbGroup()

    def groups(self) -> dict[tuple[int, int], FgAbGroup]:
        return {k: v.group for k, v in self.entries.items() if not v.group.is_trivial()}

    def orders(self, p: int, q: int) -> tuple[int, ...]:
        e = self.entries.get((p, q))
        return e.orders if e is not None else ()

    def d(self, p: int, q: int) -> IntMatrix:
        m = self.differentials.get((p, q))
        if m is None:
            return IntMatrix.zeros(len(self.orders(p - self.r, q + self.r - 1)),
                                   len(self.orders(p, q)))
        return m

    def is_zero_differential(self) -> bool:
        for (p, q), m in self.differentials.items():
            tgt = self.orders(p - self.r, q + self.r - 1)
            for i in range(m.rows):
                o = tgt[i]
                for j in range(m.cols):
                    x = m[i, j]
                    if (x % o if o else x):
                        return False
        return True

    def image_group(self, p: int, q: int) -> FgAbGroup:
        """Isomorphism type of the image of ``d_r`` out of ``(p, q)``."""
        src, tgt = self.orders(p, q), self.orders(p - self.r, q + self.r - 1)
        if not src or not tgt:
            return FgAbGroup()
        f = self.d(p, q)
        g = len(tgt)
        rel = Subgroup.span(g, [tuple(o if i == j else 0 for i in range(g))
                                for j, o in enumerate(tgt) if o])
        im = subgroup_sum(Subgroup.span(g, f.columns()), rel)
        return quotient(im, rel).group

    def to_json(self) -> dict:
        keys = sorted(self.entries)
        return {
            "r": self.r,
            "entries": [{"i": p, "j": q, **self.entries[(p, q)].group.to_json()}
                        for p, q in keys],
            "differentials": [{"i": p, "j": q, "matrix": self.d(p, q).to_rows()}
                              for p, q in keys if (p, q) in self.differentials],
        }

    def same_groups(self, other: "Page") -> bool:
        return self.groups() == other.groups()


class SpectralSequence:
    """All pages of a filtered complex, with cached cycle lattices."""

    def __init__(self, F: FilteredComplex):
        self.F = F
        self.lo, self.hi = F.filtration_range()
        self._pages: dict[int, Page] = {}
        self._cycles = lru_cache(maxsize=None)(self._cycles_uncached)

    @property
    def length(self) -> int:
        return self.hi - self.lo

    def _coords_up_to(self, m: int, p: int) -> list[int]:
        return [k for k, lv in enumerate(self.F.levels.get(m, ())) if lv <= p]

    def _cycles_uncached(self, r: int, p: int, m: int) -> Subgroup:
        """``Z^r_p`` in total degree ``m`` as a sublattice of ``C_m``."""
        n = self.F.rank(m)
        cols = self._coords_up_to(m, p)
        if not cols:
            return Subgroup(n, ())
        levels_below = self.F.levels.get(m - 1, ())
        bad_rows = [i for i, lv in enumerate(levels_below) if lv > p - r]
        d = self.F.d(m)
        if not bad_rows or r <= 0:
            return Subgroup.span(n, [tuple(int(i == c) for i in range(n)) for c in cols])
        sub = IntMatrix.from_rows([[d[i, c] for c in cols] for i in bad_rows], cols=len(cols))
        K = kernel(sub)
        vecs = []
        for v in K.basis:
            full = [0] * n
            for c, x in zip(cols, v):
                full[c] = x
            vecs.append(tuple(full))
        return Subgroup.span(n, vecs)

    def cycles(self, r: int, p: int, m: int) -> Subgroup:
        return self._cycles(r, p, m)

    def _boundary_part(self, r: int, p: int, m: int) -> Subgroup:
        Zr = self.cycles(r - 1, p + r - 1, m + 1)
        d = self.F.d(m + 1)
        return Subgroup.span(self.F.rank(m), [d.apply(v) for v in Zr.basis])

    def entry(self, r: int, p: int, m: int) -> Quotient:
        num = self.cycles(r, p, m)
        den = subgroup_sum(self.cycles(r - 1, p - 1, m), self._boundary_part(r, p, m))
        return quotient(num, den)

    def rational_dim(self, r: int, p: int, m: int) -> int:
        """dim over Q of E^r_p in degree m, from lattice ranks only (no SNF)."""
        num = self.cycles(r, p, m)
        den = subgroup_sum(self.cycles(r - 1, p - 1, m), self._boundary_part(r, p, m))
        return num.rank - den.rank

    def _bidegrees(self):
        for m in self.F.degrees():
            for p in sorted(set(self.F.levels[m])):
                yield p, m

    def page(self, r: int) -> Page:
        if r < 0:
            raise ValueError("page index must be >= 0")
        if r in self._pages:
            return self._pages[r]
        entries = {}
        for p, m in self._bidegrees():
            e = self.entry(r, p, m)
            if e.ngens:
                entries[(p, m - p)] = e
        diffs = {}
        for (p, q), e in entries.items():
            tgt = entries.get((p - r, q + r - 1))
            if tgt is None:
                continue
            d = self.F.d(p + q)
            diffs[(p, q)] = induced_map(d, e, tgt)
        pg = Page(r, entries, diffs)
        self._pages[r] = pg
        return pg

    def infinity_page(self) -> Page:
        return self.page(max(self.length + 1, 1))

    def stable_page(self) -> Page:
        """First page after which every differential vanishes."""
        last = max(self.length + 1, 1)
        r = last
        for s in range(last - 1, 0, -1):
            if self.page(s).is_zero_differential():
                r = s
            else:
                break
        return self.page(r)

    def rational_dims(self, r: int) -> dict[tuple[int, int], int]:
        out = {}
        for p, m in self._bidegrees():
            k = self.rational_dim(r, p, m)
            if k:
                out[(p, m - p)] = k
        return out

    def collapses_at(self, r: int, rational: bool = False) -> bool:
        """Whether ``E^r = E^infinity`` (groups, or Q-dimensions)."""
        inf = max(self.length + 1, r)
        if rational:
            return self.rational_dims(r) == self.rational_dims(inf)
        return all(self.page(s).is_zero_differential() for s in range(r, inf))


def page(F: FilteredComplex, r: int) -> Page:
    return SpectralSequence(F).page(r)


def stable_page(F: FilteredComplex) -> Page:
    return SpectralSequence(F).stable_page()


def page_homology_check(ss: SpectralSequence, r: int) -> CheckResult:
    """``d_r d_r = 0`` and ``H(E^r, d_r) = E^{r+1}`` entry by entry."""
    E = ss.page(r)
    nxt = ss.page(r + 1)
    for (p, q) in E.entries:
        a = (p + r, q - r + 1)
        b = (p - r, q + r - 1)
        d_out = E.d(p, q)
        d_in = E.d(*a)
        if E.orders(*b) and E.orders(*a):
            comp = d_out @ d_in
            tgt = E.orders(*b)
            for i in range(comp.rows):
                for j in range(comp.cols):
                    x = comp[i, j]
                    if (x % tgt[i] if tgt[i] else x):
                        return CheckResult(False, f"d_{r} d_{r} != 0 at {(p, q)}")
        h = subquotient_homology(d_in if E.orders(*a) else None,
                                 d_out if E.orders(*b) else None,
                                 E.orders(*a), E.orders(p, q), E.orders(*b))
        if h.group != nxt.group(p, q):
            return CheckResult(False, f"H(E^{r}) != E^{r + 1} at {(p, q)}",
                               {"homology": h.group, "next": nxt.group(p, q)})
    return CheckResult(True, f"E^{r + 1} = H(E^{r}, d_{r})")


def associated_graded_check(F: FilteredComplex) -> CheckResult:
    """Compare ``F_p H_m / F_{p-1} H_m`` with ``E^inf_{p, m-p}``."""
    ss = SpectralSequence(F)
    inf = ss.infinity_page()
    for m in F.degrees():
        n = F.rank(m)
        B = Subgroup.span(n, [F.d(m + 1).apply(v) for v in _unit_vectors(F.rank(m + 1))])
        Z = kernel(F.d(m))
        levels = sorted(set(F.levels[m]))
        prev = B
        for p in levels:
            Fp = Subgroup.span(n, [tuple(int(i == c) for i in range(n))
                                   for c, lv in enumerate(F.levels[m]) if lv <= p])
            cur = subgroup_sum(intersection(Z, Fp), B)
            g = quotient(cur, prev).group
            if g != inf.group(p, m - p):
                return CheckResult(False, f"graded piece mismatch at {(p, m - p)}",
                                   {"graded": g, "E_inf": inf.group(p, m - p)})
            prev = cur
    return CheckResult(True, "associated graded of homology equals E^infinity")


def filtered_homology(F: FilteredComplex) -> dict[int, list[tuple[int, FgAbGroup]]]:
    """For each degree, the increasing filtration ``[(p, F_p H_m)]`` of homology."""
    out = {}
    for m in F.degrees():
        n = F.rank(m)
        B = Subgroup.span(n, [F.d(m + 1).apply(v) for v in _unit_vectors(F.rank(m + 1))])
        Z = kernel(F.d(m))
        steps = []
        for p in sorted(set(F.levels[m])):
            Fp = Subgroup.span(n, [tuple(int(i == c) for i in range(n))
                                   for c, lv in enumerate(F.levels[m]) if lv <= p])
            steps.append((p, quotient(subgroup_sum(intersection(Z, Fp), B), B).group))
        out[m] = steps
    return out


def _unit_vectors(n: int):
    return [tuple(int(i == j) for i in range(n)) for j in range(n)]


# ---------------------------------------------------------------------------
# morphisms


@dataclass
class SpectralMorphism:
    """Matrices ``maps[r][(p, q)]: E^r_{p,q} -> 'E^r_{p,q}`` induced by a filtered map."""

    phi: ChainMap
    source: SpectralSequence
    target: SpectralSequence
    maps: dict[int, dict[tuple[int, int], IntMatrix]]

    def at(self, r: int, p: int, q: int) -> IntMatrix:
        m = self.maps[r].get((p, q))
        if m is None:
            return IntMatrix.zeros(len(self.target.page(r).orders(p, q)),
                                   len(self.source.page(r).orders(p, q)))
        return m

    def commutes(self, r: int) -> bool:
        """``d'_r phi_r = phi_r d_r`` modulo the target relations."""
        E, E2 = self.source.page(r), self.target.page(r)
        keys = set(E.entries) | set(E2.entries)
        for p, q in keys:
            b = (p - r, q + r - 1)
            tgt = E2.orders(*b)
            if not tgt:
                continue
            lhs = E2.d(p, q) @ self.at(r, p, q)
            rhs = self.at(r, *b) @ E.d(p, q)
            diff = lhs - rhs
            for i in range(diff.rows):
                o = tgt[i]
                for j in range(diff.cols):
                    x = diff[i, j]
                    if (x % o if o else x):
                        return False
        return True

    def compatible(self, r: int) -> bool:
        """``phi_{r+1}`` agrees with ``(phi_r)_*`` on the common representatives."""
        E_next = self.source.page(r + 1)
        E, E2 = self.source.page(r), self.target.page(r)
        for (p, q), e in E_next.entries.items():
            src = E.entries.get((p, q))
            tgt = E2.entries.get((p, q))
            if src is None or tgt is None:
                continue
            m = self.at(r, p, q)
            for g in e.generators:
                via_page = tgt.reduce(m.apply(src.coords(g)))
                direct = tgt.coords(self.phi[p + q].apply(g))
                if via_page != direct:
                    return False
        return True

    def is_isomorphism(self, r: int) -> bool:
        E, E2 = self.source.page(r), self.target.page(r)
        for p, q in set(E.entries) | set(E2.entries):
            if not is_isomorphism(self.at(r, p, q), E.orders(p, q), E2.orders(p, q)):
                return False
        return True


def induced_morphism(phi: ChainMap, r_max: int | None = None,
                     source: SpectralSequence | None = None,
                     target: SpectralSequence | None = None) -> SpectralMorphism:
    """Page maps induced by a filtered chain map for ``1 <= r <= r_max``."""
    check = phi.verify()
    if not check:
        raise ValueError(f"not a filtered chain map: {check.message}")
    S = source or SpectralSequence(phi.source)
    T = target or SpectralSequence(phi.target)
    if r_max is None:
        r_max = max(S.length, T.length) + 1
    maps = {}
    for r in range(1, r_max + 2):
        E, E2 = S.page(r), T.page(r)
        mr = {}
        for (p, q), e in E.entries.items():
            tgt = E2.entries.get((p, q))
            if tgt is None:
                continue
            mr[(p, q)] = induced_map(phi[p + q], e, tgt)
        maps[r] = mr
    return SpectralMorphism(phi, S, T, maps)


def same_pages(a: SpectralSequence, b: SpectralSequence, r_from: int = 2,
               r_to: int | None = None) -> CheckResult:
    """Page groups and images of ``d_r`` agree for ``r_from <= r <= r_to``."""
    if r_to is None:
        r_to = max(a.length, b.length) + 1
    for r in range(r_from, r_to + 1):
        Ea, Eb = a.page(r), b.page(r)
        for key in sorted(set(Ea.entries) | set(Eb.entries)):
            if Ea.group(*key) != Eb.group(*key):
                return CheckResult(False, f"E^{r}{key} differs",
                                   {"r": r, "bidegree": key, "left": Ea.group(*key),
                                    "right": Eb.group(*key)})
            if Ea.image_group(*key) != Eb.image_group(*key):
                return CheckResult(False, f"image of d_{r} at {key} differs",
                                   {"r": r, "bidegree": key})
    return CheckResult(True, f"pages agree for {r_from} <= r <= {r_to}")

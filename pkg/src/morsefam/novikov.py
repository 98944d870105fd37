"""Novikov ring arithmetic with explicit precision, and Novikov complexes.

An element is a finite sum of terms ``c e^A`` (``A`` in a lattice Gamma)
together with a precision floor ``pi``: the element is known modulo terms
with ``omega(A) <= pi``.  ``pi = None`` means the element is exact.  Terms
of decreasing ``omega`` are the "small" direction in which infinite sums are
allowed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Iterable, Mapping, Sequence

from .complexes import CheckResult, GradedComplex, homology_groups
from .exact_algebra import ContractViolation, FgAbGroup, IntMatrix, Subgroup, kernel
from .morse import MorseData

__all__ = [
    "CoeffLattice",
    "NovikovElement",
    "AnchoredCritPoint",
    "NovikovComplexData",
    "LambdaComplex",
    "NovikovHomology",
    "ReferenceFamily",
    "Transport",
    "PrecisionExhausted",
    "NotAUnit",
    "invert",
    "novikov_homology",
    "lambda_rank",
    "family_novikov_assemble",
    "family_e2_dims",
    "local_coefficient_dims",
    "reference_rescaling_check",
    "circle_one_form",
    "from_morse",
]

Key = tuple[int, ...]
Floor = Fraction | None  # None is minus infinity


class PrecisionExhausted(ArithmeticError):
    """The requested answer depends on terms below the available precision."""


class NotAUnit(ContractViolation):
    pass


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(x)


def _fmax(*xs: Floor) -> Floor:
    vals = [x for x in xs if x is not None]
    return max(vals) if vals else None


def _fadd(a: Floor, b: Floor) -> Floor:
    return None if a is None or b is None else a + b


@dataclass(frozen=True)
class CoeffLattice:
    """Free abelian Gamma of rank r with exact rational ``omega: Gamma -> Q``."""

    rank: int
    omega: tuple[Fraction, ...]

    def __post_init__(self):
        om = tuple(_frac(x) for x in self.omega)
        if len(om) != self.rank:
            raise ContractViolation("omega needs one value per lattice generator")
        object.__setattr__(self, "omega", om)

    def value(self, A: Sequence[int]) -> Fraction:
        return sum((w * a for w, a in zip(self.omega, A)), Fraction(0))

    def zero_key(self) -> Key:
        return (0,) * self.rank

    def kernel(self) -> Subgroup:
        """``K = ker(omega)``, a saturated sublattice of Gamma."""
        if self.rank == 0:
            return Subgroup(0, ())
        den = lcm(*(w.denominator for w in self.omega))
        row = [int(w * den) for w in self.omega]
        return kernel(IntMatrix.from_rows([row], cols=self.rank))

    @property
    def is_field_case(self) -> bool:
        """Gamma/K is Z: with rational coefficients the Novikov ring is a field."""
        return self.rank == 1 and self.omega[0] != 0

    def to_json(self) -> dict:
        return {"rank": self.rank, "omega": [str(w) for w in self.omega]}

    @classmethod
    def from_json(cls, data: Mapping) -> "CoeffLattice":
        return cls(int(data["rank"]), tuple(_frac(w) for w in data["omega"]))


class NovikovElement:
    """Truncated series ``sum c_A e^A`` known modulo ``omega(A) <= floor``."""

    __slots__ = ("lattice", "terms", "floor")

    def __init__(self, lattice: CoeffLattice, terms: Mapping[Key, int | Fraction] | None = None,
                 floor: Floor = None):
        self.lattice = lattice
        self.floor = None if floor is None else _frac(floor)
        clean = {}
        for A, c in (terms or {}).items():
            A = tuple(int(a) for a in A)
            if len(A) != lattice.rank:
                raise ContractViolation(f"class {A} does not live in a rank-{lattice.rank} lattice")
            if c and (self.floor is None or lattice.value(A) > self.floor):
                clean[A] = clean.get(A, 0) + c
        self.terms = {A: c for A, c in clean.items() if c}

    # constructors
    @classmethod
    def zero(cls, lattice: CoeffLattice) -> "NovikovElement":
        return cls(lattice)

    @classmethod
    def one(cls, lattice: CoeffLattice) -> "NovikovElement":
        return cls(lattice, {lattice.zero_key(): 1})

    @classmethod
    def monomial(cls, lattice: CoeffLattice, A: Sequence[int], c: int | Fraction = 1) -> "NovikovElement":
        return cls(lattice, {tuple(A): c})

    @classmethod
    def constant(cls, lattice: CoeffLattice, c: int | Fraction) -> "NovikovElement":
        return cls(lattice, {lattice.zero_key(): c})

    # inspection
    def is_zero(self) -> bool:
        """No known terms (it may still be nonzero below the floor)."""
        return not self.terms

    def is_exact(self) -> bool:
        return self.floor is None

    def is_exact_zero(self) -> bool:
        return not self.terms and self.floor is None

    def support_max(self) -> Floor:
        if not self.terms:
            return self.floor
        return max(self.lattice.value(A) for A in self.terms)

    def leading(self) -> list[tuple[Key, int | Fraction]]:
        if not self.terms:
            return []
        top = self.support_max()
        return sorted((A, c) for A, c in self.terms.items() if self.lattice.value(A) == top)

    def is_unit(self, mode: str = "Z") -> bool:
        lead = self.leading()
        if len(lead) != 1:
            return False
        return mode == "Q" or lead[0][1] in (1, -1)

    def truncate(self, floor: Floor) -> "NovikovElement":
        return NovikovElement(self.lattice, self.terms, _fmax(self.floor, floor))

    # arithmetic
    def _check(self, other: "NovikovElement"):
        if other.lattice != self.lattice:
            raise ContractViolation("Novikov elements over different lattices")

    def _coerce(self, other) -> "NovikovElement":
        if isinstance(other, NovikovElement):
            self._check(other)
            return other
        if isinstance(other, (int, Fraction)):
            return NovikovElement.constant(self.lattice, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self.terms)
        for A, c in other.terms.items():
            terms[A] = terms.get(A, 0) + c
        return NovikovElement(self.lattice, terms, _fmax(self.floor, other.floor))

    __radd__ = __add__

    def __neg__(self):
        return NovikovElement(self.lattice, {A: -c for A, c in self.terms.items()}, self.floor)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        floor = _fmax(_fadd(self.floor, other.support_max()), _fadd(other.floor, self.support_max()))
        terms: dict[Key, int | Fraction] = {}
        for A, a in self.terms.items():
            for B, b in other.terms.items():
                C = tuple(x + y for x, y in zip(A, B))
                terms[C] = terms.get(C, 0) + a * b
        return NovikovElement(self.lattice, terms, floor)

    __rmul__ = __mul__

    def shift(self, A: Sequence[int]) -> "NovikovElement":
        """Multiplication by ``e^A``."""
        w = self.lattice.value(A)
        return NovikovElement(self.lattice,
                              {tuple(x + a for x, a in zip(B, A)): c for B, c in self.terms.items()},
                              None if self.floor is None else self.floor + w)

    def agrees_with(self, other: "NovikovElement", precision: Fraction) -> bool:
        """Equal modulo terms with ``omega <= precision`` (and known that far)."""
        d = self - other
        if d.floor is not None and d.floor > precision:
            return False
        return all(self.lattice.value(A) <= precision for A in d.terms)

    def __eq__(self, other):
        if not isinstance(other, NovikovElement):
            return NotImplemented
        return self.lattice == other.lattice and self.terms == other.terms and self.floor == other.floor

    def __hash__(self):
        return hash((self.lattice, tuple(sorted(self.terms.items())), self.floor))

    def __repr__(self):
        if not self.terms:
            body = "0"
        else:
            body = " + ".join(f"{c}e^{list(A)}" for A, c in
                              sorted(self.terms.items(), key=lambda t: -self.lattice.value(t[0])))
        fl = "" if self.floor is None else f" + O(omega <= {self.floor})"
        return f"<{body}{fl}>"

    def to_json(self) -> dict:
        return {**self.lattice.to_json(),
                "terms": [{"A": list(A), "c": c if isinstance(c, int) else str(c)}
                          for A, c in sorted(self.terms.items())],
                "floor": "-inf" if self.floor is None else str(self.floor)}

    @classmethod
    def from_json(cls, data: Mapping) -> "NovikovElement":
        lat = CoeffLattice.from_json(data)
        fl = data.get("floor", "-inf")
        terms = {}
        for t in data.get("terms", ()):
            c = t["c"]
            terms[tuple(t["A"])] = c if isinstance(c, int) else _frac(c)
        return cls(lat, terms, None if fl == "-inf" else _frac(fl))


def invert(u: NovikovElement, precision, mode: str = "Z") -> NovikovElement:
    """Inverse of a unit, with ``u * invert(u) = 1`` modulo ``omega <= precision``.

    Writes ``u = c e^L (1 - v)`` with every term of ``v`` of negative omega and
    sums the geometric series in ``v``.
    """
    precision = _frac(precision)
    lat = u.lattice
    lead = u.leading()
    if not lead:
        raise NotAUnit("cannot invert an element with no known terms")
    if len(lead) != 1:
        raise NotAUnit(f"leading term is not unique ({len(lead)} terms share the top omega value)")
    L, c = lead[0]
    if mode == "Z" and c not in (1, -1):
        raise NotAUnit(f"leading coefficient {c} is not a unit in Z; use mode='Q'")
    if mode not in ("Z", "Q"):
        raise ValueError(f"unknown mode {mode!r}")
    wL = lat.value(L)
    cinv = c if c in (1, -1) else Fraction(1, 1) / c
    negL = tuple(-a for a in L)
    w = u.shift(negL) * cinv  # = 1 - v, floor pi_u - omega(L)
    if w.floor is not None and w.floor > precision:
        raise PrecisionExhausted(
            f"u is known only modulo omega <= {u.floor}; cannot invert to precision {precision}")
    v = (NovikovElement.one(lat) - w).truncate(precision)
    total = NovikovElement.one(lat)
    power = NovikovElement.one(lat)
    while True:
        power = (power * v).truncate(precision)
        if power.is_zero():
            break
        total = total + power
    series = NovikovElement(lat, total.terms, precision)
    return series.shift(negL) * cinv


# ---------------------------------------------------------------------------
# complexes over the Novikov ring


@dataclass(frozen=True)
class AnchoredCritPoint:
    """A critical point with an anchor class relative to its base anchor."""

    label: str
    index: int
    anchor: Key
    base_action: Fraction = Fraction(0)

    def action(self, lattice: CoeffLattice) -> Fraction:
        return _frac(self.base_action) + lattice.value(self.anchor)

    def reanchor(self, A: Sequence[int]) -> "AnchoredCritPoint":
        return AnchoredCritPoint(self.label, self.index,
                                 tuple(a + b for a, b in zip(self.anchor, A)), self.base_action)


Matrix = list[list[NovikovElement]]


def _zeros(lat: CoeffLattice, rows: int, cols: int) -> Matrix:
    return [[NovikovElement.zero(lat) for _ in range(cols)] for _ in range(rows)]


def _mat_mul(lat, A: Matrix, B: Matrix, inner: int) -> Matrix:
    rows, cols = len(A), (len(B[0]) if B else 0)
    out = _zeros(lat, rows, cols)
    for i in range(rows):
        for j in range(cols):
            acc = NovikovElement.zero(lat)
            for k in range(inner):
                if A[i][k].terms or A[i][k].floor is not None:
                    acc = acc + A[i][k] * B[k][j]
            out[i][j] = acc
    return out


@dataclass
class LambdaComplex:
    """Free complex over the Novikov ring; optional filtration levels."""

    lattice: CoeffLattice
    basis: dict[int, list]
    differentials: dict[int, Matrix]
    levels: dict[int, list[int]] = field(default_factory=dict)

    def rank(self, n: int) -> int:
        return len(self.basis.get(n, ()))

    def degrees(self) -> list[int]:
        return sorted(self.basis)

    def d(self, n: int) -> Matrix:
        m = self.differentials.get(n)
        return m if m is not None else _zeros(self.lattice, self.rank(n - 1), self.rank(n))

    def check_d2(self, precision=None) -> CheckResult:
        """``d d = 0`` modulo terms at or below the working precision."""
        prec = None if precision is None else _frac(precision)
        for n in self.degrees():
            if not self.rank(n) or not self.rank(n - 2):
                continue
            P = _mat_mul(self.lattice, self.d(n - 1), self.d(n), self.rank(n - 1))
            for i, row in enumerate(P):
                for j, e in enumerate(row):
                    bad = [A for A in e.terms if prec is None or self.lattice.value(A) > prec]
                    if bad:
                        return CheckResult(False, "d^2 != 0",
                                           {"degree": n, "source": self.basis[n][j],
                                            "target": self.basis[n - 2][i], "entry": repr(e)})
        return CheckResult(True, "d^2 = 0 to working precision")


def _pick_pivot(M: Matrix, unit_mode: str | None):
    best = None
    for i, row in enumerate(M):
        for j, e in enumerate(row):
            if not e.terms:
                continue
            if unit_mode is not None and not e.is_unit(unit_mode):
                continue
            score = (e.floor is not None, len(e.terms))
            if best is None or score < best[0]:
                best = (score, i, j)
    return None if best is None else best[1:]


def lambda_rank(M: Matrix, lattice: CoeffLattice) -> int:
    """Rank over the fraction field, by fraction-free elimination.

    An entry with no known terms but a finite floor cannot be decided; if
    such entries are all that remain, :class:`PrecisionExhausted` is raised.
    """
    M = [list(r) for r in M]
    rank = 0
    while M and M[0]:
        piv = _pick_pivot(M, None)
        if piv is None:
            unknown = [(i, j) for i, r in enumerate(M) for j, e in enumerate(r) if e.floor is not None]
            if unknown:
                raise PrecisionExhausted(
                    f"{len(unknown)} entries vanish only to precision; rank undecided")
            break
        pi, pj = piv
        p = M[pi][pj]
        rank += 1
        new = []
        for i, row in enumerate(M):
            if i == pi:
                continue
            a = row[pj]
            if a.is_exact_zero():
                new.append([x for j, x in enumerate(row) if j != pj])
            else:
                new.append([p * x - a * M[pi][j] for j, x in enumerate(row) if j != pj])
        M = new
    return rank


def _unit_eliminate(M: Matrix, lattice: CoeffLattice, precision: Fraction):
    """Schur-complement away unit pivots; return what remains."""
    M = [list(r) for r in M]
    while M and M[0]:
        piv = _pick_pivot(M, "Z")
        if piv is None:
            break
        pi, pj = piv
        pinv = invert(M[pi][pj], precision, "Z")
        new = []
        for i, row in enumerate(M):
            if i == pi:
                continue
            f = row[pj] * pinv
            new.append([x - f * M[pi][j] for j, x in enumerate(row) if j != pj])
        M = new
    return M


@dataclass
class NovikovHomology:
    degree: int
    rank: int
    mode: str
    precision: Fraction | None
    elementary: list[int] = field(default_factory=list)
    group: FgAbGroup | None = None
    caveat: str = ""

    def to_json(self) -> dict:
        out = {"degree": self.degree, "rank": self.rank, "mode": self.mode,
               "precision": None if self.precision is None else str(self.precision),
               "elementary": self.elementary, "caveat": self.caveat}
        if self.group is not None:
            out["group"] = self.group.to_json()
        return out


def _integer_complex(C: LambdaComplex) -> GradedComplex:
    diffs = {}
    for n, M in C.differentials.items():
        rows = [[sum(e.terms.values()) if e.terms else 0 for e in row] for row in M]
        diffs[n] = IntMatrix.from_rows(rows, cols=C.rank(n))
    return GradedComplex(C.basis, diffs)


def novikov_homology(C: "LambdaComplex | NovikovComplexData", mode: str = "Q",
                     precision=-10) -> dict[int, NovikovHomology]:
    """Homology over the Novikov ring.

    ``mode='Q'``: rational coefficients, requires Gamma of rank one with
    nonzero omega so that the ring is a field; ranks are exact.
    ``mode='Z'``: integer coefficients; unit pivots are eliminated and the
    leading coefficients of the remaining pivots are reported as
    precision-stamped elementary data, not as invariant factors.
    A rank-zero lattice (exact forms) gives ordinary homology over Z.
    """
    if isinstance(C, NovikovComplexData):
        C = C.complex()
    prec = _frac(precision)
    lat = C.lattice
    out = {}
    if lat.rank == 0:
        groups = homology_groups(_integer_complex(C))
        for n in C.degrees():
            g = groups.get(n, FgAbGroup())
            out[n] = NovikovHomology(n, g.free_rank, "exact", None, list(g.torsion), g,
                                     "Gamma is trivial: ordinary homology over Z")
        return out
    if mode == "Q" and not lat.is_field_case:
        raise ContractViolation("Q-field mode needs Gamma of rank 1 with omega != 0")
    ranks = {n: lambda_rank(C.d(n), lat) if C.rank(n) and C.rank(n - 1) else 0
             for n in C.degrees()}
    for n in C.degrees():
        r = C.rank(n) - ranks.get(n, 0) - ranks.get(n + 1, 0)
        if mode == "Q":
            out[n] = NovikovHomology(n, r, "Q", prec)
            continue
        elementary = []
        if C.rank(n + 1) and C.rank(n):
            rest = _unit_eliminate(C.d(n + 1), lat, prec)
            while rest and rest[0]:
                piv = _pick_pivot(rest, None)
                if piv is None:
                    break
                pi, pj = piv
                lead = rest[pi][pj].leading()
                elementary.append(abs(lead[0][1]) if len(lead) == 1 else 0)
                rest = [[x for j, x in enumerate(row) if j != pj]
                        for i, row in enumerate(rest) if i != pi]
        out[n] = NovikovHomology(n, r, "Z", prec, [e for e in elementary if e != 1],
                                 caveat="elementary data depend on the truncation precision")
    return out


@dataclass
class NovikovComplexData:
    """Critical points of a closed 1-form with flow records ``(p, q, A, count)``.

    A record contributes ``count * e^A`` to the coefficient of ``q`` in the
    differential of ``p``.
    """

    lattice: CoeffLattice
    points: list[tuple[str, int]]
    flows: list[tuple[str, str, Key, int]] = field(default_factory=list)
    floor: Floor = None

    def __post_init__(self):
        self.points = [(str(a), int(b)) for a, b in self.points]
        idx = dict(self.points)
        self.flows = [(str(p), str(q), tuple(int(x) for x in A), int(c)) for p, q, A, c in self.flows]
        for p, q, A, c in self.flows:
            if idx[p] - idx[q] != 1:
                raise ContractViolation(f"flow {p}->{q} does not drop the index by one")

    @property
    def indices(self) -> dict[str, int]:
        return dict(self.points)

    def points_of_index(self, i: int) -> list[str]:
        return [p for p, k in self.points if k == i]

    @property
    def dimension(self) -> int:
        return max((k for _, k in self.points), default=0)

    def labels(self) -> list[str]:
        return [p for p, _ in self.points]

    def matrix(self) -> Matrix:
        """Full differential on all critical points (rows target, cols source)."""
        lab = self.labels()
        pos = {p: k for k, p in enumerate(lab)}
        M = _zeros(self.lattice, len(lab), len(lab))
        for p, q, A, c in self.flows:
            M[pos[q]][pos[p]] = M[pos[q]][pos[p]] + NovikovElement.monomial(self.lattice, A, c)
        if self.floor is not None:
            M = [[e.truncate(self.floor) for e in row] for row in M]
        return M

    def complex(self) -> LambdaComplex:
        M = self.matrix()
        pos = {p: k for k, p in enumerate(self.labels())}
        basis = {i: self.points_of_index(i) for i in range(0, self.dimension + 1)}
        diffs = {i: [[M[pos[q]][pos[p]] for p in basis[i]] for q in basis[i - 1]]
                 for i in range(1, self.dimension + 1)}
        C = LambdaComplex(self.lattice, basis, diffs)
        chk = C.check_d2(self.floor)
        if not chk:
            raise ContractViolation(f"Novikov differential: {chk.message} {chk.details}")
        return C

    def to_json(self) -> dict:
        return {"lattice": self.lattice.to_json(),
                "points": [{"label": p, "index": i} for p, i in self.points],
                "flows": [{"from": p, "to": q, "A": list(A), "count": c} for p, q, A, c in self.flows]}

    @classmethod
    def from_json(cls, data: Mapping) -> "NovikovComplexData":
        return cls(CoeffLattice.from_json(data["lattice"]),
                   [(p["label"], p["index"]) for p in data["points"]],
                   [(f["from"], f["to"], tuple(f["A"]), f["count"]) for f in data.get("flows", ())])


def from_morse(M: MorseData, lattice: CoeffLattice | None = None) -> NovikovComplexData:
    """Morse data as Novikov data with every flow in the zero class."""
    lat = lattice or CoeffLattice(0, ())
    return NovikovComplexData(lat, [(c.label, c.index) for c in M.critical_points],
                              [(a, b, lat.zero_key(), c) for a, b, c in M.flows])


def circle_one_form(c, lattice: CoeffLattice | None = None) -> NovikovComplexData:
    """S^1 with a closed 1-form of class ``c``: ``d p1 = (1 - e^A) p0``, ``omega(A) = -c``."""
    c = _frac(c)
    lat = lattice or CoeffLattice(1, (-c,) if c else (Fraction(0),))
    A = (1,) + (0,) * (lat.rank - 1)
    return NovikovComplexData(lat, [("p1", 1), ("p0", 0)],
                              [("p1", "p0", lat.zero_key(), 1), ("p1", "p0", A, -1)])


# ---------------------------------------------------------------------------
# families over the circle


@dataclass(frozen=True)
class ReferenceFamily:
    """Reference points over S^1, determined by ``chi`` on the generating loop."""

    chi: Key

    def shifted(self, A: Sequence[int]) -> "ReferenceFamily":
        return ReferenceFamily(tuple(a + b for a, b in zip(self.chi, A)))


@dataclass
class Transport:
    """Continuation along one base flow line, with its sign and winding number.

    ``matrix`` acts on all fiber critical points (rows over ``target``),
    integer entries or Novikov elements.  ``winding`` counts crossings of the
    reference cut and multiplies the block by ``e^(winding * chi)``.
    """

    source: str
    target: str
    sign: int
    matrix: list
    winding: int = 0


def _as_elem(lat, x) -> NovikovElement:
    return x if isinstance(x, NovikovElement) else NovikovElement.constant(lat, x)


def _transport_entries(base: MorseData, fibers: Mapping[str, NovikovComplexData],
                       transports: Sequence[Transport], R: ReferenceFamily):
    """``((x, p), (y, q)), e, winding`` for every nonzero transport contribution."""
    bidx = base.indices
    lat = next(iter(fibers.values())).lattice
    for t in transports:
        if bidx[t.source] - bidx[t.target] != 1:
            raise ContractViolation(f"transport {t.source}->{t.target} is not along a flow line")
        Fs, Ft = fibers[t.source], fibers[t.target]
        twist = NovikovElement.monomial(lat, tuple(t.winding * a for a in R.chi))
        for c, p in enumerate(Fs.labels()):
            for r, q in enumerate(Ft.labels()):
                e = _as_elem(lat, t.matrix[r][c])
                if e.is_exact_zero():
                    continue
                if Ft.indices[q] != Fs.indices[p]:
                    raise ContractViolation(f"transport entry {p}->{q} changes the fiber index")
                yield ((t.source, p), (t.target, q)), e * twist * t.sign, t.winding


def family_novikov_assemble(base: MorseData, fibers: Mapping[str, NovikovComplexData],
                            transports: Sequence[Transport], R: ReferenceFamily,
                            precision=None) -> LambdaComplex:
    """Filtered complex over the Novikov ring for a family over S^1."""
    if base.dimension > 1:
        raise ContractViolation("family Novikov complexes are supported over circle bases only")
    lats = {F.lattice for F in fibers.values()}
    if len(lats) != 1:
        raise ContractViolation("all fibers must share one coefficient lattice")
    lat = lats.pop()
    if len(R.chi) != lat.rank:
        raise ContractViolation("chi does not live in the coefficient lattice")
    bidx = base.indices
    gens = [(x, p) for x in base.labels for p in fibers[x].labels()]

    def deg(g):
        return bidx[g[0]] + fibers[g[0]].indices[g[1]]

    top = max((deg(g) for g in gens), default=0)
    basis = {m: [g for g in gens if deg(g) == m] for m in range(0, top + 1)}
    pos = {m: {g: k for k, g in enumerate(b)} for m, b in basis.items()}
    diffs = {m: _zeros(lat, len(basis[m - 1]), len(basis[m])) for m in range(1, top + 1)}

    def add(m, tgt, src, e):
        r, c = pos[m - 1][tgt], pos[m][src]
        diffs[m][r][c] = diffs[m][r][c] + e

    for x in base.labels:
        F = fibers[x]
        M = F.matrix()
        lab = F.labels()
        sign = -1 if bidx[x] % 2 else 1
        for c, p in enumerate(lab):
            for r, q in enumerate(lab):
                if M[r][c].terms or M[r][c].floor is not None:
                    add(deg((x, p)), (x, q), (x, p), M[r][c] * sign)
    flow_count: dict = {}
    for t in transports:
        flow_count[(t.source, t.target)] = flow_count.get((t.source, t.target), 0) + t.sign
    for (src, tgt), e, _ in _transport_entries(base, fibers, transports, R):
        add(deg(src), tgt, src, e)
    net = {k: v for k, v in base.net_counts().items() if v}
    if {k: v for k, v in flow_count.items() if v} != net:
        raise ContractViolation("transport signs disagree with the base flow counts")
    levels = {m: [bidx[x] for x, _ in b] for m, b in basis.items()}
    C = LambdaComplex(lat, basis, diffs, levels)
    chk = C.check_d2(precision)
    if not chk:
        raise ContractViolation(f"family Novikov complex: {chk.message} {chk.details}")
    return C


def _columns(M: Matrix, cols: Iterable[int]) -> Matrix:
    cols = list(cols)
    return [[row[j] for j in cols] for row in M]


def _rows(M: Matrix, rows: Iterable[int]) -> Matrix:
    return [M[i] for i in rows]


def family_e2_dims(C: LambdaComplex) -> dict[tuple[int, int], int]:
    """Dimensions of ``E^2 = E^inf`` over the Novikov field for a circle base.

    With levels 0 and 1 only, ``E^inf_{0,m}`` is ``F_0 H_m`` and
    ``E^inf_{1,m-1} = H_m / F_0 H_m``; both come from ranks of submatrices.
    """
    lat = C.lattice
    if not lat.is_field_case:
        raise ContractViolation("dimensions over the Novikov field need Gamma of rank 1, omega != 0")
    if set(x for lv in C.levels.values() for x in lv) - {0, 1}:
        raise ContractViolation("family_e2_dims handles filtrations of length one")

    def rk(M):
        return lambda_rank(M, lat) if M and M[0] else 0

    out = {}
    for m in C.degrees():
        lv = C.levels.get(m, [])
        f0 = [k for k, l in enumerate(lv) if l == 0]
        f1 = [k for k, l in enumerate(lv) if l == 1]
        d_m = C.d(m) if C.rank(m - 1) else []
        d_up = C.d(m + 1) if C.rank(m + 1) else []
        ker_f0 = len(f0) - (rk(_columns(d_m, f0)) if d_m else 0)
        rank_up = rk(d_up) if d_up else 0
        proj_up = rk(_rows(d_up, f1)) if d_up and f1 else 0
        e0 = ker_f0 - (rank_up - proj_up)
        h = C.rank(m) - (rk(d_m) if d_m else 0) - rank_up
        if e0:
            out[(0, m)] = e0
        if h - e0:
            out[(1, m - 1)] = h - e0
    return out


def local_coefficient_dims(base: MorseData, fibers: Mapping[str, NovikovComplexData],
                           transports: Sequence[Transport], R: ReferenceFamily):
    """``dim H_i(S^1; F_j)`` for fibers whose Novikov differential vanishes
    (stalk = chain module) or whose Novikov homology vanishes (zero stalk)."""
    lat = next(iter(fibers.values())).lattice
    acyclic = {}
    for x, F in fibers.items():
        H = novikov_homology(F.complex(), "Q")
        zero_d = all(not e.terms for row in F.matrix() for e in row)
        if not zero_d and any(h.rank for h in H.values()):
            raise ContractViolation("local-coefficient path needs fibers with zero differential "
                                    "or zero Novikov homology")
        acyclic[x] = not any(h.rank for h in H.values())
    out = {}
    if base.labels != ["x1", "x0"] and set(base.labels) != {"x1", "x0"}:
        raise ContractViolation("expects the two-point circle base")
    F1, F0 = fibers["x1"], fibers["x0"]
    if acyclic["x1"] and acyclic["x0"]:
        return out
    top = max(F1.dimension, F0.dimension)
    for j in range(0, top + 1):
        src, dst = F1.points_of_index(j), F0.points_of_index(j)
        M = _zeros(lat, len(dst), len(src))
        s_pos = {p: k for k, p in enumerate(F1.labels())}
        d_pos = {q: k for k, q in enumerate(F0.labels())}
        for t in transports:
            twist = NovikovElement.monomial(lat, tuple(t.winding * a for a in R.chi))
            for c, p in enumerate(src):
                for r, q in enumerate(dst):
                    e = _as_elem(lat, t.matrix[d_pos[q]][s_pos[p]])
                    M[r][c] = M[r][c] + e * twist * t.sign
        r = lambda_rank(M, lat) if src and dst else 0
        if len(dst) - r:
            out[(0, j)] = len(dst) - r
        if len(src) - r:
            out[(1, j)] = len(src) - r
    return out


def reference_rescaling_check(base: MorseData, fibers: Mapping[str, NovikovComplexData],
                              transports: Sequence[Transport], R: ReferenceFamily,
                              A: Sequence[int], precision=-10) -> CheckResult:
    """Shift ``chi`` by ``A``: the twisted part of the assembled differential
    must change by exactly ``e^A`` and nothing else may change.

    Homology before and after the shift is returned in ``details``; the two
    families need not have isomorphic homology.
    """
    lat = next(iter(fibers.values())).lattice
    R2 = R.shifted(A)
    if any(t.winding not in (0, 1) for t in transports):
        raise ContractViolation("rescaling check expects winding numbers 0 or 1")
    C1 = family_novikov_assemble(base, fibers, transports, R)
    C_shift = family_novikov_assemble(base, fibers, transports, R2)
    eA = NovikovElement.monomial(lat, tuple(A))

    def twisted(Rx):
        acc: dict = {}
        for key, e, w in _transport_entries(base, fibers, transports, Rx):
            if w:
                acc[key] = acc.get(key, NovikovElement.zero(lat)) + e
        return acc

    W1, W2 = twisted(R), twisted(R2)
    for key in sorted(set(W1) | set(W2)):
        b1 = W1.get(key, NovikovElement.zero(lat))
        b2 = W2.get(key, NovikovElement.zero(lat))
        if b2 != eA * b1:
            return CheckResult(False, "twisted block is not rescaled by e^A",
                               {"entry": key, "before": repr(b1), "after": repr(b2)})
    # the assembled differentials differ exactly by the change of the twisted blocks
    for m in C1.degrees():
        if not C1.rank(m - 1):
            continue
        for r, tgt in enumerate(C1.basis[m - 1]):
            for c, src in enumerate(C1.basis[m]):
                zero = NovikovElement.zero(lat)
                diff = C_shift.d(m)[r][c] - C1.d(m)[r][c]
                expect = W2.get((src, tgt), zero) - W1.get((src, tgt), zero)
                if diff != expect:
                    return CheckResult(False, "assembled differential changes outside the twisted blocks",
                                       {"source": src, "target": tgt})
    details = {"A": tuple(A)}
    if lat.is_field_case:
        h1 = {n: h.rank for n, h in novikov_homology(C1, "Q", precision).items()}
        h2 = {n: h.rank for n, h in novikov_homology(C_shift, "Q", precision).items()}
    else:
        h1 = {n: (h.rank, tuple(h.elementary)) for n, h in novikov_homology(C1, "Z", precision).items()}
        h2 = {n: (h.rank, tuple(h.elementary)) for n, h in novikov_homology(C_shift, "Z", precision).items()}
    # the shifted family is a different local system; its homology is reported, not compared
    details.update({"before": h1, "after": h2})
    return CheckResult(True, "monodromy rescaled by exactly e^A", details)

"""Exact integer linear algebra.

Smith normal form, column Hermite normal form, subgroup lattices in Z^n and
presentations of finitely generated abelian groups.  Everything works on
Python ints, so entries never overflow.

Subgroups are stored by a canonical column HNF basis: two ``Subgroup``
objects are equal exactly when they span the same lattice.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

__all__ = [
    "IntMatrix",
    "SmithForm",
    "Subgroup",
    "FgAbGroup",
    "Quotient",
    "ContractViolation",
    "smith_normal_form",
    "kernel",
    "image",
    "preimage",
    "subgroup_sum",
    "intersection",
    "quotient",
    "full_lattice",
    "trivial_subgroup",
    "induced_map",
    "is_isomorphism",
    "subquotient_homology",
]


class ContractViolation(ValueError):
    """Raised when an operation is called outside its precondition."""


# ---------------------------------------------------------------------------
# matrices


def _rows(a) -> list[list[int]]:
    if isinstance(a, IntMatrix):
        return a.to_rows()
    return [[int(x) for x in row] for row in a]


@dataclass(frozen=True)
class IntMatrix:
    """Dense integer matrix stored row-major."""

    rows: int
    cols: int
    entries: tuple[int, ...]

    def __post_init__(self):
        if len(self.entries) != self.rows * self.cols:
            raise ContractViolation(
                f"entries length {len(self.entries)} != {self.rows}x{self.cols}"
            )

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], cols: int | None = None) -> "IntMatrix":
        rows = [list(r) for r in rows]
        if cols is None:
            cols = len(rows[0]) if rows else 0
        for r in rows:
            if len(r) != cols:
                raise ContractViolation("ragged rows")
        return cls(len(rows), cols, tuple(int(x) for r in rows for x in r))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "IntMatrix":
        return cls(rows, cols, (0,) * (rows * cols))

    @classmethod
    def identity(cls, n: int) -> "IntMatrix":
        return cls(n, n, tuple(int(i == j) for i in range(n) for j in range(n)))

    @classmethod
    def from_columns(cls, columns: Sequence[Sequence[int]], rows: int) -> "IntMatrix":
        return cls.from_rows([[c[i] for c in columns] for i in range(rows)], cols=len(columns))

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i * self.cols + j]

    def to_rows(self) -> list[list[int]]:
        c = self.cols
        return [list(self.entries[i * c:(i + 1) * c]) for i in range(self.rows)]

    def columns(self) -> list[tuple[int, ...]]:
        return [tuple(self.entries[i * self.cols + j] for i in range(self.rows))
                for j in range(self.cols)]

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def is_zero(self) -> bool:
        return not any(self.entries)

    def transpose(self) -> "IntMatrix":
        return IntMatrix.from_rows([list(c) for c in self.columns()], cols=self.rows)

    T = property(transpose)

    def __matmul__(self, other: "IntMatrix") -> "IntMatrix":
        if self.cols != other.rows:
            raise ContractViolation(f"shape mismatch {self.shape} @ {other.shape}")
        return IntMatrix.from_rows(matmul(self.to_rows(), other.to_rows(), other.cols),
                                   cols=other.cols)

    def __add__(self, other: "IntMatrix") -> "IntMatrix":
        if self.shape != other.shape:
            raise ContractViolation("shape mismatch in addition")
        return IntMatrix(self.rows, self.cols,
                         tuple(a + b for a, b in zip(self.entries, other.entries)))

    def __sub__(self, other: "IntMatrix") -> "IntMatrix":
        if self.shape != other.shape:
            raise ContractViolation("shape mismatch in subtraction")
        return IntMatrix(self.rows, self.cols,
                         tuple(a - b for a, b in zip(self.entries, other.entries)))

    def __neg__(self) -> "IntMatrix":
        return IntMatrix(self.rows, self.cols, tuple(-a for a in self.entries))

    def scale(self, k: int) -> "IntMatrix":
        return IntMatrix(self.rows, self.cols, tuple(k * a for a in self.entries))

    def apply(self, v: Sequence[int]) -> tuple[int, ...]:
        if len(v) != self.cols:
            raise ContractViolation("vector length mismatch")
        c = self.cols
        e = self.entries
        return tuple(sum(e[i * c + j] * v[j] for j in range(c) if v[j]) for i in range(self.rows))

    def __repr__(self):
        return f"IntMatrix({self.to_rows()!r})"


def matmul(a: list[list[int]], b: list[list[int]], bcols: int) -> list[list[int]]:
    out = []
    for row in a:
        acc = [0] * bcols
        for k, x in enumerate(row):
            if x:
                bk = b[k]
                for j in range(bcols):
                    if bk[j]:
                        acc[j] += x * bk[j]
        out.append(acc)
    return out


def as_matrix(a) -> IntMatrix:
    if isinstance(a, IntMatrix):
        return a
    rows = [list(r) for r in a]
    return IntMatrix.from_rows(rows, cols=len(rows[0]) if rows else 0)


# ---------------------------------------------------------------------------
# Smith normal form


@dataclass(frozen=True)
class SmithForm:
    """``U @ A @ V == diag(d)`` with ``d[k] | d[k+1]`` and zeros trailing."""

    d: tuple[int, ...]
    U: IntMatrix
    V: IntMatrix
    U_inv: IntMatrix = field(repr=False, compare=False)

    def diagonal_matrix(self, rows: int, cols: int) -> IntMatrix:
        out = [[0] * cols for _ in range(rows)]
        for k, x in enumerate(self.d):
            out[k][k] = x
        return IntMatrix.from_rows(out, cols=cols)


def smith_normal_form(A) -> SmithForm:
    """Smith normal form with unimodular transforms (and ``U^{-1}``)."""
    M = _rows(A)
    m = len(M)
    n = len(M[0]) if m else (A.cols if isinstance(A, IntMatrix) else 0)
    U = [[int(i == j) for j in range(m)] for i in range(m)]
    Ui = [[int(i == j) for j in range(m)] for i in range(m)]
    V = [[int(i == j) for j in range(n)] for i in range(n)]

    def swap_rows(i, j):
        M[i], M[j] = M[j], M[i]
        U[i], U[j] = U[j], U[i]
        for r in Ui:
            r[i], r[j] = r[j], r[i]

    def swap_cols(i, j):
        for r in M:
            r[i], r[j] = r[j], r[i]
        for r in V:
            r[i], r[j] = r[j], r[i]

    def add_row(dst, src, q):  # row_dst += q * row_src
        if not q:
            return
        Md, Ms = M[dst], M[src]
        for k in range(n):
            Md[k] += q * Ms[k]
        Ud, Us = U[dst], U[src]
        for k in range(m):
            Ud[k] += q * Us[k]
        for r in Ui:  # inverse op: col_src -= q * col_dst
            r[src] -= q * r[dst]

    def add_col(dst, src, q):  # col_dst += q * col_src
        if not q:
            return
        for r in M:
            r[dst] += q * r[src]
        for r in V:
            r[dst] += q * r[src]

    d = []
    t = 0
    while t < min(m, n):
        # smallest nonzero entry of the trailing block
        best = None
        for i in range(t, m):
            for j in range(t, n):
                x = M[i][j]
                if x and (best is None or abs(x) < best[0]):
                    best = (abs(x), i, j)
        if best is None:
            break
        _, i, j = best
        swap_rows(t, i)
        swap_cols(t, j)
        while True:
            p = M[t][t]
            dirty = False
            for i in range(t + 1, m):
                if M[i][t]:
                    add_row(i, t, -(M[i][t] // p))
                    if M[i][t]:
                        dirty = True
            for j in range(t + 1, n):
                if M[t][j]:
                    add_col(j, t, -(M[t][j] // p))
                    if M[t][j]:
                        dirty = True
            if dirty:
                best = None
                for i in range(t, m):
                    if M[i][t] and (best is None or abs(M[i][t]) < best[0]):
                        best = (abs(M[i][t]), i, "r")
                for j in range(t, n):
                    if M[t][j] and (best is None or abs(M[t][j]) < best[0]):
                        best = (abs(M[t][j]), j, "c")
                if best[2] == "r":
                    swap_rows(t, best[1])
                else:
                    swap_cols(t, best[1])
                continue
            # divisibility of the remaining block
            bad = None
            for i in range(t + 1, m):
                for j in range(t + 1, n):
                    if M[i][j] % p:
                        bad = i
                        break
                if bad is not None:
                    break
            if bad is None:
                break
            add_row(t, bad, 1)
        if M[t][t] < 0:
            M[t] = [-x for x in M[t]]
            U[t] = [-x for x in U[t]]
            for r in Ui:
                r[t] = -r[t]
        d.append(M[t][t])
        t += 1
    d.extend([0] * (min(m, n) - len(d)))
    return SmithForm(
        tuple(d),
        IntMatrix.from_rows(U, cols=m),
        IntMatrix.from_rows(V, cols=n),
        IntMatrix.from_rows(Ui, cols=m),
    )


# ---------------------------------------------------------------------------
# column echelon / HNF


def _column_echelon(cols: list[list[int]], n: int, track: bool = False):
    """Column-reduce ``cols`` (a list of length-n vectors) in place.

    Returns ``(pivots, transform)`` where ``pivots`` lists the pivot row of
    each leading column and ``transform`` (if requested) holds, for every
    output column, its expression in the input columns.
    """
    k = len(cols)
    T = [[int(i == j) for i in range(k)] for j in range(k)] if track else None
    pivots = []
    pc = 0
    for r in range(n):
        if pc >= k:
            break
        while True:
            best = None
            for c in range(pc, k):
                x = cols[c][r]
                if x and (best is None or abs(x) < abs(cols[best][r])):
                    best = c
            if best is None:
                break
            if best != pc:
                cols[pc], cols[best] = cols[best], cols[pc]
                if track:
                    T[pc], T[best] = T[best], T[pc]
            p = cols[pc][r]
            done = True
            for c in range(pc + 1, k):
                x = cols[c][r]
                if x:
                    q = x // p
                    cc, cp = cols[c], cols[pc]
                    for i in range(r, n):
                        cc[i] -= q * cp[i]
                    if track:
                        tc, tp = T[c], T[pc]
                        for i in range(k):
                            tc[i] -= q * tp[i]
                    if cc[r]:
                        done = False
            if done:
                break
        if cols[pc][r]:
            pivots.append(r)
            pc += 1
    return pivots, T


def _hnf_columns(vectors: Iterable[Sequence[int]], n: int) -> tuple[tuple[int, ...], ...]:
    cols = [list(v) for v in vectors if any(v)]
    pivots, _ = _column_echelon(cols, n)
    basis = cols[: len(pivots)]
    for c, r in enumerate(pivots):
        if basis[c][r] < 0:
            basis[c] = [-x for x in basis[c]]
        p = basis[c][r]
        for c2 in range(c):
            q = basis[c2][r] // p
            if q:
                basis[c2] = [a - q * b for a, b in zip(basis[c2], basis[c])]
    return tuple(tuple(v) for v in basis)


@dataclass(frozen=True)
class Subgroup:
    """A subgroup of Z^n with canonical column-HNF basis."""

    ambient_rank: int
    basis: tuple[tuple[int, ...], ...]

    @classmethod
    def span(cls, n: int, vectors: Iterable[Sequence[int]]) -> "Subgroup":
        vectors = [tuple(v) for v in vectors]
        for v in vectors:
            if len(v) != n:
                raise ContractViolation(f"vector of length {len(v)} in Z^{n}")
        return cls(n, _hnf_columns(vectors, n))

    @property
    def rank(self) -> int:
        return len(self.basis)

    @property
    def matrix(self) -> IntMatrix:
        return IntMatrix.from_columns(self.basis, self.ambient_rank)

    def pivots(self) -> list[int]:
        return [next(i for i, x in enumerate(v) if x) for v in self.basis]

    def solve(self, v: Sequence[int]) -> tuple[int, ...] | None:
        """Coordinates of ``v`` in the basis, or None when ``v`` is not in the subgroup."""
        rest = list(v)
        coeffs = []
        for b, r in zip(self.basis, self.pivots()):
            if rest[r] % b[r]:
                return None
            q = rest[r] // b[r]
            coeffs.append(q)
            if q:
                rest = [x - q * y for x, y in zip(rest, b)]
        if any(rest):
            return None
        return tuple(coeffs)

    def contains(self, v: Sequence[int]) -> bool:
        return self.solve(v) is not None

    def contains_subgroup(self, other: "Subgroup") -> bool:
        return all(self.contains(v) for v in other.basis)

    def index_in_full(self) -> int:
        """Index in Z^n (0 when infinite)."""
        if self.rank < self.ambient_rank:
            return 0
        out = 1
        for b, r in zip(self.basis, self.pivots()):
            out *= b[r]
        return out


def full_lattice(n: int) -> Subgroup:
    return Subgroup.span(n, [tuple(int(i == j) for i in range(n)) for j in range(n)])


def trivial_subgroup(n: int) -> Subgroup:
    return Subgroup(n, ())


def kernel(A) -> Subgroup:
    """Saturated kernel ``{x : A x = 0}``."""
    A = as_matrix(A)
    cols = [list(c) for c in A.columns()]
    pivots, T = _column_echelon(cols, A.rows, track=True)
    return Subgroup.span(A.cols, [tuple(T[c]) for c in range(len(pivots), A.cols)])


def image(A) -> Subgroup:
    A = as_matrix(A)
    return Subgroup.span(A.rows, A.columns())


def preimage(A, S: Subgroup) -> Subgroup:
    """``{x : A x in S}``."""
    A = as_matrix(A)
    if S.ambient_rank != A.rows:
        raise ContractViolation(
            f"subgroup lives in Z^{S.ambient_rank}, map lands in Z^{A.rows}"
        )
    n = A.cols
    cols = [list(c) for c in A.columns()] + [[-x for x in b] for b in S.basis]
    total = len(cols)
    pivots, T = _column_echelon(cols, A.rows, track=True)
    return Subgroup.span(n, [tuple(T[c][:n]) for c in range(len(pivots), total)])


def subgroup_sum(S: Subgroup, T: Subgroup) -> Subgroup:
    if S.ambient_rank != T.ambient_rank:
        raise ContractViolation("ambient rank mismatch")
    return Subgroup.span(S.ambient_rank, S.basis + T.basis)


def intersection(S: Subgroup, T: Subgroup) -> Subgroup:
    if S.ambient_rank != T.ambient_rank:
        raise ContractViolation("ambient rank mismatch")
    if not S.basis:
        return S
    B = S.matrix
    P = preimage(B, T)
    return Subgroup.span(S.ambient_rank, [B.apply(v) for v in P.basis])


# ---------------------------------------------------------------------------
# abelian groups


@dataclass(frozen=True)
class FgAbGroup:
    """Isomorphism type Z^free_rank + Z/t_1 + ... with t_k | t_{k+1}, t_k > 1."""

    free_rank: int = 0
    torsion: tuple[int, ...] = ()

    def __post_init__(self):
        t = tuple(int(x) for x in self.torsion)
        if any(x <= 1 for x in t):
            raise ContractViolation(f"torsion coefficients must exceed 1: {t}")
        if any(t[k + 1] % t[k] for k in range(len(t) - 1)):
            raise ContractViolation(f"torsion {t} is not a divisibility chain")
        object.__setattr__(self, "torsion", t)

    @classmethod
    def from_orders(cls, orders: Iterable[int]) -> "FgAbGroup":
        """Normalize arbitrary cyclic orders (0 = infinite) to invariant factors."""
        orders = [abs(int(x)) for x in orders]
        free = sum(1 for x in orders if x == 0)
        finite = [x for x in orders if x > 1]
        if not finite:
            return cls(free, ())
        snf = smith_normal_form([[x if i == j else 0 for j in range(len(finite))]
                                 for i, x in enumerate(finite)])
        return cls(free, tuple(x for x in snf.d if x > 1))

    def is_trivial(self) -> bool:
        return self.free_rank == 0 and not self.torsion

    def order(self) -> int:
        """Group order; 0 if infinite."""
        if self.free_rank:
            return 0
        out = 1
        for t in self.torsion:
            out *= t
        return out

    def __str__(self):
        parts = ["Z"] * (self.free_rank > 0)
        if self.free_rank > 1:
            parts = [f"Z^{self.free_rank}"]
        parts += [f"Z/{t}" for t in self.torsion]
        return " + ".join(parts) if parts else "0"

    def to_json(self) -> dict:
        return {"free_rank": self.free_rank, "torsion": list(self.torsion)}


@dataclass(frozen=True)
class Quotient:
    """A presented quotient ``S / T`` of subgroups of Z^n.

    ``generators[j]`` is an ambient vector whose class generates a cyclic
    summand of order ``orders[j]`` (0 for infinite).  Torsion summands come
    first, in divisibility order.
    """

    numerator: Subgroup
    denominator: Subgroup
    generators: tuple[tuple[int, ...], ...]
    orders: tuple[int, ...]
    _keep: tuple[int, ...] = field(repr=False, compare=False)
    _U: IntMatrix = field(repr=False, compare=False)

    @property
    def group(self) -> FgAbGroup:
        return FgAbGroup(sum(1 for o in self.orders if o == 0),
                         tuple(o for o in self.orders if o))

    @property
    def ngens(self) -> int:
        return len(self.orders)

    def coords(self, v: Sequence[int]) -> tuple[int, ...]:
        """Coordinates of the class of ``v`` (which must lie in the numerator)."""
        c = self.numerator.solve(v)
        if c is None:
            raise ContractViolation("element does not lie in the numerator subgroup")
        y = self._U.apply(c) if c else ()
        out = []
        for j, o in zip(self._keep, self.orders):
            out.append(y[j] % o if o else y[j])
        return tuple(out)

    def lift(self, coords: Sequence[int]) -> tuple[int, ...]:
        n = self.numerator.ambient_rank
        out = [0] * n
        for a, g in zip(coords, self.generators):
            if a:
                for i in range(n):
                    out[i] += a * g[i]
        return tuple(out)

    def reduce(self, coords: Sequence[int]) -> tuple[int, ...]:
        return tuple(a % o if o else a for a, o in zip(coords, self.orders))

    def relations(self) -> Subgroup:
        """Relation lattice of the presentation Z^g -> this group."""
        g = self.ngens
        return Subgroup.span(g, [tuple(o if i == j else 0 for i in range(g))
                                 for j, o in enumerate(self.orders) if o])


def quotient(S: Subgroup, T: Subgroup) -> Quotient:
    """Invariant-factor presentation of ``S / T`` (requires ``T <= S``)."""
    if S.ambient_rank != T.ambient_rank:
        raise ContractViolation("ambient rank mismatch")
    k = S.rank
    X = []
    for v in T.basis:
        c = S.solve(v)
        if c is None:
            raise ContractViolation("denominator is not contained in numerator")
        X.append(c)
    if k == 0:
        return Quotient(S, T, (), (), (), IntMatrix.zeros(0, 0))
    Xm = IntMatrix.from_columns(X, k) if X else IntMatrix.zeros(k, 0)
    snf = smith_normal_form(Xm)
    diag = list(snf.d) + [0] * (k - len(snf.d))
    keep = tuple(j for j in range(k) if diag[j] != 1)
    Uinv = snf.U_inv
    B = S.matrix
    gens = []
    for j in keep:
        col = tuple(Uinv[i, j] for i in range(k))
        gens.append(B.apply(col))
    return Quotient(S, T, tuple(gens), tuple(diag[j] for j in keep), keep, snf.U)


def induced_map(A, source: Quotient, target: Quotient) -> IntMatrix:
    """Matrix of the map on presentations induced by the ambient map ``A``."""
    A = as_matrix(A)
    cols = [target.coords(A.apply(g)) for g in source.generators]
    for g, o in zip(source.generators, source.orders):
        if o and any(target.coords(A.apply(tuple(o * x for x in g)))):
            raise ContractViolation("map does not send relations to relations")
    return IntMatrix.from_columns(cols, target.ngens) if cols else IntMatrix.zeros(target.ngens, 0)


def _presentation_lattices(f: IntMatrix, src_orders, dst_orders):
    g = len(src_orders)
    h = len(dst_orders)
    Rg = Subgroup.span(g, [tuple(o if i == j else 0 for i in range(g))
                           for j, o in enumerate(src_orders) if o])
    Rh = Subgroup.span(h, [tuple(o if i == j else 0 for i in range(h))
                           for j, o in enumerate(dst_orders) if o])
    return Rg, Rh


def is_isomorphism(f, src_orders: Sequence[int], dst_orders: Sequence[int]) -> bool:
    """Whether ``f`` induces an isomorphism Z^g/R_src -> Z^h/R_dst."""
    f = as_matrix(f) if len(dst_orders) else IntMatrix.zeros(0, len(src_orders))
    Rg, Rh = _presentation_lattices(f, src_orders, dst_orders)
    if len(dst_orders) == 0:
        return Rg == full_lattice(len(src_orders))
    if len(src_orders) == 0:
        return Rh == full_lattice(len(dst_orders))
    if preimage(f, Rh) != Rg:
        return False
    return subgroup_sum(image(f), Rh) == full_lattice(len(dst_orders))


def subquotient_homology(f_in, f_out, orders_prev, orders_mid, orders_next) -> Quotient:
    """Homology at the middle of ``A --f_in--> G --f_out--> H`` for presented groups.

    The result is a quotient of sublattices of Z^g, g = len(orders_mid).
    """
    g = len(orders_mid)
    Rg = Subgroup.span(g, [tuple(o if i == j else 0 for i in range(g))
                           for j, o in enumerate(orders_mid) if o])
    if f_out is None or len(orders_next) == 0:
        Z = full_lattice(g)
    else:
        h = len(orders_next)
        Rh = Subgroup.span(h, [tuple(o if i == j else 0 for i in range(h))
                               for j, o in enumerate(orders_next) if o])
        Z = preimage(as_matrix(f_out), Rh)
    if f_in is None or len(orders_prev) == 0:
        Bd = Rg
    else:
        Bd = subgroup_sum(image(as_matrix(f_in)), Rg)
    return quotient(Z, Bd)

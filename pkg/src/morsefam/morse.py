"""Morse data, continuation maps and homology with local coefficients.

Everything here is combinatorial: critical points with indices and signed
flow-line counts.  Geometry only enters through :mod:`morsefam.flowcount`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .complexes import (
    ChainMap,
    CheckResult,
    FilteredHomotopy,
    GradedComplex,
    HomologyGroup,
    InvalidComplex,
    homology,
    verify_homotopy,
)
from .exact_algebra import (
    ContractViolation,
    FgAbGroup,
    IntMatrix,
    is_isomorphism,
    kernel,
    quotient,
    smith_normal_form,
    subquotient_homology,
    image,
)

__all__ = [
    "DEFAULT_ORIENTATION",
    "CriticalPoint",
    "MorseData",
    "ContinuationData",
    "LocalSystem",
    "Transport",
    "morse_complex",
    "morse_homology",
    "verify_continuation",
    "search_homotopy",
    "homology_local_coeffs",
    "circle_monodromy",
    "circle_base",
    "sphere_base",
    "point_base",
]

# descending-manifold orientations of the base first, fiber data second
DEFAULT_ORIENTATION = "base-first/std"


@dataclass(frozen=True)
class CriticalPoint:
    label: str
    index: int


@dataclass(frozen=True)
class MorseData:
    """Critical points plus signed flow counts ``(from, to, count)``.

    Several records between the same pair are allowed (one per flow line or
    per bundle of flow lines); the Morse differential uses their sum.
    """

    critical_points: tuple[CriticalPoint, ...]
    flows: tuple[tuple[str, str, int], ...] = ()
    orientation: str = DEFAULT_ORIENTATION

    def __post_init__(self):
        cps = tuple(c if isinstance(c, CriticalPoint) else CriticalPoint(str(c[0]), int(c[1]))
                    for c in self.critical_points)
        object.__setattr__(self, "critical_points", cps)
        object.__setattr__(self, "flows", tuple((str(a), str(b), int(c)) for a, b, c in self.flows))
        labels = [c.label for c in cps]
        if len(set(labels)) != len(labels):
            raise ContractViolation(f"duplicate critical point labels in {labels}")
        idx = self.indices
        for a, b, c in self.flows:
            if a not in idx or b not in idx:
                raise ContractViolation(f"flow {a}->{b} names an unknown critical point")
            if idx[a] - idx[b] != 1:
                raise ContractViolation(
                    f"flow {a}->{b} joins indices {idx[a]} and {idx[b]}; only index drops of 1 count")

    @classmethod
    def build(cls, points: Sequence[tuple[str, int]], flows=(), orientation=DEFAULT_ORIENTATION):
        return cls(tuple(CriticalPoint(str(a), int(b)) for a, b in points), tuple(flows), orientation)

    @property
    def indices(self) -> dict[str, int]:
        return {c.label: c.index for c in self.critical_points}

    @property
    def labels(self) -> list[str]:
        return [c.label for c in self.critical_points]

    @property
    def dimension(self) -> int:
        return max((c.index for c in self.critical_points), default=0)

    def points_of_index(self, i: int) -> list[str]:
        return [c.label for c in self.critical_points if c.index == i]

    def net_counts(self) -> dict[tuple[str, str], int]:
        out: dict[tuple[str, str], int] = {}
        for a, b, c in self.flows:
            out[(a, b)] = out.get((a, b), 0) + c
        return {k: v for k, v in out.items() if v}

    def aggregated(self) -> "MorseData":
        """Same data with one record per pair (zero counts dropped)."""
        flows = tuple((a, b, c) for (a, b), c in sorted(self.net_counts().items(),
                                                          key=lambda kv: self._order(kv[0])))
        return MorseData(self.critical_points, flows, self.orientation)

    def _order(self, pair):
        pos = {lab: k for k, lab in enumerate(self.labels)}
        return pos[pair[0]], pos[pair[1]]

    def flip_orientation(self, label: str) -> "MorseData":
        """Reverse the descending-manifold orientation at one critical point."""
        if label not in self.indices:
            raise ContractViolation(f"unknown critical point {label}")
        flows = tuple((a, b, -c if label in (a, b) else c) for a, b, c in self.flows)
        return MorseData(self.critical_points, flows, f"{self.orientation}|flip:{label}")

    def negated(self, dim: int | None = None, orientation: str | None = None) -> "MorseData":
        """Data of ``-f``: index ``i -> n - i`` and reversed flows (same counts)."""
        n = self.dimension if dim is None else dim
        cps = tuple(CriticalPoint(c.label, n - c.index) for c in self.critical_points)
        flows = tuple((b, a, c) for a, b, c in self.flows)
        return MorseData(cps, flows, orientation or f"-({self.orientation})")

    def differential(self, i: int) -> IntMatrix:
        src, dst = self.points_of_index(i), self.points_of_index(i - 1)
        net = self.net_counts()
        return IntMatrix.from_rows([[net.get((a, b), 0) for a in src] for b in dst], cols=len(src))

    def full_matrix_index(self) -> dict[str, int]:
        return {lab: k for k, lab in enumerate(self.labels)}

    def to_json(self) -> dict:
        return {
            "critical_points": [{"label": c.label, "index": c.index} for c in self.critical_points],
            "flows": [{"from": a, "to": b, "count": c} for a, b, c in self.flows],
            "orientation": self.orientation,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "MorseData":
        return cls(tuple(CriticalPoint(str(c["label"]), int(c["index"]))
                         for c in data["critical_points"]),
                   tuple((f["from"], f["to"], int(f["count"])) for f in data.get("flows", ())),
                   data.get("orientation", DEFAULT_ORIENTATION))


def morse_complex(M: MorseData) -> GradedComplex:
    """The Morse complex, basis labelled by critical point labels."""
    top = M.dimension
    basis = {i: M.points_of_index(i) for i in range(0, top + 1)}
    diffs = {i: M.differential(i) for i in range(1, top + 1)}
    try:
        return GradedComplex(basis, diffs)
    except InvalidComplex as exc:
        raise InvalidComplex(f"Morse data violates d^2 = 0: {exc}") from None


def morse_homology(M: MorseData) -> dict[int, HomologyGroup]:
    return homology(morse_complex(M))


# ---------------------------------------------------------------------------
# continuation


def _split_by_degree(phi: IntMatrix, src: MorseData, dst: MorseData, shift: int = 0):
    si, di = src.full_matrix_index(), dst.full_matrix_index()
    out = {}
    for i in range(0, max(src.dimension, dst.dimension) + 1):
        a, b = src.points_of_index(i), dst.points_of_index(i + shift)
        if a and b:
            out[i] = IntMatrix.from_rows([[phi[di[y], si[x]] for x in a] for y in b], cols=len(a))
    return out


@dataclass
class ContinuationData:
    """A degree-0 map ``C(source) -> C(target)`` given on all critical points.

    ``phi`` has rows indexed by ``target.labels`` and columns by
    ``source.labels``; entries between different indices must vanish.
    """

    source: MorseData
    target: MorseData
    phi: IntMatrix

    def __post_init__(self):
        if not isinstance(self.phi, IntMatrix):
            self.phi = IntMatrix.from_rows(self.phi, cols=len(self.source.labels))
        if self.phi.shape != (len(self.target.labels), len(self.source.labels)):
            raise ContractViolation("continuation matrix has the wrong shape")
        si, ti = self.source.indices, self.target.indices
        for r, y in enumerate(self.target.labels):
            for c, x in enumerate(self.source.labels):
                if self.phi[r, c] and si[x] != ti[y]:
                    raise ContractViolation(f"continuation entry {x}->{y} changes the index")

    @classmethod
    def identity(cls, M: MorseData) -> "ContinuationData":
        return cls(M, M, IntMatrix.identity(len(M.labels)))

    def chain_map(self) -> ChainMap:
        return ChainMap(morse_complex(self.source), morse_complex(self.target),
                        _split_by_degree(self.phi, self.source, self.target))

    def then(self, other: "ContinuationData") -> "ContinuationData":
        """Concatenation: first ``self``, then ``other``."""
        return ContinuationData(self.source, other.target, other.phi @ self.phi)


def verify_continuation(phi: ContinuationData, other: ContinuationData | None = None,
                        K: IntMatrix | None = None) -> CheckResult:
    """Exact chain-map check; with ``other`` and ``K`` also ``dK + Kd = phi - other``."""
    cm = phi.chain_map()
    res = cm.residual()
    if res:
        return CheckResult(False, "continuation is not a chain map", {"residual": res})
    if other is None:
        return CheckResult(True, "continuation is a chain map")
    cm2 = other.chain_map()
    if cm2.residual():
        return CheckResult(False, "second continuation is not a chain map")
    if K is None:
        return CheckResult(True, "both continuations are chain maps")
    Kd = _split_by_degree(K if isinstance(K, IntMatrix)
                          else IntMatrix.from_rows(K, cols=len(phi.source.labels)),
                          phi.source, phi.target, shift=1)
    H = FilteredHomotopy(cm.source, cm.target, Kd)
    return verify_homotopy(H, cm, cm2)


def search_homotopy(phi0: ContinuationData, phi1: ContinuationData, bound: int = 1):
    """Brute-force a chain homotopy with entries in ``[-bound, bound]``.

    Only usable for tiny complexes; returns the full matrix or ``None``.
    """
    src, dst = phi0.source, phi0.target
    si, ti = src.indices, dst.indices
    slots = [(r, c) for r, y in enumerate(dst.labels) for c, x in enumerate(src.labels)
             if ti[y] == si[x] + 1]
    values = range(-bound, bound + 1)
    for choice in itertools.product(values, repeat=len(slots)):
        rows = [[0] * len(src.labels) for _ in dst.labels]
        for (r, c), v in zip(slots, choice):
            rows[r][c] = v
        K = IntMatrix.from_rows(rows, cols=len(src.labels))
        if verify_continuation(phi0, phi1, K):
            return K
    return None


# ---------------------------------------------------------------------------
# local coefficients


@dataclass(frozen=True)
class Transport:
    """Parallel transport along one base flow line ``source -> target``.

    ``matrices[j]`` maps the degree-j stalk presentation at ``source`` to the
    one at ``target``.  ``sign`` is the flow line's orientation sign.
    """

    source: str
    target: str
    sign: int
    matrices: Mapping[int, IntMatrix]


@dataclass
class LocalSystem:
    """Stalks over base critical points glued by transports along flow lines.

    ``stalks[x][j]`` lists the cyclic orders (0 = Z) of a presentation of
    the degree-j stalk at ``x``.  With ``aggregated=True`` each transport is
    the signed sum over all flow lines of a pair, so invertibility is not
    required (this is what a family complex's first differential provides).
    """

    base: MorseData
    stalks: Mapping[str, Mapping[int, Sequence[int]]]
    transports: Sequence[Transport]
    aggregated: bool = False
    loops: Sequence = field(default_factory=tuple)

    def __post_init__(self):
        idx = self.base.indices
        for t in self.transports:
            if idx[t.source] - idx[t.target] != 1:
                raise ContractViolation(f"transport {t.source}->{t.target} is not along a flow line")
            if not self.aggregated:
                for j in self.degrees():
                    m = self.matrix(t, j)
                    if not is_isomorphism(m, self.orders(t.source, j), self.orders(t.target, j)):
                        raise ContractViolation(
                            f"transport {t.source}->{t.target} is not invertible in degree {j}")
        if not self.aggregated:
            net = self.base.net_counts()
            signs: dict = {}
            for t in self.transports:
                signs[(t.source, t.target)] = signs.get((t.source, t.target), 0) + t.sign
            for pair in set(net) | set(signs):
                if net.get(pair, 0) != signs.get(pair, 0):
                    raise ContractViolation(
                        f"transport signs on {pair} disagree with the base flow count")

    def degrees(self) -> list[int]:
        return sorted({j for s in self.stalks.values() for j in s})

    def orders(self, x: str, j: int) -> tuple[int, ...]:
        return tuple(self.stalks.get(x, {}).get(j, ()))

    def matrix(self, t: Transport, j: int) -> IntMatrix:
        m = t.matrices.get(j)
        rows, cols = len(self.orders(t.target, j)), len(self.orders(t.source, j))
        if m is None:
            return IntMatrix.zeros(rows, cols)
        m = m if isinstance(m, IntMatrix) else IntMatrix.from_rows(m, cols=cols)
        if m.shape != (rows, cols):
            raise ContractViolation(f"transport {t.source}->{t.target} degree {j} has shape {m.shape}")
        return m

    def chain_orders(self, i: int, j: int) -> tuple[int, ...]:
        return tuple(o for x in self.base.points_of_index(i) for o in self.orders(x, j))

    def boundary(self, i: int, j: int) -> IntMatrix:
        """Twisted base differential ``C_i(B; F_j) -> C_{i-1}(B; F_j)``."""
        src, dst = self.base.points_of_index(i), self.base.points_of_index(i - 1)
        col_off, row_off = {}, {}
        k = 0
        for x in src:
            col_off[x] = k
            k += len(self.orders(x, j))
        ncols = k
        k = 0
        for y in dst:
            row_off[y] = k
            k += len(self.orders(y, j))
        rows = [[0] * ncols for _ in range(k)]
        for t in self.transports:
            if t.source in col_off and t.target in row_off:
                m = self.matrix(t, j)
                for a in range(m.rows):
                    for b in range(m.cols):
                        if m[a, b]:
                            rows[row_off[t.target] + a][col_off[t.source] + b] += t.sign * m[a, b]
        return IntMatrix.from_rows(rows, cols=ncols)


def homology_local_coeffs(L: LocalSystem) -> dict[tuple[int, int], FgAbGroup]:
    """``H_i(B; F_j)`` from the twisted base Morse complex, for all (i, j)."""
    out = {}
    top = L.base.dimension
    for j in L.degrees():
        for i in range(0, top + 1):
            mid = L.chain_orders(i, j)
            if not mid:
                continue
            prev = L.chain_orders(i + 1, j)
            nxt = L.chain_orders(i - 1, j)
            h = subquotient_homology(L.boundary(i + 1, j) if prev else None,
                                     L.boundary(i, j) if nxt else None,
                                     prev, mid, nxt)
            if not h.group.is_trivial():
                out[(i, j)] = h.group
    return out


def circle_base(orientation: str = DEFAULT_ORIENTATION) -> MorseData:
    """Height function on S^1: maximum ``x1``, minimum ``x0``, two flow lines."""
    return MorseData.build([("x1", 1), ("x0", 0)], [("x1", "x0", 1), ("x1", "x0", -1)],
                           orientation)


def sphere_base(k: int, orientation: str = DEFAULT_ORIENTATION) -> MorseData:
    """Height function on S^k with two critical points ``x<k>`` and ``x0``."""
    if k < 1:
        raise ValueError("sphere dimension must be positive")
    if k == 1:
        return circle_base(orientation)
    return MorseData.build([(f"x{k}", k), ("x0", 0)], [], orientation)


def point_base() -> MorseData:
    return MorseData.build([("x0", 0)])


def circle_monodromy(phi) -> tuple[FgAbGroup, FgAbGroup]:
    """``(coker(1 - phi), ker(1 - phi))`` for an invertible integer matrix."""
    phi = phi if isinstance(phi, IntMatrix) else IntMatrix.from_rows(phi)
    n = phi.rows
    if phi.cols != n:
        raise ContractViolation("monodromy must be square")
    d = smith_normal_form(phi).d
    det_abs = 1
    for x in d:
        det_abs *= x
    if det_abs != 1:
        raise ContractViolation("monodromy is not invertible over Z")
    A = IntMatrix.identity(n) - phi
    coker = FgAbGroup.from_orders(list(smith_normal_form(A).d) + [0] * (n - len(smith_normal_form(A).d)))
    ker = FgAbGroup(kernel(A).rank)
    return coker, ker


def circle_local_system(phi, base: MorseData | None = None, degree: int = 0) -> LocalSystem:
    """Free stalk Z^n on S^1 with monodromy ``phi`` on the flow line of sign -1."""
    phi = phi if isinstance(phi, IntMatrix) else IntMatrix.from_rows(phi)
    n = phi.rows
    base = base or circle_base()
    stalks = {"x1": {degree: (0,) * n}, "x0": {degree: (0,) * n}}
    transports = [Transport("x1", "x0", 1, {degree: IntMatrix.identity(n)}),
                  Transport("x1", "x0", -1, {degree: phi})]
    return LocalSystem(base, stalks, transports)


def homology_of_presented_map(f: IntMatrix, src_orders, dst_orders):
    """(kernel, cokernel) groups of a map between presented groups."""
    ker = subquotient_homology(None, f, (), src_orders, dst_orders)
    g = len(dst_orders)
    from .exact_algebra import Subgroup, full_lattice, subgroup_sum
    rel = Subgroup.span(g, [tuple(o if i == j else 0 for i in range(g))
                            for j, o in enumerate(dst_orders) if o])
    coker = quotient(full_lattice(g), subgroup_sum(image(f), rel))
    return ker.group, coker.group

"""Family complexes built from Morse data on the base.

Generators are pairs ``(x, p)`` with ``x`` a critical point of the base
function and ``p`` a critical point of the fiber function over ``x``.  The
differential is a sum of blocks ``delta_k`` lowering the base index by ``k``
and raising the fiber index by ``k - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .complexes import (
    ChainMap,
    CheckResult,
    FilteredComplex,
    InvalidComplex,
    dual_complex,
    homology_groups,
)
from .exact_algebra import (
    ContractViolation,
    FgAbGroup,
    IntMatrix,
    Quotient,
    image,
    induced_map,
    is_isomorphism,
    kernel,
    quotient,
)
from .morse import LocalSystem, MorseData, Transport, homology_local_coeffs, morse_complex
from .spectral import SpectralSequence, filtered_homology, induced_morphism, same_pages

__all__ = [
    "Block",
    "FamilyDescriptor",
    "FamilyHomology",
    "DualityRefused",
    "assemble",
    "family_homology",
    "family_pages",
    "local_system",
    "e2_crosscheck",
    "dualize",
    "poincare_check",
    "ContinuationBlocks",
    "identity_continuation",
    "continuation",
    "sphere_higher_differential",
    "fiber_homology",
]


class DualityRefused(ContractViolation):
    """Duality needs oriented fibers and a closed oriented base."""


@dataclass(frozen=True)
class Block:
    """``delta_k[from_x -> to_y]`` as a matrix on all fiber critical points.

    Rows follow the fiber labels over ``to_y`` and columns those over
    ``from_x``.  Only entries from fiber index ``j`` to ``j + k - 1`` may
    be nonzero.
    """

    k: int
    from_x: str
    to_y: str
    matrix: IntMatrix


@dataclass
class FamilyDescriptor:
    base: MorseData
    dim_base: int
    fiber_dim: int
    fibers: dict[str, MorseData]
    blocks: list[Block] = field(default_factory=list)
    oriented_fibers: bool = True
    name: str = ""

    def __post_init__(self):
        blocks = []
        for b in self.blocks:
            if not isinstance(b, Block):
                b = Block(int(b["k"]), str(b["from_x"]), str(b["to_y"]), b["matrix"])
            if not isinstance(b.matrix, IntMatrix):
                cols = len(self.fibers[b.from_x].labels)
                b = Block(b.k, b.from_x, b.to_y, IntMatrix.from_rows(b.matrix, cols=cols))
            blocks.append(b)
        self.blocks = blocks
        self._validate()

    def _validate(self):
        bidx = self.base.indices
        missing = [x for x in bidx if x not in self.fibers]
        if missing:
            raise ContractViolation(f"no fiber data over base points {missing}")
        if self.base.dimension > self.dim_base:
            raise ContractViolation("base critical point index exceeds dim_base")
        for x, F in self.fibers.items():
            if x not in bidx:
                raise ContractViolation(f"fiber data over unknown base point {x}")
            if F.dimension > self.fiber_dim:
                raise ContractViolation(f"fiber over {x} has index above fiber_dim")
        seen = set()
        flow_pairs = {(a, b) for a, b, _ in self.base.flows}
        for b in self.blocks:
            key = (b.k, b.from_x, b.to_y)
            if key in seen:
                raise ContractViolation(f"duplicate block {key}")
            seen.add(key)
            if b.from_x not in bidx or b.to_y not in bidx:
                raise ContractViolation(f"block {key} names an unknown base point")
            if bidx[b.from_x] - bidx[b.to_y] != b.k or b.k < 0:
                raise ContractViolation(f"block {key}: base index drop is not k")
            if b.k == 0 and b.from_x != b.to_y:
                raise ContractViolation(f"block {key}: delta_0 must stay over one base point")
            if b.k == 1 and (b.from_x, b.to_y) not in flow_pairs and not b.matrix.is_zero():
                raise ContractViolation(f"block {key}: delta_1 off the base flow lines")
            src, dst = self.fibers[b.from_x], self.fibers[b.to_y]
            if b.matrix.shape != (len(dst.labels), len(src.labels)):
                raise ContractViolation(f"block {key} has shape {b.matrix.shape}")
            si, di = src.indices, dst.indices
            for r, q in enumerate(dst.labels):
                for c, p in enumerate(src.labels):
                    if b.matrix[r, c] and di[q] != si[p] + b.k - 1:
                        raise ContractViolation(
                            f"block {key}: entry {p}->{q} violates the bidegree rule")
            if b.k == 0:
                expected = self._delta0(b.from_x)
                if b.matrix != expected and b.matrix != -expected:
                    raise ContractViolation(
                        f"block {key} is not plus or minus the fiber differential")

    def _delta0(self, x: str) -> IntMatrix:
        F = self.fibers[x]
        pos = F.full_matrix_index()
        rows = [[0] * len(F.labels) for _ in F.labels]
        sign = -1 if self.base.indices[x] % 2 else 1
        for (a, b), c in F.net_counts().items():
            rows[pos[b]][pos[a]] += sign * c
        return IntMatrix.from_rows(rows, cols=len(F.labels))

    def block_map(self) -> dict[tuple[str, str], IntMatrix]:
        """All blocks, with default ``delta_0`` filled in, keyed by base pair."""
        out = {(b.from_x, b.to_y): b.matrix for b in self.blocks}
        for x in self.base.labels:
            out.setdefault((x, x), self._delta0(x))
        return out

    def generators(self) -> list[tuple[str, str]]:
        return [(x, p) for x in self.base.labels for p in self.fibers[x].labels]

    def bidegree(self, gen: tuple[str, str]) -> tuple[int, int]:
        x, p = gen
        return self.base.indices[x], self.fibers[x].indices[p]

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "base": self.base.to_json(),
            "dim_base": self.dim_base,
            "fiber_dim": self.fiber_dim,
            "fibers": {x: self.fibers[x].to_json() for x in self.base.labels},
            "blocks": [{"k": b.k, "from_x": b.from_x, "to_y": b.to_y,
                        "matrix": b.matrix.to_rows()} for b in self.blocks],
            "oriented_fibers": self.oriented_fibers,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "FamilyDescriptor":
        fibers = {str(x): MorseData.from_json(v) for x, v in data["fibers"].items()}
        blocks = [Block(int(b["k"]), str(b["from_x"]), str(b["to_y"]),
                        IntMatrix.from_rows(b["matrix"], cols=len(fibers[str(b["from_x"])].labels)))
                  for b in data.get("blocks", ())]
        return cls(MorseData.from_json(data["base"]), int(data["dim_base"]),
                   int(data["fiber_dim"]), fibers, blocks,
                   bool(data.get("oriented_fibers", True)), str(data.get("name", "")))


def assemble(D: FamilyDescriptor) -> FilteredComplex:
    """The filtered complex with generators ``(x, p)`` at level ``index(x)``."""
    gens = D.generators()
    by_degree: dict[int, list] = {}
    for g in gens:
        by_degree.setdefault(sum(D.bidegree(g)), []).append(g)
    top = D.dim_base + D.fiber_dim
    basis = {m: by_degree.get(m, []) for m in range(0, top + 1)}
    pos = {m: {g: k for k, g in enumerate(b)} for m, b in basis.items()}
    rows = {m: [[0] * len(basis[m]) for _ in basis.get(m - 1, [])] for m in range(1, top + 1)}
    for (x, y), M in D.block_map().items():
        src, dst = D.fibers[x], D.fibers[y]
        for r, q in enumerate(dst.labels):
            for c, p in enumerate(src.labels):
                v = M[r, c]
                if v:
                    m = sum(D.bidegree((x, p)))
                    rows[m][pos[m - 1][(y, q)]][pos[m][(x, p)]] += v
    diffs = {m: IntMatrix.from_rows(rows[m], cols=len(basis[m])) for m in rows}
    levels = {m: [D.base.indices[x] for x, _ in basis[m]] for m in basis}
    try:
        return FilteredComplex(basis, diffs, levels)
    except InvalidComplex as exc:
        raise InvalidComplex(f"descriptor {D.name or '<unnamed>'}: delta^2 != 0: {exc}") from None


@dataclass
class FamilyHomology:
    groups: dict[int, FgAbGroup]
    filtration: dict[int, list[tuple[int, FgAbGroup]]]

    def ranks(self) -> dict[int, int]:
        return {m: g.free_rank for m, g in self.groups.items()}

    def as_tuple(self, top: int) -> tuple[FgAbGroup, ...]:
        return tuple(self.groups.get(m, FgAbGroup()) for m in range(top + 1))

    def to_json(self) -> dict:
        return {
            "groups": [{"degree": m, **g.to_json()} for m, g in sorted(self.groups.items())],
            "filtration": [{"degree": m, "steps": [{"level": p, **g.to_json()} for p, g in st]}
                           for m, st in sorted(self.filtration.items())],
        }


def family_homology(C: FilteredComplex) -> FamilyHomology:
    return FamilyHomology(homology_groups(C), filtered_homology(C))


def family_pages(C: FilteredComplex | FamilyDescriptor) -> SpectralSequence:
    if isinstance(C, FamilyDescriptor):
        C = assemble(C)
    return SpectralSequence(C)


# ---------------------------------------------------------------------------
# local system read off from delta_1


def fiber_homology(F: MorseData) -> dict[int, Quotient]:
    """Presented Morse homology ``H_j`` of one fiber, as quotients of ``C_j``."""
    C = morse_complex(F)
    out = {}
    for j in C.degrees():
        Z = kernel(C.d(j))
        B = image(C.d(j + 1)) if C.rank(j + 1) else None
        out[j] = quotient(Z, B if B is not None else type(Z)(Z.ambient_rank, ()))
    return out


def _degree_block(M: IntMatrix, src: MorseData, dst: MorseData, j: int, shift: int) -> IntMatrix:
    si, di = src.full_matrix_index(), dst.full_matrix_index()
    a, b = src.points_of_index(j), dst.points_of_index(j + shift)
    return IntMatrix.from_rows([[M[di[q], si[p]] for p in a] for q in b], cols=len(a))


def local_system(D: FamilyDescriptor) -> LocalSystem:
    """Stalks = fiber homology, transports = maps induced by ``delta_1``."""
    H = {x: fiber_homology(D.fibers[x]) for x in D.base.labels}
    stalks = {x: {j: q.orders for j, q in H[x].items()} for x in H}
    for x in stalks:
        for j in range(0, D.fiber_dim + 1):
            stalks[x].setdefault(j, ())
    transports = []
    for b in D.blocks:
        if b.k != 1:
            continue
        mats = {}
        for j in range(0, D.fiber_dim + 1):
            qs, qt = H[b.from_x].get(j), H[b.to_y].get(j)
            if qs is None or qt is None or not qs.ngens or not qt.ngens:
                continue
            blk = _degree_block(b.matrix, D.fibers[b.from_x], D.fibers[b.to_y], j, 0)
            mats[j] = induced_map(blk, qs, qt)
        transports.append(Transport(b.from_x, b.to_y, 1, mats))
    return LocalSystem(D.base, stalks, transports, aggregated=True)


def e2_crosscheck(D: FamilyDescriptor) -> CheckResult:
    """E^2 from the spectral engine against twisted base homology."""
    E2 = family_pages(D).page(2).groups()
    L = homology_local_coeffs(local_system(D))
    for key in sorted(set(E2) | set(L)):
        a, b = E2.get(key, FgAbGroup()), L.get(key, FgAbGroup())
        if a != b:
            return CheckResult(False, f"E^2 mismatch at {key}",
                               {"bidegree": key, "pages": a, "local_coefficients": b})
    return CheckResult(True, "E^2 equals homology with local coefficients", {"E2": E2})


# ---------------------------------------------------------------------------
# duality


def _dual_sign(D: FamilyDescriptor, x: str, p: str) -> int:
    # per-generator sign making the dual delta_0 equal (-1)^(m - i) times the
    # differential of -f over x
    return -1 if (D.dim_base * D.fibers[x].indices[p]) % 2 else 1


def dualize(D: FamilyDescriptor) -> FamilyDescriptor:
    """Descriptor of ``(-f^B, -f)``: transposed blocks, indices reflected."""
    if not D.oriented_fibers:
        raise DualityRefused(
            f"{D.name or 'descriptor'}: fibers are not compatibly oriented "
            "(monodromy reverses the fiber orientation), so no duality is defined")
    m, n = D.dim_base, D.fiber_dim
    base = D.base.negated(m)
    fibers = {x: F.negated(n) for x, F in D.fibers.items()}
    blocks = []
    for (x, y), M in D.block_map().items():
        if x == y:
            continue
        k = D.base.indices[x] - D.base.indices[y]
        src, dst = D.fibers[x], D.fibers[y]
        rows = [[_dual_sign(D, y, q) * _dual_sign(D, x, p) * M[r, c]
                 for r, q in enumerate(dst.labels)] for c, p in enumerate(src.labels)]
        blocks.append(Block(k, y, x, IntMatrix.from_rows(rows, cols=len(dst.labels))))
    return FamilyDescriptor(base, m, n, fibers, blocks, True, f"dual({D.name})")


def poincare_check(D: FamilyDescriptor, D_hat: FamilyDescriptor | None = None,
                   r_to: int | None = None) -> CheckResult:
    """``E_k^{i,j}`` of the cohomology spectral sequence against ``E-hat^k_{m-i,n-j}``.

    The left side is computed from the algebraic dual of the assembled
    complex; the right side from the descriptor ``D_hat`` of the negated data
    (built by :func:`dualize` unless supplied independently).
    """
    if not D.oriented_fibers:
        raise DualityRefused(
            f"{D.name or 'descriptor'}: fibers are not compatibly oriented; "
            "Poincare duality is not available")
    if D_hat is None:
        D_hat = dualize(D)
    m, n = D.dim_base, D.fiber_dim
    coh = SpectralSequence(dual_complex(assemble(D)))
    hom = SpectralSequence(assemble(D_hat))
    r_to = r_to or m + 2
    for r in range(2, r_to + 1):
        A, B = coh.page(r), hom.page(r)
        keys = {(-i, -j) for i, j in A.entries} | {(m - i, n - j) for i, j in B.entries}
        for i, j in sorted(keys):
            left = A.group(-i, -j)
            right = B.group(m - i, n - j)
            if left != right:
                return CheckResult(False, f"E_{r}^({i},{j}) != E-hat^{r}_({m - i},{n - j})",
                                   {"r": r, "i": i, "j": j, "cohomology": left, "dual": right})
    return CheckResult(True, f"duality holds for 2 <= r <= {r_to}")


# ---------------------------------------------------------------------------
# continuation between two descriptors


@dataclass
class ContinuationBlocks:
    """Blocks ``Phi_k[x -> y]`` of a degree-0 filtered map between families.

    ``Phi_k`` lowers the base index by ``k`` and raises the fiber index by
    ``k``; matrices act on all fiber critical points as in :class:`Block`.
    """

    source: FamilyDescriptor
    target: FamilyDescriptor
    blocks: list[Block]

    def chain_map(self) -> ChainMap:
        S, T = assemble(self.source), assemble(self.target)
        maps = {m: [[0] * S.rank(m) for _ in range(T.rank(m))] for m in S.degrees()}
        sb, tb = self.source.base.indices, self.target.base.indices
        for b in self.blocks:
            if sb[b.from_x] - tb[b.to_y] != b.k:
                raise ContractViolation(f"continuation block {b.from_x}->{b.to_y}: wrong k")
            src, dst = self.source.fibers[b.from_x], self.target.fibers[b.to_y]
            for r, q in enumerate(dst.labels):
                for c, p in enumerate(src.labels):
                    v = b.matrix[r, c]
                    if not v:
                        continue
                    if dst.indices[q] != src.indices[p] + b.k:
                        raise ContractViolation(
                            f"continuation entry ({b.from_x},{p})->({b.to_y},{q}) changes degree")
                    m = sb[b.from_x] + src.indices[p]
                    maps[m][T.index(m, (b.to_y, q))][S.index(m, (b.from_x, p))] += v
        mats = {m: IntMatrix.from_rows(maps[m], cols=S.rank(m)) for m in maps if T.rank(m)}
        return ChainMap(S, T, mats)


def identity_continuation(D: FamilyDescriptor) -> ContinuationBlocks:
    """The map a constant-in-t family induces."""
    blocks = [Block(0, x, x, IntMatrix.identity(len(D.fibers[x].labels))) for x in D.base.labels]
    return ContinuationBlocks(D, D, blocks)


def continuation(phi: ContinuationBlocks) -> CheckResult:
    """Filtered chain map, iso on homology, iso on every page ``r >= 2``."""
    cm = phi.chain_map()
    v = cm.verify()
    if not v:
        return CheckResult(False, f"not a filtered chain map: {v.message}", v.details)
    S, T = cm.source, cm.target
    for m in S.degrees():
        from .complexes import homology_in_degree
        hs, ht = homology_in_degree(S, m), homology_in_degree(T, m)
        f = induced_map(cm[m], hs.presentation, ht.presentation)
        if not is_isomorphism(f, hs.presentation.orders, ht.presentation.orders):
            return CheckResult(False, f"not an isomorphism on H_{m}", {"degree": m})
    mor = induced_morphism(cm)
    r_top = max(mor.source.length, mor.target.length) + 1
    for r in range(2, r_top + 1):
        if not mor.is_isomorphism(r):
            return CheckResult(False, f"not an isomorphism on E^{r}", {"r": r})
    return CheckResult(True, "filtered chain map inducing isomorphisms on homology and E^r, r >= 2",
                       {"morphism": mor})


# ---------------------------------------------------------------------------
# two-point sphere bases


def sphere_higher_differential(D: FamilyDescriptor) -> CheckResult:
    """Compare ``d_k`` on ``E^k`` with the map ``delta_k`` induces on fiber homology."""
    pts = sorted(D.base.critical_points, key=lambda c: -c.index)
    if len(pts) != 2 or pts[1].index != 0 or pts[0].index < 1:
        raise ContractViolation("base must have exactly two critical points, of index 0 and k")
    top, bot = pts[0].label, pts[1].label
    k = pts[0].index
    C = assemble(D)
    ss = SpectralSequence(C)
    Ek = ss.page(k)
    Ht, Hb = fiber_homology(D.fibers[top]), fiber_homology(D.fibers[bot])
    blk = D.block_map().get((top, bot))
    induced = {}
    for j in range(0, D.fiber_dim + 1):
        src, tgt = Ek.entries.get((k, j)), Ek.entries.get((0, j + k - 1))
        if src is None or tgt is None:
            continue
        qs, qt = Ht[j], Hb[j + k - 1]
        m_src, m_tgt = k + j, k + j - 1
        dk = Ek.d(k, j)
        fib_map = (_degree_block(blk, D.fibers[top], D.fibers[bot], j, k - 1)
                   if blk is not None else IntMatrix.zeros(len(D.fibers[bot].points_of_index(j + k - 1)),
                                                            len(D.fibers[top].points_of_index(j))))
        top_pts = D.fibers[top].points_of_index(j)
        bot_pts = D.fibers[bot].points_of_index(j + k - 1)
        via_pages, via_fiber = [], []
        for c, g in enumerate(src.generators):
            proj = [g[C.index(m_src, (top, p))] for p in top_pts]
            via_fiber.append(qt.coords(fib_map.apply(proj)))
            lifted = tgt.lift([dk[r, c] for r in range(dk.rows)])
            via_pages.append(qt.coords([lifted[C.index(m_tgt, (bot, q))] for q in bot_pts]))
        if via_pages != via_fiber:
            return CheckResult(False, f"d_{k} differs from delta_{k} on H_{j}",
                               {"j": j, "pages": via_pages, "fiber": via_fiber})
        induced[j] = IntMatrix.from_columns(via_fiber, rows=qt.ngens) if via_fiber else None
    return CheckResult(True, f"d_{k} equals the map induced by delta_{k}", {"induced": induced})

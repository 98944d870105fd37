"""Family complexes over a finite cubulation of the base.

Generators are triples ``(sigma, g, p)``: a cube, a metric token and a
critical point of the fiber function over the cube's center.  The filtration
level is ``dim sigma``.  ``delta_1`` combines the face signs of the cube
boundary with continuation maps from the center of a cube to the centers of
its codimension-one faces; higher ``delta_k`` blocks are supplied as data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .complexes import ChainMap, CheckResult, FilteredComplex, InvalidComplex
from .exact_algebra import (
    ContractViolation,
    IntMatrix,
    Subgroup,
    image,
    intersection,
    kernel,
    preimage,
    quotient,
    subgroup_sum,
)
from .family import FamilyDescriptor
from .morse import MorseData
from .spectral import SpectralSequence, induced_morphism, same_pages

__all__ = [
    "Cube",
    "Cubulation",
    "CubicalFamily",
    "CubeMap",
    "assemble_cubical",
    "compare_with_family",
    "pushforward",
    "mayer_vietoris",
    "circle_cubulation",
    "circle_family_cubical",
    "MayerVietorisReport",
]


@dataclass(frozen=True)
class Cube:
    id: str
    dim: int
    faces: tuple[tuple[str, int], ...] = ()
    degenerate: bool = False


@dataclass
class Cubulation:
    cubes: dict[str, Cube]

    def __post_init__(self):
        if not isinstance(self.cubes, dict):
            self.cubes = {c.id: c for c in self.cubes}
        self.validate()

    def validate(self):
        for c in self.cubes.values():
            if c.dim == 0 and c.faces:
                raise ContractViolation(f"vertex {c.id} cannot have faces")
            if c.dim > 0 and len(c.faces) != 2 * c.dim:
                raise ContractViolation(f"{c.dim}-cube {c.id} needs {2 * c.dim} faces")
            for f, s in c.faces:
                if f not in self.cubes:
                    raise ContractViolation(f"face {f} of {c.id} is not in the cubulation")
                if self.cubes[f].dim != c.dim - 1 or s not in (1, -1):
                    raise ContractViolation(f"face {f} of {c.id} has wrong dimension or sign")
            if c.dim > 0 and sum(s for _, s in c.faces):
                raise ContractViolation(f"cubical identities fail on {c.id}: face signs do not pair up")
        # faces of faces: the cube boundary squares to zero
        for c in self.cubes.values():
            acc: dict[str, int] = {}
            for f, s in c.faces:
                for g, t in self.cubes[f].faces:
                    acc[g] = acc.get(g, 0) + s * t
            bad = [g for g, v in acc.items() if v]
            if bad:
                raise ContractViolation(f"cubical identities fail on {c.id} at {bad}")

    @property
    def dim(self) -> int:
        return max((c.dim for c in self.cubes.values()), default=0)

    def ids(self) -> list[str]:
        return sorted(self.cubes, key=lambda i: (-self.cubes[i].dim, i))

    def restrict(self, ids: Iterable[str]) -> "Cubulation":
        ids = set(ids)
        for i in ids:
            for f, _ in self.cubes[i].faces:
                if f not in ids:
                    raise ContractViolation(f"subcubulation is not closed: {f} (face of {i}) missing")
        return Cubulation({i: self.cubes[i] for i in ids})

    def to_json(self) -> list:
        return [{"id": c.id, "dim": c.dim, "faces": [{"id": f, "sign": s} for f, s in c.faces],
                 "degenerate": c.degenerate} for c in (self.cubes[i] for i in self.ids())]


@dataclass
class CubicalFamily:
    """Cubulation plus fiber data at every cube center.

    ``continuations[(sigma, tau)]`` is the fiber chain map from the center of
    ``sigma`` to the center of its face ``tau``.  ``higher[(k, sigma, tau)]``
    is a ``delta_k`` block for a face ``tau`` of codimension ``k >= 2``.
    """

    cubulation: Cubulation
    fiber_data: dict[str, MorseData]
    continuations: dict[tuple[str, str], IntMatrix] = field(default_factory=dict)
    higher: dict[tuple[int, str, str], IntMatrix] = field(default_factory=dict)
    metric: dict[str, str] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        missing = [i for i in self.cubulation.cubes if i not in self.fiber_data]
        if missing:
            raise ContractViolation(f"inadmissible: no fiber data at the centers of {missing}")

    def phi(self, sigma: str, tau: str) -> IntMatrix:
        m = self.continuations.get((sigma, tau))
        if m is None:
            a, b = self.fiber_data[sigma], self.fiber_data[tau]
            if a.critical_points != b.critical_points:
                raise ContractViolation(f"no continuation map given for {sigma} -> {tau}")
            return IntMatrix.identity(len(a.labels))
        return m if isinstance(m, IntMatrix) else IntMatrix.from_rows(m)

    def restrict(self, ids: Iterable[str]) -> "CubicalFamily":
        K = self.cubulation.restrict(ids)
        keep = set(K.cubes)
        return CubicalFamily(K, {i: self.fiber_data[i] for i in keep},
                             {k: v for k, v in self.continuations.items() if k[0] in keep},
                             {k: v for k, v in self.higher.items() if k[1] in keep},
                             {k: v for k, v in self.metric.items() if k in keep},
                             f"{self.name}|{sorted(keep)}")

    def to_json(self) -> dict:
        blocks = [{"k": 1, "from": s, "to": t, "matrix": m.to_rows()}
                  for (s, t), m in sorted(self.continuations.items())]
        blocks += [{"k": k, "from": s, "to": t, "matrix": m.to_rows()}
                   for (k, s, t), m in sorted(self.higher.items())]
        return {"name": self.name, "cubes": self.cubulation.to_json(),
                "fiber_data": {i: self.fiber_data[i].to_json() for i in self.cubulation.ids()},
                "blocks": blocks}

    @classmethod
    def from_json(cls, data: Mapping) -> "CubicalFamily":
        cubes = {c["id"]: Cube(c["id"], int(c["dim"]),
                               tuple((f["id"], int(f["sign"])) for f in c.get("faces", ())),
                               bool(c.get("degenerate", False))) for c in data["cubes"]}
        fibers = {k: MorseData.from_json(v) for k, v in data["fiber_data"].items()}
        conts, higher = {}, {}
        for b in data.get("blocks", ()):
            m = IntMatrix.from_rows(b["matrix"], cols=len(fibers[b["from"]].labels))
            if int(b["k"]) == 1:
                conts[(b["from"], b["to"])] = m
            else:
                higher[(int(b["k"]), b["from"], b["to"])] = m
        return cls(Cubulation(cubes), fibers, conts, higher, {}, data.get("name", ""))


def _delta0(F: MorseData, dim: int) -> IntMatrix:
    pos = F.full_matrix_index()
    rows = [[0] * len(F.labels) for _ in F.labels]
    sign = -1 if dim % 2 else 1
    for (a, b), c in F.net_counts().items():
        rows[pos[b]][pos[a]] += sign * c
    return IntMatrix.from_rows(rows, cols=len(F.labels))


def _full_complex(Z: CubicalFamily):
    K = Z.cubulation
    gens = []
    for i in K.ids():
        g = Z.metric.get(i, "g")
        for p in Z.fiber_data[i].labels:
            gens.append((i, g, p))

    def deg(gen):
        return K.cubes[gen[0]].dim + Z.fiber_data[gen[0]].indices[gen[2]]

    top = max((deg(g) for g in gens), default=0)
    basis = {m: [g for g in gens if deg(g) == m] for m in range(0, top + 1)}
    pos = {m: {g: k for k, g in enumerate(b)} for m, b in basis.items()}
    rows = {m: [[0] * len(basis[m]) for _ in basis[m - 1]] for m in range(1, top + 1)}

    def put(sigma, tau, M, k):
        src, dst = Z.fiber_data[sigma], Z.fiber_data[tau]
        gs, gt = Z.metric.get(sigma, "g"), Z.metric.get(tau, "g")
        for r, q in enumerate(dst.labels):
            for c, p in enumerate(src.labels):
                v = M[r, c]
                if not v:
                    continue
                if dst.indices[q] != src.indices[p] + k - 1:
                    raise ContractViolation(f"delta_{k} entry {sigma}:{p} -> {tau}:{q} breaks bidegree")
                m = K.cubes[sigma].dim + src.indices[p]
                rows[m][pos[m - 1][(tau, gt, q)]][pos[m][(sigma, gs, p)]] += v

    for i in K.ids():
        c = K.cubes[i]
        put(i, i, _delta0(Z.fiber_data[i], c.dim), 0)
        for f, s in c.faces:
            put(i, f, Z.phi(i, f).scale(s), 1)
    for (k, s, t), M in Z.higher.items():
        put(s, t, M if isinstance(M, IntMatrix) else IntMatrix.from_rows(M), k)
    diffs = {m: IntMatrix.from_rows(rows[m], cols=len(basis[m])) for m in rows}
    return basis, diffs


def assemble_cubical(Z: CubicalFamily) -> FilteredComplex:
    """Filtered complex of triples, with degenerate triples divided out."""
    basis, diffs = _full_complex(Z)
    K = Z.cubulation
    try:
        FilteredComplex(basis, diffs, {m: [K.cubes[g[0]].dim for g in b] for m, b in basis.items()})
    except InvalidComplex as exc:
        raise InvalidComplex(f"cubical family {Z.name or '<unnamed>'}: delta^2 != 0: {exc}") from None
    degen = {m: [K.cubes[g[0]].degenerate for g in b] for m, b in basis.items()}
    # degenerate triples must span a subcomplex for the quotient to exist
    for m, d in diffs.items():
        for c in range(d.cols):
            if not degen[m][c]:
                continue
            for r in range(d.rows):
                if d[r, c] and not degen[m - 1][r]:
                    raise ContractViolation(
                        f"degenerate triple {basis[m][c]} has boundary outside the degenerate span")
    keep = {m: [k for k, flag in enumerate(degen[m]) if not flag] for m in basis}
    nb = {m: [basis[m][k] for k in keep[m]] for m in basis}
    nd = {m: IntMatrix.from_rows([[d[r, c] for c in keep[m]] for r in keep[m - 1]],
                                 cols=len(keep[m])) for m, d in diffs.items()}
    levels = {m: [K.cubes[g[0]].dim for g in b] for m, b in nb.items()}
    return FilteredComplex(nb, nd, levels)


def compare_with_family(C: FilteredComplex | CubicalFamily, D: FamilyDescriptor) -> CheckResult:
    """Page groups and images of ``d_r`` agree for every ``r >= 2``."""
    if isinstance(C, CubicalFamily):
        C = assemble_cubical(C)
    from .family import assemble
    return same_pages(SpectralSequence(C), SpectralSequence(assemble(D)), r_from=2)


# ---------------------------------------------------------------------------
# maps between cubulations


@dataclass
class CubeMap:
    """Cube-to-cube map of cubulations, dimension-preserving or onto a degenerate cube."""

    source: CubicalFamily
    target: CubicalFamily
    mapping: dict[str, str]

    def check(self) -> CheckResult:
        S, T = self.source.cubulation, self.target.cubulation
        for s, t in self.mapping.items():
            a, b = S.cubes[s], T.cubes.get(t)
            if b is None:
                return CheckResult(False, f"{s} maps to unknown cube {t}")
            if b.degenerate:
                continue
            if a.dim != b.dim:
                return CheckResult(False, f"{s} changes dimension under the map")
            img = sorted((self.mapping[f], sg) for f, sg in a.faces)
            if img != sorted(b.faces):
                return CheckResult(False, f"faces of {s} do not map to faces of {t}")
            if self.source.fiber_data[s].critical_points != self.target.fiber_data[t].critical_points:
                return CheckResult(False, f"fiber data over {s} is not pulled back from {t}")
            for f, _ in a.faces:
                if self.source.phi(s, f) != self.target.phi(t, self.mapping[f]):
                    return CheckResult(False, f"continuation {s}->{f} is not pulled back")
        missing = [s for s in S.cubes if s not in self.mapping]
        if missing:
            return CheckResult(False, f"map undefined on {missing}")
        return CheckResult(True, "cube map is compatible with the fiber data")


def pushforward(phi: CubeMap) -> ChainMap:
    """``(sigma, g, p) -> (phi(sigma), g, p)`` as a filtered chain map."""
    chk = phi.check()
    if not chk:
        raise ContractViolation(f"incompatible cube map: {chk.message}")
    S, T = assemble_cubical(phi.source), assemble_cubical(phi.target)
    maps = {}
    for m in S.degrees():
        rows = [[0] * S.rank(m) for _ in range(T.rank(m))]
        pos = {g: k for k, g in enumerate(T.basis.get(m, []))}
        for c, (s, _, p) in enumerate(S.basis[m]):
            t = phi.mapping[s]
            tgt = (t, phi.target.metric.get(t, "g"), p)
            if tgt in pos:  # images on degenerate cubes vanish in the quotient
                rows[pos[tgt]][c] = 1
        maps[m] = IntMatrix.from_rows(rows, cols=S.rank(m))
    cm = ChainMap(S, T, maps)
    v = cm.verify()
    if not v:
        raise ContractViolation(f"pushforward is not a filtered chain map: {v.message}")
    return cm


# ---------------------------------------------------------------------------
# Mayer-Vietoris


@dataclass
class MayerVietorisReport:
    ok: bool
    nodes: list[dict]
    message: str = ""

    def __bool__(self):
        return self.ok


def _restriction(C: FilteredComplex, sub: FilteredComplex, m: int) -> IntMatrix:
    """Inclusion ``sub_m -> C_m`` (generators matched by label)."""
    rows = [[0] * sub.rank(m) for _ in range(C.rank(m))]
    for c, g in enumerate(sub.basis.get(m, [])):
        rows[C.index(m, g)][c] = 1
    return IntMatrix.from_rows(rows, cols=sub.rank(m))


def _cycles_boundaries(C: FilteredComplex, m: int):
    n = C.rank(m)
    Z = kernel(C.d(m)) if n else Subgroup(0, ())
    B = image(C.d(m + 1)) if C.rank(m + 1) and n else Subgroup(n, ())
    return Z, B


def _block_diag(A: IntMatrix, B: IntMatrix) -> IntMatrix:
    rows = [list(r) + [0] * B.cols for r in A.to_rows()] + [[0] * A.cols + list(r) for r in B.to_rows()]
    return IntMatrix.from_rows(rows, cols=A.cols + B.cols)


def _stack(A: IntMatrix, B: IntMatrix) -> IntMatrix:
    return IntMatrix.from_rows(A.to_rows() + B.to_rows(), cols=A.cols)


def mayer_vietoris(Z: CubicalFamily, U: Iterable[str], V: Iterable[str]) -> MayerVietorisReport:
    """Exactness of the long exact sequence of ``U n V -> U (+) V -> U u V``.

    Exactness is tested at every node as an equality of sublattices of the
    cycle group: ``ker(out) = im(in) + boundaries``.
    """
    U, V = set(U), set(V)
    if U | V != set(Z.cubulation.cubes):
        raise ContractViolation("U and V do not cover the cubulation")
    CK = assemble_cubical(Z)
    CU = assemble_cubical(Z.restrict(U))
    CV = assemble_cubical(Z.restrict(V))
    CW = assemble_cubical(Z.restrict(U & V)) if U & V else FilteredComplex({}, {}, {})
    top = max(CK.degrees(), default=0)

    def ZB(C, m):
        if m not in C.basis:
            return Subgroup(0, ()), Subgroup(0, ())
        return _cycles_boundaries(C, m)

    def incl(C, sub, m):
        return _restriction(C, sub, m) if m in sub.basis and m in C.basis else \
            IntMatrix.zeros(C.rank(m), sub.rank(m))

    def i_map(m):  # C(U n V) -> C(U) (+) C(V), c -> (c, c)
        return _stack(incl(CU, CW, m), incl(CV, CW, m))

    def j_map(m):  # C(U) (+) C(V) -> C(K), (a, b) -> a - b
        a, b = incl(CK, CU, m), incl(CK, CV, m)
        return IntMatrix.from_rows([list(x) + [-y for y in yr] for x, yr in zip(a.to_rows(), b.to_rows())],
                                   cols=a.cols + b.cols)

    def sum_ZB(m):
        zu, bu = ZB(CU, m)
        zv, bv = ZB(CV, m)
        n1, n2 = CU.rank(m), CV.rank(m)
        emb = lambda S, off, tot: Subgroup.span(tot, [tuple([0] * off + list(v) + [0] * (tot - off - len(v)))
                                                      for v in S.basis])
        tot = n1 + n2
        return (subgroup_sum(emb(zu, 0, tot), emb(zv, n1, tot)),
                subgroup_sum(emb(bu, 0, tot), emb(bv, n1, tot)))

    def conn_full(m):  # z -> d(z restricted to U), as a chain of U; lies in U n V for cycles z
        gens_k = CK.basis.get(m, [])
        rows = [[0] * len(gens_k) for _ in range(CU.rank(m - 1))]
        for c, g in enumerate(gens_k):
            if g[0] not in U:
                continue
            col = CU.d(m).apply([int(h == g) for h in CU.basis[m]]) if m in CU.basis else ()
            for r, x in enumerate(col):
                rows[r][c] += x
        return IntMatrix.from_rows(rows, cols=len(gens_k))

    def conn_map(m):  # on cycles: H_m(K) -> H_{m-1}(U n V) in the coordinates of U n V
        return incl(CU, CW, m - 1).transpose() @ conn_full(m)

    def conn_target(m):  # boundaries of U n V in degree m - 1, pushed into C(U)
        _, bw = ZB(CW, m - 1)
        emb = incl(CU, CW, m - 1)
        return Subgroup.span(CU.rank(m - 1), [emb.apply(v) for v in bw.basis])

    nodes = []
    ok = True

    def node(name, m, Zx, Bx, f_in, Z_prev, f_out, B_next):
        nonlocal ok
        n = Zx.ambient_rank
        if n == 0:
            nodes.append({"node": name, "degree": m, "group": quotient(Zx, Bx).group, "exact": True})
            return
        ker = intersection(preimage(f_out, B_next), Zx) if f_out is not None else Zx
        im_vecs = [f_in.apply(v) for v in Z_prev.basis] if f_in is not None else []
        im = subgroup_sum(Subgroup.span(n, im_vecs), Bx)
        exact = ker == im
        ok = ok and exact
        nodes.append({"node": name, "degree": m, "group": quotient(Zx, Bx).group, "exact": exact})

    for m in range(top, -1, -1):
        zw, bw = ZB(CW, m)
        zs, bs = sum_ZB(m)
        zk, bk = ZB(CK, m)
        zk1, _ = ZB(CK, m + 1)
        # H_m(U n V): in = connecting map from H_{m+1}(K), out = i
        node("H(UnV)", m, zw, bw, conn_map(m + 1) if CW.rank(m) and CK.rank(m + 1) else None,
             zk1, i_map(m) if CW.rank(m) else None, bs)
        node("H(U)+H(V)", m, zs, bs, i_map(m) if CW.rank(m) else None, zw,
             j_map(m) if CK.rank(m) else None, bk)
        node("H(UuV)", m, zk, bk, j_map(m) if CK.rank(m) else None, zs,
             conn_full(m) if CW.rank(m - 1) and CK.rank(m) else None,
             conn_target(m) if CW.rank(m - 1) and CK.rank(m) else None)
    return MayerVietorisReport(ok, nodes, "exact at every node" if ok else "exactness fails")


# ---------------------------------------------------------------------------
# built-in cubulations


def circle_cubulation(n: int = 2, prefix: str = "") -> Cubulation:
    """S^1 as ``n`` vertices and ``n`` edges ``e_k: v_k -> v_{k+1}``."""
    cubes = {}
    for k in range(n):
        cubes[f"{prefix}v{k}"] = Cube(f"{prefix}v{k}", 0)
    for k in range(n):
        cubes[f"{prefix}e{k}"] = Cube(f"{prefix}e{k}", 1,
                                      ((f"{prefix}v{(k + 1) % n}", 1), (f"{prefix}v{k}", -1)))
    return Cubulation(cubes)


def circle_family_cubical(fiber: MorseData, flips: dict[tuple[str, str], IntMatrix],
                          n: int = 2, name: str = "") -> CubicalFamily:
    """Constant fiber data over ``circle_cubulation(n)`` with the given
    non-identity continuations (chart transitions)."""
    K = circle_cubulation(n)
    return CubicalFamily(K, {i: fiber for i in K.cubes}, dict(flips), {}, {}, name)

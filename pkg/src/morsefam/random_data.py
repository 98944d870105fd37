"""Random valid inputs for property tests.

Descriptors are built in product form (fiber complexes glued by chain maps)
and then scrambled by a random filtered change of basis that respects the
block structure, so the result has nonzero blocks in every allowed position
while ``delta^2 = 0`` holds by construction.
"""

from __future__ import annotations

import random

from .complexes import FilteredComplex, GradedComplex
from .exact_algebra import IntMatrix, kernel
from .family import Block, FamilyDescriptor, assemble
from .morse import MorseData, circle_base, point_base, sphere_base

__all__ = ["random_fiber", "random_descriptor", "random_filtered_complex", "random_complex",
           "random_unimodular"]

_BASES = ("point", "circle", "circle4", "sphere2")


def _base(kind: str) -> MorseData:
    if kind == "point":
        return point_base()
    if kind == "circle":
        return circle_base()
    if kind == "sphere2":
        return sphere_base(2)
    return MorseData.build(
        [("x1a", 1), ("x1b", 1), ("x0a", 0), ("x0b", 0)],
        [("x1a", "x0a", 1), ("x1a", "x0b", -1), ("x1b", "x0b", 1), ("x1b", "x0a", -1)])


def random_fiber(rng: random.Random, max_gens: int = 4, top: int | None = None):
    """Generator counts per index and a differential ``{j: rows}`` with d^2 = 0."""
    top = rng.randint(0, 2) if top is None else top
    counts = [0] * (top + 1)
    for _ in range(rng.randint(1, max_gens)):
        counts[rng.randint(0, top)] += 1
    d: dict[int, list[list[int]]] = {}
    zero = rng.random() < 0.35
    for j in range(1, top + 1):
        rows, cols = counts[j - 1], counts[j]
        if zero or not rows or not cols:
            d[j] = [[0] * cols for _ in range(rows)]
            continue
        if j == 1 or not any(any(r) for r in d.get(j - 1, [])):
            d[j] = [[rng.randint(-2, 2) for _ in range(cols)] for _ in range(rows)]
            continue
        K = kernel(IntMatrix.from_rows(d[j - 1], cols=rows)).basis
        cols_vecs = []
        for _ in range(cols):
            v = [0] * rows
            for b in K:
                c = rng.randint(-1, 1)
                v = [a + c * x for a, x in zip(v, b)]
            cols_vecs.append(v)
        d[j] = [[cols_vecs[c][r] for c in range(cols)] for r in range(rows)]
    return counts, d


def _fiber_matrix(counts, d):
    """Full fiber differential on the concatenated basis (index-ascending)."""
    off = [sum(counts[:j]) for j in range(len(counts))]
    n = sum(counts)
    M = [[0] * n for _ in range(n)]
    for j, rows in d.items():
        for r, row in enumerate(rows):
            for c, v in enumerate(row):
                M[off[j - 1] + r][off[j] + c] = v
    return M


def _matmul(A, B):
    return [[sum(a * b for a, b in zip(row, col)) for col in zip(*B)] for row in A] if A and B else \
        [[0] * (len(B[0]) if B else 0) for _ in A]


def _random_chain_map(rng, counts, D, shift: int, anti: bool = False):
    """Random degree-``shift`` map commuting (or anticommuting) with D."""
    n = len(D)
    deg = [j for j, c in enumerate(counts) for _ in range(c)]
    if not any(any(r) for r in D):
        return [[rng.randint(-2, 2) if deg[r] == deg[c] + shift else 0 for c in range(n)]
                for r in range(n)]
    # D h +- h D for random h of degree shift + 1
    h = [[rng.randint(-1, 1) if deg[r] == deg[c] + shift + 1 else 0 for c in range(n)]
         for r in range(n)]
    Dh, hD = _matmul(D, h), _matmul(h, D)
    sgn = -1 if anti else 1
    M = [[Dh[r][c] + sgn * hD[r][c] for c in range(n)] for r in range(n)]
    if shift == 0:
        s = rng.choice((-1, 0, 1, 1, 2))
        for r in range(n):
            M[r][r] += s
    return M


def random_descriptor(rng: random.Random, max_generators: int = 16, scramble: int = 8,
                      base_kind: str | None = None) -> FamilyDescriptor:
    kind = base_kind or rng.choice(_BASES)
    base = _base(kind)
    npts = len(base.labels)
    counts, d = random_fiber(rng, max_gens=max(1, min(4, max_generators // npts)))
    top = len(counts) - 1
    Dfib = _fiber_matrix(counts, d)
    n = len(Dfib)
    labels = [f"p{j}_{k}" for j, c in enumerate(counts) for k in range(c)]
    fiber = MorseData.build([(lab, j) for j, c in enumerate(counts)
                             for lab in labels[sum(counts[:j]):sum(counts[:j + 1])]],
                            [(labels[c], labels[r], Dfib[r][c]) for r in range(n) for c in range(n)
                             if Dfib[r][c]])
    fibers = {x: fiber for x in base.labels}
    blocks = []
    if kind == "sphere2":
        blocks.append(Block(2, "x2", "x0", IntMatrix.from_rows(
            _random_chain_map(rng, counts, Dfib, 1, anti=True), cols=n)))
    else:
        net = {}
        for a, b, s in base.flows:
            T = IntMatrix.identity(n) if rng.random() < 0.4 else \
                IntMatrix.from_rows(_random_chain_map(rng, counts, Dfib, 0), cols=n)
            net[(a, b)] = net.get((a, b), IntMatrix.zeros(n, n)) + T.scale(s)
        blocks += [Block(1, a, b, M) for (a, b), M in net.items()]
    D0 = FamilyDescriptor(base, base.dimension, top, fibers, blocks, True, f"random[{kind}]")
    return _scramble(rng, D0, scramble)


def _scramble(rng: random.Random, D: FamilyDescriptor, steps: int) -> FamilyDescriptor:
    C = assemble(D)
    bidx = D.base.indices
    flow_pairs = {(a, b) for a, b, _ in D.base.flows}
    mats = {m: [list(r) for r in C.d(m).to_rows()] for m in C.degrees()}
    ops = []
    for m in C.degrees():
        gens = C.basis[m]
        for a, (xa, _) in enumerate(gens):
            for b, (xb, _) in enumerate(gens):
                if a == b:
                    continue
                drop = bidx[xb] - bidx[xa]
                if (drop == 0 and xa == xb) or (drop == 1 and (xb, xa) in flow_pairs) or drop >= 2:
                    ops.append((m, a, b))
    for _ in range(steps if ops else 0):
        m, a, b = rng.choice(ops)
        c = rng.choice((-1, 1))
        # E = I + c e_ab on C_m:  d_m <- d_m E^-1,  d_{m+1} <- E d_{m+1}
        dm = mats.get(m)
        if dm:
            for row in dm:
                row[b] -= c * row[a]
        dn = mats.get(m + 1)
        if dn:
            dn[a] = [x + c * y for x, y in zip(dn[a], dn[b])]
    return _extract(D, C, mats)


def _extract(D: FamilyDescriptor, C: FilteredComplex, mats) -> FamilyDescriptor:
    bidx = D.base.indices
    fl = {x: [] for x in D.base.labels}
    blk: dict = {}
    for m, rows in mats.items():
        src, dst = C.basis[m], C.basis.get(m - 1, [])
        for r, (y, q) in enumerate(dst):
            for c, (x, p) in enumerate(src):
                v = rows[r][c]
                if not v:
                    continue
                if x == y:
                    fl[x].append((p, q, v * (-1 if bidx[x] % 2 else 1)))
                else:
                    blk.setdefault((x, y), []).append((p, q, v))
    fibers = {x: MorseData(D.fibers[x].critical_points, tuple(fl[x]), D.fibers[x].orientation)
              for x in D.base.labels}
    blocks = []
    for (x, y), entries in blk.items():
        sp, dp = D.fibers[x].full_matrix_index(), D.fibers[y].full_matrix_index()
        M = [[0] * len(sp) for _ in dp]
        for p, q, v in entries:
            M[dp[q]][sp[p]] += v
        blocks.append(Block(bidx[x] - bidx[y], x, y, IntMatrix.from_rows(M, cols=len(sp))))
    out = FamilyDescriptor(D.base, D.dim_base, D.fiber_dim, fibers, blocks, D.oriented_fibers,
                           D.name)
    return out


def random_unimodular(rng: random.Random, n: int, steps: int = 6) -> IntMatrix:
    rows = [[int(i == j) for j in range(n)] for i in range(n)]
    for _ in range(steps if n > 1 else 0):
        a, b = rng.sample(range(n), 2)
        c = rng.choice((-1, 1))
        rows[a] = [x + c * y for x, y in zip(rows[a], rows[b])]
    if n and rng.random() < 0.5:
        rows[0] = [-x for x in rows[0]]
    return IntMatrix.from_rows(rows, cols=n)


def random_complex(rng: random.Random, max_gens: int = 8) -> GradedComplex:
    counts, d = random_fiber(rng, max_gens=max_gens, top=rng.randint(1, 3))
    basis = {j: [f"e{j}_{k}" for k in range(c)] for j, c in enumerate(counts)}
    diffs = {j: IntMatrix.from_rows(rows, cols=counts[j]) for j, rows in d.items()}
    return GradedComplex(basis, diffs)


def random_filtered_complex(rng: random.Random, max_gens: int = 12) -> FilteredComplex:
    """Assembled complex of a random descriptor (levels = base indices)."""
    D = random_descriptor(rng, max_generators=max_gens)
    return assemble(D)

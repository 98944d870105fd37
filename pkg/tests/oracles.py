"""Independent reference computations used only by the tests.

Everything here is written directly from definitions (ranks over Q via
sympy, invariant factors via determinantal divisors) and shares no code
with the library's lattice machinery.
"""

import itertools
from math import gcd

import sympy

from morsefam.exact_algebra import FgAbGroup  # result container only


def qrank(rows, ncols=None) -> int:
    rows = [list(r) for r in rows]
    if not rows or not (ncols if ncols is not None else len(rows[0])):
        return 0
    return sympy.Matrix(rows).rank()


def _det(M):
    if not M:
        return 1
    return sum((-1) ** j * M[0][j] * _det([row[:j] + row[j + 1:] for row in M[1:]])
               for j in range(len(M)) if M[0][j])


def invariant_factors(rows, ncols) -> list[int]:
    """Nonzero invariant factors from gcds of minors."""
    out, prev = [], 1
    nr = len(rows)
    for k in range(1, min(nr, ncols) + 1):
        g = 0
        for ri in itertools.combinations(range(nr), k):
            for ci in itertools.combinations(range(ncols), k):
                g = gcd(g, _det([[rows[i][j] for j in ci] for i in ri]))
                if g == 1 and k < min(nr, ncols):
                    break
        if g == 0:
            break
        out.append(g // prev)
        prev = g
    return out


def homology_oracle(C, m):
    """``(free_rank, torsion)`` of ``H_m`` for a GradedComplex ``C``."""
    n = C.rank(m)
    dm = C.d(m).to_rows() if C.rank(m - 1) and n else []
    dn = C.d(m + 1).to_rows() if C.rank(m + 1) and n else []
    rk_m = qrank(dm, n) if dm else 0
    inv = invariant_factors(dn, C.rank(m + 1)) if dn else []
    free = n - rk_m - len(inv)
    return free, tuple(x for x in inv if x > 1)



def monodromy_oracle(phi):
    """``(coker(1 - phi), ker(1 - phi))`` from invariant factors and a rational rank."""
    n = phi.rows
    A = [[int(i == j) - phi[i, j] for j in range(n)] for i in range(n)]
    inv = invariant_factors(A, n)
    coker = FgAbGroup(n - len(inv), tuple(x for x in inv if x > 1))
    ker = FgAbGroup(n - qrank(A, n))
    return coker, ker

def _block(F, m, rows_pred, cols_pred):
    d = F.d(m)
    lv_src, lv_dst = F.levels.get(m, ()), F.levels.get(m - 1, ())
    ci = [c for c, lv in enumerate(lv_src) if cols_pred(lv)]
    ri = [r for r, lv in enumerate(lv_dst) if rows_pred(lv)]
    return [[d[r, c] for c in ci] for r in ri], len(ci)


def _dim_F(F, m, p):
    return sum(1 for lv in F.levels.get(m, ()) if lv <= p)


def _dim_Z(F, r, p, m):
    """dim over Q of {x in F_p C_m : dx in F_{p-r}}."""
    n = _dim_F(F, m, p)
    if r <= 0 or not n:
        return n
    rows, nc = _block(F, m, lambda lv: lv > p - r, lambda lv: lv <= p)
    return n - (qrank(rows, nc) if rows else 0)


def _dim_B(F, a, b, m):
    """dim over Q of F_a C_m intersected with d(F_b C_{m+1})."""
    all_rows, nc = _block(F, m + 1, lambda lv: True, lambda lv: lv <= b)
    if not all_rows or not nc:
        return 0
    hi_rows, _ = _block(F, m + 1, lambda lv: lv > a, lambda lv: lv <= b)
    return qrank(all_rows, nc) - (qrank(hi_rows, nc) if hi_rows else 0)


def rational_page_dim(F, r, p, m) -> int:
    """``dim E^r_{p}`` in total degree ``m`` from rank formulas.

    With ``B^r_p = F_p cap d(F_{p+r-1})`` and the intersection of
    ``Z^{r-1}_{p-1}`` with ``B^r_p`` equal to ``B^{r+1}_{p-1}``.
    """
    return (_dim_Z(F, r, p, m) - _dim_Z(F, r - 1, p - 1, m)
            - _dim_B(F, p, p + r - 1, m) + _dim_B(F, p - 1, p + r - 1, m))


def rational_pages(F, r) -> dict:
    out = {}
    for m in F.degrees():
        for p in sorted(set(F.levels[m])):
            k = rational_page_dim(F, r, p, m)
            if k:
                out[(p, m - p)] = k
    return out


# ---------------------------------------------------------------------------
# cellular chain complexes of the total spaces


class _Cells:
    """Minimal stand-in with the ``rank`` / ``d`` interface of a graded complex."""

    def __init__(self, ranks, diffs):
        self.ranks, self.diffs = ranks, diffs

    def rank(self, m):
        return self.ranks.get(m, 0)

    def d(self, m):
        rows = self.diffs.get(m) or [[0] * self.rank(m) for _ in range(self.rank(m - 1))]

        class _M:
            def to_rows(self_inner):
                return rows

        return _M()

    def degrees(self):
        return sorted(k for k, v in self.ranks.items() if v)


# one 0-cell, edges a (base) and b (fiber), one 2-cell
CELLULAR = {
    # attaching word a b a^-1 b^-1
    "torus": _Cells({0: 1, 1: 2, 2: 1}, {1: [[0, 0]], 2: [[0], [0]]}),
    # attaching word a b a^-1 b: boundary 2b along the fiber
    "klein": _Cells({0: 1, 1: 2, 2: 1}, {1: [[0, 0]], 2: [[0], [2]]}),
    # lens spaces L(c, 1): one cell per degree, d_2 = c
    "sphere_base_toy": _Cells({0: 1, 1: 1, 2: 1, 3: 1}, {1: [[0]], 2: [[1]], 3: [[0]]}),
    "sphere_base_toy_2": _Cells({0: 1, 1: 1, 2: 1, 3: 1}, {1: [[0]], 2: [[2]], 3: [[0]]}),
    # S^1 x S^2: product cells 0, 1, 2, 3
    "s1_x_s2": _Cells({0: 1, 1: 1, 2: 1, 3: 1}, {1: [[0]], 2: [[0]], 3: [[0]]}),
}
CELLULAR["rotating_torus"] = CELLULAR["torus"]
CELLULAR["torus-trivial"] = CELLULAR["torus"]


def cellular_homology(name: str) -> dict[int, tuple[int, tuple[int, ...]]]:
    C = CELLULAR[name]
    return {m: homology_oracle(C, m) for m in C.degrees()}

"""Finite free Z-chain complexes, filtrations, chain maps and homotopies.

Degrees are homological (the differential lowers degree by one).  Basis
elements carry labels so generators of assembled complexes stay traceable,
e.g. ``("x1", "p0")`` for a base/fiber pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Mapping, Sequence

from .exact_algebra import (
    ContractViolation,
    FgAbGroup,
    IntMatrix,
    Quotient,
    Subgroup,
    full_lattice,
    image,
    kernel,
    quotient,
)

__all__ = [
    "CheckResult",
    "GradedComplex",
    "FilteredComplex",
    "ChainMap",
    "FilteredHomotopy",
    "InvalidComplex",
    "homology",
    "homology_groups",
    "HomologyGroup",
    "verify_filtered",
    "verify_homotopy",
    "verify_second_homotopy",
    "dual_complex",
]


class InvalidComplex(ContractViolation):
    """The data does not define a chain complex (d^2 != 0 or bad shapes)."""


@dataclass
class CheckResult:
    """Outcome of a verification: ``ok`` plus whatever explains a failure."""

    ok: bool
    message: str = ""
    details: dict = field(default_factory=dict)

    def __bool__(self):
        return self.ok

    def to_json(self) -> dict:
        return {"ok": self.ok, "message": self.message, "details": _jsonable(self.details)}


def _jsonable(x):
    if isinstance(x, IntMatrix):
        return x.to_rows()
    if isinstance(x, FgAbGroup):
        return x.to_json()
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _zero(rows: int, cols: int) -> IntMatrix:
    return IntMatrix.zeros(rows, cols)


class GradedComplex:
    """Finite free chain complex ``C_lo <- ... <- C_hi``.

    ``differentials[n]`` is the matrix of ``C_n -> C_{n-1}`` (missing
    entries are zero).  Construction fails if ``d d != 0``.
    """

    def __init__(self, basis: Mapping[int, Sequence[Hashable]],
                 differentials: Mapping[int, IntMatrix] | None = None,
                 check: bool = True):
        self.basis: dict[int, tuple] = {n: tuple(b) for n, b in basis.items() if len(b)}
        self.differentials: dict[int, IntMatrix] = {}
        for n, d in (differentials or {}).items():
            d = d if isinstance(d, IntMatrix) else IntMatrix.from_rows(d, cols=self.rank(n))
            if d.shape != (self.rank(n - 1), self.rank(n)):
                raise InvalidComplex(
                    f"d_{n} has shape {d.shape}, expected {(self.rank(n - 1), self.rank(n))}")
            if not d.is_zero():
                self.differentials[n] = d
        if check:
            for n in self.degrees():
                dd = self.d(n - 1) @ self.d(n)
                if not dd.is_zero():
                    i, j = next((i, j) for i in range(dd.rows) for j in range(dd.cols) if dd[i, j])
                    raise InvalidComplex(
                        f"d^2 != 0 in degree {n}: {self.basis[n][j]!r} -> "
                        f"{self.basis[n - 2][i]!r} has coefficient {dd[i, j]}")

    def rank(self, n: int) -> int:
        return len(self.basis.get(n, ()))

    def degrees(self) -> list[int]:
        return sorted(self.basis)

    @property
    def degree_range(self) -> tuple[int, int]:
        ds = self.degrees()
        return (ds[0], ds[-1]) if ds else (0, -1)

    def d(self, n: int) -> IntMatrix:
        if n in self.differentials:
            return self.differentials[n]
        return _zero(self.rank(n - 1), self.rank(n))

    def index(self, n: int, label) -> int:
        return self.basis[n].index(label)

    def __repr__(self):
        ranks = {n: self.rank(n) for n in self.degrees()}
        return f"GradedComplex(ranks={ranks})"


@dataclass
class HomologyGroup:
    """``H_n`` as a presented quotient ``ker d_n / im d_{n+1}``."""

    degree: int
    presentation: Quotient

    @property
    def group(self) -> FgAbGroup:
        return self.presentation.group

    def representatives(self) -> tuple[tuple[int, ...], ...]:
        """Cycle representatives of the presentation generators."""
        return self.presentation.generators

    def coords(self, cycle: Sequence[int]) -> tuple[int, ...]:
        return self.presentation.coords(cycle)


def homology_in_degree(C: GradedComplex, n: int) -> HomologyGroup:
    Z = kernel(C.d(n)) if C.rank(n) else full_lattice(0)
    if C.rank(n) and C.rank(n + 1):
        B = image(C.d(n + 1))
    else:
        B = Subgroup(C.rank(n), ())
    return HomologyGroup(n, quotient(Z, B))


def homology(C: GradedComplex) -> dict[int, HomologyGroup]:
    """Homology in every degree that carries generators."""
    return {n: homology_in_degree(C, n) for n in C.degrees()}


def homology_groups(C: GradedComplex, degrees=None) -> dict[int, FgAbGroup]:
    degrees = C.degrees() if degrees is None else degrees
    return {n: (homology_in_degree(C, n).group if C.rank(n) else FgAbGroup())
            for n in degrees}


class FilteredComplex(GradedComplex):
    """Graded complex whose generators carry filtration levels.

    The differential must not raise the level: an entry from a level-i
    generator to a level-i' generator with ``i' > i`` must vanish.
    """

    def __init__(self, basis, differentials=None, levels: Mapping[int, Sequence[int]] | None = None,
                 check: bool = True):
        super().__init__(basis, differentials, check=check)
        levels = levels or {}
        self.levels: dict[int, tuple[int, ...]] = {}
        for n in self.degrees():
            lv = tuple(int(x) for x in levels.get(n, (0,) * self.rank(n)))
            if len(lv) != self.rank(n):
                raise InvalidComplex(f"degree {n}: {len(lv)} levels for {self.rank(n)} generators")
            self.levels[n] = lv
        if check:
            report = _filtration_violation(self)
            if report is not None:
                raise InvalidComplex(report.message)

    @classmethod
    def from_graded(cls, C: GradedComplex, levels) -> "FilteredComplex":
        return cls(C.basis, C.differentials, levels)

    def filtration_range(self) -> tuple[int, int]:
        all_levels = [x for lv in self.levels.values() for x in lv]
        if not all_levels:
            return (0, 0)
        return min(all_levels), max(all_levels)

    def level_of(self, n: int, label) -> int:
        return self.levels[n][self.index(n, label)]

    def forget(self) -> GradedComplex:
        return GradedComplex(self.basis, self.differentials, check=False)


def _filtration_violation(C) -> CheckResult | None:
    for n, d in C.differentials.items():
        src, dst = C.levels[n], C.levels.get(n - 1, ())
        for i in range(d.rows):
            for j in range(d.cols):
                if d[i, j] and dst[i] > src[j]:
                    return CheckResult(False,
                                       f"degree {n}: {C.basis[n][j]!r} (level {src[j]}) -> "
                                       f"{C.basis[n - 1][i]!r} (level {dst[i]}) coefficient {d[i, j]}",
                                       {"degree": n, "source": C.basis[n][j],
                                        "target": C.basis[n - 1][i]})
    return None


def verify_filtered(C: GradedComplex, levels: Mapping[int, Sequence[int]] | None = None) -> CheckResult:
    """Check ``d^2 = 0`` and that ``d`` preserves the filtration.

    Accepts raw data (a complex built with ``check=False`` plus levels) so
    that invalid inputs can be diagnosed rather than rejected.
    """
    for n in C.degrees():
        dd = C.d(n - 1) @ C.d(n)
        if not dd.is_zero():
            i, j = next((i, j) for i in range(dd.rows) for j in range(dd.cols) if dd[i, j])
            return CheckResult(False, f"d^2 != 0 in degree {n}",
                               {"degree": n, "source": C.basis[n][j], "target": C.basis[n - 2][i]})
    if levels is None:
        levels = getattr(C, "levels", {})

    class _View:
        pass

    view = _View()
    view.differentials = C.differentials
    view.basis = C.basis
    view.levels = {n: tuple(levels.get(n, (0,) * C.rank(n))) for n in C.degrees()}
    report = _filtration_violation(view)
    return report if report is not None else CheckResult(True, "filtered complex")


# ---------------------------------------------------------------------------
# maps


def _shape_check(m: IntMatrix, rows: int, cols: int, what: str):
    if m.shape != (rows, cols):
        raise ContractViolation(f"{what} has shape {m.shape}, expected {(rows, cols)}")


class ChainMap:
    """Degree-preserving map between complexes, ``maps[n]: C_n -> C'_n``."""

    def __init__(self, source: GradedComplex, target: GradedComplex,
                 maps: Mapping[int, IntMatrix]):
        self.source = source
        self.target = target
        self.maps: dict[int, IntMatrix] = {}
        for n in set(source.degrees()) | set(target.degrees()):
            m = maps.get(n)
            if m is None:
                m = _zero(target.rank(n), source.rank(n))
            elif not isinstance(m, IntMatrix):
                m = IntMatrix.from_rows(m, cols=source.rank(n))
            _shape_check(m, target.rank(n), source.rank(n), f"map in degree {n}")
            self.maps[n] = m

    def __getitem__(self, n: int) -> IntMatrix:
        return self.maps.get(n, _zero(self.target.rank(n), self.source.rank(n)))

    @classmethod
    def identity(cls, C: GradedComplex) -> "ChainMap":
        return cls(C, C, {n: IntMatrix.identity(C.rank(n)) for n in C.degrees()})

    def compose(self, first: "ChainMap") -> "ChainMap":
        """``self o first``."""
        return ChainMap(first.source, self.target,
                        {n: self[n] @ first[n] for n in first.source.degrees()})

    def residual(self) -> dict[int, IntMatrix]:
        out = {}
        for n in sorted(set(self.source.degrees()) | set(self.target.degrees())):
            r = self.target.d(n) @ self[n] - self[n - 1] @ self.source.d(n)
            if not r.is_zero():
                out[n] = r
        return out

    def is_chain_map(self) -> bool:
        return not self.residual()

    def filtration_violation(self) -> dict | None:
        src_lv = getattr(self.source, "levels", None)
        dst_lv = getattr(self.target, "levels", None)
        if src_lv is None or dst_lv is None:
            return None
        for n, m in self.maps.items():
            for i in range(m.rows):
                for j in range(m.cols):
                    if m[i, j] and dst_lv[n][i] > src_lv[n][j]:
                        return {"degree": n, "source": self.source.basis[n][j],
                                "target": self.target.basis[n][i]}
        return None

    def verify(self) -> CheckResult:
        res = self.residual()
        if res:
            return CheckResult(False, "not a chain map", {"residual": res})
        bad = self.filtration_violation()
        if bad:
            return CheckResult(False, "map raises filtration level", bad)
        return CheckResult(True, "filtered chain map")


def _homotopy_check(K: Mapping[int, IntMatrix], shift: int, source, target, raise_by: int):
    for n, m in K.items():
        if not m.shape == (target.rank(n + shift), source.rank(n)):
            raise ContractViolation(
                f"homotopy in degree {n} has shape {m.shape}, expected "
                f"{(target.rank(n + shift), source.rank(n))}")
    src_lv = getattr(source, "levels", None)
    dst_lv = getattr(target, "levels", None)
    if src_lv is None or dst_lv is None:
        return None
    for n, m in K.items():
        for i in range(m.rows):
            for j in range(m.cols):
                if m[i, j] and dst_lv[n + shift][i] > src_lv[n][j] + raise_by:
                    return {"degree": n, "source": source.basis[n][j],
                            "target": target.basis[n + shift][i]}
    return None


@dataclass
class FilteredHomotopy:
    """Degree +1 map ``K_n: C_n -> C'_{n+1}``; may raise the filtration by one."""

    source: GradedComplex
    target: GradedComplex
    maps: dict[int, IntMatrix]

    def __post_init__(self):
        self.maps = {n: (m if isinstance(m, IntMatrix)
                         else IntMatrix.from_rows(m, cols=self.source.rank(n)))
                     for n, m in self.maps.items()}
        _homotopy_check(self.maps, 1, self.source, self.target, 1)

    def __getitem__(self, n):
        return self.maps.get(n, _zero(self.target.rank(n + 1), self.source.rank(n)))


def verify_homotopy(K: FilteredHomotopy, phi0: ChainMap, phi1: ChainMap) -> CheckResult:
    """Check ``d K + K d = phi0 - phi1`` degreewise (and the filtration bound)."""
    C, D = K.source, K.target
    bad = _homotopy_check(K.maps, 1, C, D, 1)
    if bad:
        return CheckResult(False, "homotopy raises filtration by more than one", bad)
    residual = {}
    for n in sorted(set(C.degrees()) | set(D.degrees())):
        r = D.d(n + 1) @ K[n] + K[n - 1] @ C.d(n) - phi0[n] + phi1[n]
        if not r.is_zero():
            residual[n] = r
    if residual:
        return CheckResult(False, "dK + Kd != phi0 - phi1", {"residual": residual})
    return CheckResult(True, "chain homotopy")


def verify_second_homotopy(L: Mapping[int, IntMatrix], K0: FilteredHomotopy,
                           K1: FilteredHomotopy) -> CheckResult:
    """Check ``d L - L d = K0 - K1`` with ``L_n: C_n -> C'_{n+2}``."""
    C, D = K0.source, K0.target
    L = {n: (m if isinstance(m, IntMatrix) else IntMatrix.from_rows(m, cols=C.rank(n)))
         for n, m in L.items()}
    _homotopy_check(L, 2, C, D, 2)

    def Ln(n):
        return L.get(n, _zero(D.rank(n + 2), C.rank(n)))

    residual = {}
    for n in sorted(set(C.degrees()) | set(D.degrees())):
        r = D.d(n + 2) @ Ln(n) - Ln(n - 1) @ C.d(n) - K0[n] + K1[n]
        if not r.is_zero():
            residual[n] = r
    if residual:
        return CheckResult(False, "dL - Ld != K0 - K1", {"residual": residual})
    return CheckResult(True, "second homotopy")


def dual_complex(C: GradedComplex) -> GradedComplex:
    """``Hom(C, Z)`` regraded homologically: degree ``-n`` holds ``C^n``.

    For a filtered input the dual filtration is reported with level ``-i``,
    which turns the decreasing cohomological filtration into an increasing one.
    """
    basis = {-n: C.basis[n] for n in C.degrees()}
    diffs = {}
    for n in C.degrees():
        # D_{-n+1} = C^{n-1} -> D_{-n} = C^n is the transpose of d_n
        d = C.d(n)
        if not d.is_zero():
            diffs[-n + 1] = d.transpose()
    if isinstance(C, FilteredComplex):
        levels = {-n: tuple(-x for x in C.levels[n]) for n in C.degrees()}
        return FilteredComplex(basis, diffs, levels)
    return GradedComplex(basis, diffs)


def relabel(C: GradedComplex, fn) -> GradedComplex:
    """Same complex with every basis label passed through ``fn``."""
    basis = {n: [fn(x) for x in b] for n, b in C.basis.items()}
    if isinstance(C, FilteredComplex):
        return FilteredComplex(basis, C.differentials, C.levels, check=False)
    return GradedComplex(basis, C.differentials, check=False)


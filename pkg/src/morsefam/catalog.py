"""Built-in family descriptors and their hand-derived reference data."""

from __future__ import annotations

from typing import Callable

from .exact_algebra import FgAbGroup, IntMatrix
from .family import Block, FamilyDescriptor
from .morse import MorseData, circle_base, sphere_base

__all__ = [
    "circle_fiber",
    "sphere_fiber",
    "torus",
    "klein",
    "rotating_torus",
    "sphere_base_toy",
    "s1_x_s2",
    "swap_points",
    "circle_family",
    "BUILTINS",
    "get",
    "LERAY_SERRE",
    "TOTAL_HOMOLOGY",
]


def circle_fiber(orientation: str = "base-first/std") -> MorseData:
    """Height on S^1: maximum ``p1``, minimum ``p0``, two cancelling flow lines."""
    return MorseData.build([("p1", 1), ("p0", 0)], [("p1", "p0", 1), ("p1", "p0", -1)],
                           orientation)


def sphere_fiber(n: int) -> MorseData:
    if n == 1:
        return circle_fiber()
    return MorseData.build([(f"p{n}", n), ("p0", 0)])


def _circle_family(name: str, fiber: MorseData, delta1: IntMatrix, oriented: bool = True,
                   fiber_dim: int | None = None) -> FamilyDescriptor:
    base = circle_base()
    fibers = {"x1": fiber, "x0": fiber}
    blocks = [Block(1, "x1", "x0", delta1)]
    return FamilyDescriptor(base, 1, fiber.dimension if fiber_dim is None else fiber_dim,
                            fibers, blocks, oriented, name)


def torus() -> FamilyDescriptor:
    # transports along the two base flow lines are both the identity; the
    # flow lines carry opposite signs, so the aggregated block vanishes
    return _circle_family("torus", circle_fiber(), IntMatrix.zeros(2, 2))


def rotating_torus() -> FamilyDescriptor:
    # f(s, theta) = cos(theta - 2 pi s): critical points move once around the
    # fiber, monodromy is still the identity on the chain level
    D = _circle_family("rotating_torus", circle_fiber("base-first/rotating"), IntMatrix.zeros(2, 2))
    return D


def klein() -> FamilyDescriptor:
    # identity along one flow line (sign +1), reflection along the other (sign -1):
    # delta_1 = I - diag(-1, +1) on (p1, p0)
    return _circle_family("klein", circle_fiber(), IntMatrix.from_rows([[2, 0], [0, 0]]),
                          oriented=False)


def swap_points() -> FamilyDescriptor:
    """Mapping torus of the swap of a two-point fiber (total space S^1)."""
    fiber = MorseData.build([("a", 0), ("b", 0)])
    return _circle_family("swap_points", fiber, IntMatrix.from_rows([[1, -1], [-1, 1]]),
                          fiber_dim=0)


def s1_x_s2() -> FamilyDescriptor:
    return _circle_family("s1_x_s2", sphere_fiber(2), IntMatrix.zeros(2, 2))


def sphere_base_toy(c: int = 1) -> FamilyDescriptor:
    """Circle fibers over S^2 with ``delta_2 (x2, p0) = c (x0, p1)``.

    ``c = 1`` models the Hopf fibration (total space S^3), ``c = 2`` the
    unit tangent bundle of S^2 (total space RP^3).
    """
    base = sphere_base(2)
    F = circle_fiber()
    blocks = [Block(2, "x2", "x0", IntMatrix.from_rows([[0, c], [0, 0]]))]
    return FamilyDescriptor(base, 2, 1, {"x2": F, "x0": F}, blocks, True,
                            f"sphere_base_toy(c={c})")


def rp2_swap() -> FamilyDescriptor:
    """Flat family over RP^2 whose monodromy swaps two fiber generators.

    Fiber complex ``a, b -> 2c``; the nontrivial loop exchanges ``a`` and
    ``b`` and fixes ``c``.  There is no ``delta_2``, yet ``d_2`` on ``E^2_{2,0}``
    is nonzero over Z (the rational sequence collapses at ``E^2``).
    """
    base = MorseData.build([("x2", 2), ("x1", 1), ("x0", 0)],
                           [("x2", "x1", 1), ("x2", "x1", 1), ("x1", "x0", 1), ("x1", "x0", -1)])
    F = MorseData.build([("a", 1), ("b", 1), ("c", 0)], [("a", "c", 2), ("b", "c", 2)])
    T = IntMatrix.from_rows([[0, 1, 0], [1, 0, 0], [0, 0, 1]])
    one = IntMatrix.identity(3)
    # x1 -> x0: the two flow lines carry 1 and T with opposite signs; x2 -> x1: both +1
    blocks = [Block(1, "x1", "x0", T - one), Block(1, "x2", "x1", T + one)]
    return FamilyDescriptor(base, 2, 1, {"x2": F, "x1": F, "x0": F}, blocks, False, "rp2_swap")


def circle_family(phi, degree: int = 0, name: str = "") -> FamilyDescriptor:
    """Fiber with ``n`` critical points of one index and zero differential,
    monodromy ``phi`` along the second base flow line."""
    phi = phi if isinstance(phi, IntMatrix) else IntMatrix.from_rows(phi)
    n = phi.rows
    fiber = MorseData.build([(f"g{a}", degree) for a in range(n)])
    return _circle_family(name or "circle_family", fiber, IntMatrix.identity(n) - phi,
                          fiber_dim=degree)


BUILTINS: dict[str, Callable[[], FamilyDescriptor]] = {
    "torus": torus,
    "torus-trivial": torus,
    "klein": klein,
    "rotating_torus": rotating_torus,
    "sphere_base_toy": sphere_base_toy,
    "sphere_base_toy_2": lambda: sphere_base_toy(2),
    "s1_x_s2": s1_x_s2,
    "swap_points": swap_points,
    "rp2_swap": rp2_swap,
}


def get(name: str) -> FamilyDescriptor:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise KeyError(f"unknown example {name!r}; known: {sorted(BUILTINS)}") from None


Z = FgAbGroup(1)
Z2 = FgAbGroup(0, (2,))

# Leray-Serre reference pages, hand-computed from the local system
# H_i(B; H_j(F)):  {r: {(i, j): group}}, r = 2 and r = infinity
LERAY_SERRE: dict[str, dict[str, dict[tuple[int, int], FgAbGroup]]] = {
    "torus": {
        "2": {(0, 0): Z, (1, 0): Z, (0, 1): Z, (1, 1): Z},
        "inf": {(0, 0): Z, (1, 0): Z, (0, 1): Z, (1, 1): Z},
    },
    "rotating_torus": {
        "2": {(0, 0): Z, (1, 0): Z, (0, 1): Z, (1, 1): Z},
        "inf": {(0, 0): Z, (1, 0): Z, (0, 1): Z, (1, 1): Z},
    },
    "klein": {
        "2": {(0, 0): Z, (1, 0): Z, (0, 1): Z2},
        "inf": {(0, 0): Z, (1, 0): Z, (0, 1): Z2},
    },
    # E^2 = H_*(S^2) x H_*(S^1); d_2: E_{2,0} -> E_{0,1} is multiplication by c
    "sphere_base_toy": {
        "2": {(0, 0): Z, (2, 0): Z, (0, 1): Z, (2, 1): Z},
        "inf": {(0, 0): Z, (2, 1): Z},
    },
    "sphere_base_toy_2": {
        "2": {(0, 0): Z, (2, 0): Z, (0, 1): Z, (2, 1): Z},
        "inf": {(0, 0): Z, (0, 1): Z2, (2, 1): Z},
    },
}

# singular homology of the total spaces (cellular oracles)
TOTAL_HOMOLOGY: dict[str, tuple[FgAbGroup, ...]] = {
    "torus": (Z, FgAbGroup(2), Z),
    "rotating_torus": (Z, FgAbGroup(2), Z),
    "klein": (Z, FgAbGroup(1, (2,)), FgAbGroup()),
    "sphere_base_toy": (Z, FgAbGroup(), FgAbGroup(), Z),
    "sphere_base_toy_2": (Z, Z2, FgAbGroup(), Z),
    "s1_x_s2": (Z, Z, Z, Z),
    "swap_points": (Z, Z),
}

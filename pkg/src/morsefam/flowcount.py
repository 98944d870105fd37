"""Numerical flow-line counting on circle bundles over low-dimensional bases.

The total space is described in universal-cover coordinates ``(s, theta)``.
Over a circle base the deck transformation is ``(s, theta) -> (s + 1,
eps * theta)`` with ``eps = -1`` for a Klein-type bundle.  The fiber metric
is conformal, ``rho(s, theta) |d theta|^2``, so the fiberwise negative
gradient is ``xi = -f_theta / rho``.

Everything floating-point stays inside this module.  The outputs are exact
integer data (``MorseData``, ``FamilyDescriptor``, cubical datasets, block
matrices) that the algebra layer re-verifies.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from . import catalog
from .cubical import CubicalFamily, circle_cubulation
from .exact_algebra import ContractViolation, IntMatrix
from .family import Block, ContinuationBlocks, FamilyDescriptor
from .morse import MorseData

__all__ = [
    "FiberFunction",
    "Metric",
    "Tolerances",
    "ChartedBundle",
    "Equilibrium",
    "FlowLineRecord",
    "CountResult",
    "StabilityReport",
    "Inadmissible",
    "ResolutionExhausted",
    "find_equilibria",
    "fiber_flow_lines",
    "count_flow_lines",
    "count_bundle",
    "emit_descriptor",
    "emit_cubical",
    "metric_continuation",
    "regularity_check",
    "tolerance_check",
    "bundle",
    "bundle_from_recipe",
    "reverse_flow_check",
    "BUNDLES",
    "COMBINATORIAL",
]

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


class Inadmissible(ContractViolation):
    """The fiber function is not Morse at a distinguished base point."""


class ResolutionExhausted(ArithmeticError):
    """Shooting could not separate basins or reach an equilibrium."""


# ---------------------------------------------------------------------------
# bundle data


@dataclass(frozen=True)
class FiberFunction:
    """Fiberwise function from a small expression library.

    ``cos``:      ``a cos(k theta)``
    ``rotating``: ``cos(theta - 2 pi w s)``
    ``tuned``:    ``-cos(theta) (1 - 2 s^2)``, non-Morse-Smale on purpose
    """

    expr: str = "cos"
    params: tuple[float, ...] = ()
    scale: float = 1.0

    def _p(self, i, default):
        return self.params[i] if len(self.params) > i else default

    def negated(self) -> "FiberFunction":
        return replace(self, scale=-self.scale)

    def values(self, s, th):
        """``(f, f_theta, f_thetatheta, f_s)``, vectorized."""
        if self.scale != 1.0:
            return tuple(self.scale * v for v in replace(self, scale=1.0).values(s, th))
        s, th = np.asarray(s, float), np.asarray(th, float)
        if self.expr == "cos":
            k, a = self._p(0, 1.0), self._p(1, 1.0)
            c, sn = np.cos(k * th), np.sin(k * th)
            return a * c, -a * k * sn, -a * k * k * c, np.zeros_like(s + th)
        if self.expr == "rotating":
            w = self._p(0, 1.0)
            ph = th - TWO_PI * w * s
            return np.cos(ph), -np.sin(ph), -np.cos(ph), TWO_PI * w * np.sin(ph)
        if self.expr == "tuned":
            g = 1.0 - 2.0 * s * s
            return -np.cos(th) * g, np.sin(th) * g, np.cos(th) * g, 4.0 * s * np.cos(th)
        raise ContractViolation(f"unknown fiber function {self.expr!r}")

    def grad(self, s, th):
        """``f_theta`` alone (the hot path of the integrator)."""
        if self.scale != 1.0:
            return self.scale * replace(self, scale=1.0).grad(s, th)
        if self.expr == "cos":
            k, a = self._p(0, 1.0), self._p(1, 1.0)
            return -a * k * np.sin(k * th)
        if self.expr == "rotating":
            return -np.sin(th - TWO_PI * self._p(0, 1.0) * s)
        return self.values(s, th)[1]

    def to_json(self) -> dict:
        out = {"expr": self.expr, "params": list(self.params)}
        if self.scale != 1.0:
            out["scale"] = self.scale
        return out

    @classmethod
    def from_json(cls, data: Mapping) -> "FiberFunction":
        return cls(str(data.get("expr", "cos")), tuple(float(x) for x in data.get("params", ())),
                   float(data.get("scale", 1.0)))


@dataclass(frozen=True)
class Metric:
    """Conformal factor ``rho = 1 + sum of trigonometric terms``.

    Term ``("cc", k, m, a)`` is ``a cos(k theta) cos(2 pi m s)``;
    ``("ss", k, m, a)`` is ``a sin(k theta) sin(pi (2m+1) s)``, which is
    compatible with a fiber reflection at ``s -> s + 1``;
    ``("sc", k, m, a)`` is ``a sin(k theta) cos(2 pi m s)``.
    """

    terms: tuple[tuple[str, int, int, float], ...] = ()

    def rho(self, s, th):
        if not self.terms:
            return 1.0
        s, th = np.asarray(s, float), np.asarray(th, float)
        out = np.ones(np.broadcast(s, th).shape)
        for kind, k, m, a in self.terms:
            if kind == "cc":
                out = out + a * np.cos(k * th) * np.cos(TWO_PI * m * s)
            elif kind == "ss":
                out = out + a * np.sin(k * th) * np.sin(math.pi * (2 * m + 1) * s)
            elif kind == "sc":
                out = out + a * np.sin(k * th) * np.cos(TWO_PI * m * s)
            else:
                raise ContractViolation(f"unknown metric term {kind!r}")
        return out

    def lower_bound(self) -> float:
        return 1.0 - sum(abs(t[3]) for t in self.terms)

    @classmethod
    def random(cls, rng: np.random.Generator, eps: float, deck: int | None, n_terms: int = 3) -> "Metric":
        """Random perturbation of size ``eps`` compatible with the deck sign."""
        if eps == 0:
            return cls()
        kinds = ["cc", "ss"] if deck == -1 else ["cc", "ss", "sc"]
        terms = []
        amps = rng.uniform(-1.0, 1.0, n_terms)
        amps = amps / max(1.0, float(np.abs(amps).sum()))
        for a in amps:
            kind = kinds[int(rng.integers(len(kinds)))]
            terms.append((kind, int(rng.integers(1, 4)), int(rng.integers(0, 3)), float(eps * a)))
        return cls(tuple(terms))

    def to_json(self) -> list:
        return [list(t) for t in self.terms]


@dataclass(frozen=True)
class Tolerances:
    root_tol: float = 1e-6
    lin_tol: float = 1e-3
    shoot_tol: float = 1e-9
    rtol: float = 1e-8
    atol: float = 1e-10
    grid: int = 24
    start_radius: float = 1e-4

    def tightened(self, factor: float = 10.0) -> "Tolerances":
        return replace(self, shoot_tol=self.shoot_tol / factor, rtol=self.rtol / factor,
                       atol=self.atol / factor)

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in ("root_tol", "lin_tol", "shoot_tol", "rtol", "atol",
                                              "grid", "start_radius")}


@dataclass(frozen=True)
class ChartedBundle:
    """Circle bundle over a point, ``[-1, 1]``, or a circle.

    ``deck`` is the chart transition sign on the fiber coordinate across the
    seam of a circle base.
    """

    name: str
    base: str
    f: FiberFunction = FiberFunction()
    metric: Metric = Metric()
    deck: int = 1

    def __post_init__(self):
        if self.base not in ("point", "interval", "circle"):
            raise ContractViolation(f"unsupported base kind {self.base!r}")
        if self.deck not in (1, -1):
            raise ContractViolation("deck sign must be +1 or -1")
        if self.metric.lower_bound() <= 0.05:
            raise ContractViolation("conformal factor is not bounded away from 0")

    # base geometry
    def base_points(self) -> list[tuple[str, float, int]]:
        """Distinguished base points ``(label, coordinate, index)``."""
        if self.base == "point":
            return [("x", 0.0, 0)]
        if self.base == "interval":
            return [("c", 0.0, 1), ("r", 1.0, 0), ("l", -1.0, 0)]
        return [("x1", 0.0, 1), ("x0", 0.5, 0)]

    def base_field(self, s):
        s = np.asarray(s, float)
        if self.base == "interval":
            return -(s + 1.0) * s * (s - 1.0)
        if self.base == "circle":
            # gradient of cos(2 pi s) for the base metric (2 pi)^2 ds^2
            return np.sin(TWO_PI * s) / TWO_PI
        return np.zeros_like(s)

    def base_field_slope(self, s: float) -> float:
        if self.base == "interval":
            return 1.0 - 3.0 * s * s
        if self.base == "circle":
            return math.cos(TWO_PI * s)
        return 0.0

    def to_json(self) -> dict:
        return {"name": self.name, "base": self.base, "fiber_function": self.f.to_json(),
                "metric": self.metric.to_json(), "deck": self.deck}


@dataclass(frozen=True)
class Equilibrium:
    base_label: str
    base_coord: float
    theta: float
    label: str
    fiber_index: int
    base_index: int
    eigen_signs: tuple[int, ...]

    @property
    def index(self) -> int:
        return self.base_index + self.fiber_index


@dataclass(frozen=True)
class FlowLineRecord:
    source: tuple[str, str]
    target: tuple[str, str]
    sign: int
    parameter: float
    energy: float
    energy_bound: float
    C: float
    deck_crossings: int = 0
    edge: str = ""

    def to_json(self) -> dict:
        return {"source": list(self.source), "target": list(self.target), "sign": self.sign,
                "parameter": round(self.parameter, 6), "energy": round(self.energy, 6),
                "energy_bound": round(self.energy_bound, 6), "C": round(self.C, 6),
                "deck_crossings": self.deck_crossings, "edge": self.edge}


# ---------------------------------------------------------------------------
# equilibria


def _fiber_points(f: FiberFunction, s: float, base_label: str, base_index: int,
                  tol: Tolerances, base_slope: float | None) -> list[Equilibrium]:
    # periodic grid offset from the symmetric points where roots often sit
    grid = 0.0123 + np.linspace(0.0, TWO_PI, 721)
    g = f.values(np.full_like(grid, s), grid)[1]
    roots = []
    for a, b, ga, gb in zip(grid[:-1], grid[1:], g[:-1], g[1:]):
        if ga == 0.0:
            roots.append(float(a))
        elif ga * gb < 0:
            roots.append(brentq(lambda t: float(f.values(s, t)[1]), a, b, xtol=1e-14))
    pts = []
    for th in roots:
        h = float(f.values(s, th)[2])
        if abs(h) < tol.root_tol:
            raise Inadmissible(f"inadmissible at {base_label}: degenerate fiber critical point "
                               f"near theta={th:.6f}")
        pts.append((th % TWO_PI, 1 if h < 0 else 0, h))
    pts.sort(key=lambda t: (-t[1], t[0]))
    n_of = {i: sum(1 for p in pts if p[1] == i) for i in (0, 1)}
    seen = {0: 0, 1: 0}
    out = []
    for th, i, h in pts:
        label = f"p{i}" if n_of[i] == 1 else f"p{i}_{seen[i]}"
        seen[i] += 1
        signs = [1 if h < 0 else -1]
        if base_slope is not None:
            signs.insert(0, 1 if base_slope > 0 else -1)
        out.append(Equilibrium(base_label, s, th, label, i, base_index, tuple(signs)))
    return out


def find_equilibria(Z: ChartedBundle, tol: Tolerances = Tolerances(),
                    cells: str = "morse") -> list[Equilibrium]:
    """Fiber critical points over the distinguished base points.

    ``cells='cubical'`` uses the centers of the 2-vertex/2-edge cubulation of
    a circle base instead of the base critical points.
    """
    if cells == "cubical":
        if Z.base != "circle":
            raise ContractViolation("cubical centers are defined for circle bases")
        pts = [("v0", 0.0, 0), ("v1", 0.5, 0), ("e0", 0.25, 1), ("e1", 0.75, 1)]
        return [e for lab, s, i in pts for e in _fiber_points(Z.f, s, lab, i, tol, None)]
    out = []
    for lab, s, i in Z.base_points():
        slope = Z.base_field_slope(s) if Z.base != "point" else None
        if slope is not None and abs(slope) < tol.lin_tol:
            raise Inadmissible(f"inadmissible at {lab}: base field not hyperbolic")
        out.extend(_fiber_points(Z.f, s, lab, i, tol, slope))
    return out


# ---------------------------------------------------------------------------
# integration


@dataclass
class _Field:
    """Planar field ``(du, dtheta)`` with ``u`` the base-direction parameter."""

    W: Callable
    fiber: Callable  # (u, theta) -> (f_theta / rho, f_theta^2 / rho)

    def rhs(self, t, y):
        n = y.size // 3
        u, th = y[:n], y[n:2 * n]
        g, e = self.fiber(u, th)
        out = np.empty_like(y)
        out[:n] = self.W(u)
        out[n:2 * n] = -g
        out[2 * n:] = e
        return out


def _integrate(field_: _Field, u0: np.ndarray, th0: np.ndarray, T: float, tol: Tolerances,
               done: Callable | None = None):
    """Batch integration; stops early once ``done(u, theta) < 0`` (all converged)."""
    y0 = np.concatenate([u0, th0, np.zeros_like(u0)])
    events = None
    if done is not None:
        n0 = u0.size

        def event(t, y):
            return done(y[:n0], y[n0:2 * n0])

        event.terminal = True
        event.direction = -1
        events = event
    sol = solve_ivp(field_.rhs, (0.0, T), y0, method="RK45", rtol=tol.rtol, atol=tol.atol,
                    events=events)
    if not sol.success:
        raise ResolutionExhausted(f"integrator failed: {sol.message}")
    n = u0.size
    return sol.y[:n, -1], sol.y[n:2 * n, -1], sol.y[2 * n:, -1]


def _bundle_field(Z: ChartedBundle, s_fixed: float | None = None) -> _Field:
    def fiber(u, th):
        s = u if s_fixed is None else s_fixed
        ft = Z.f.grad(s, th)
        r = Z.metric.rho(s, th)
        return ft / r, ft * ft / r

    if s_fixed is not None:
        return _Field(lambda u: np.zeros_like(u), fiber)
    return _Field(Z.base_field, fiber)


def _beta(t):
    t = np.asarray(t, float)
    return t * (1.0 - t) * (1.0 + t)


def _path_field(f: FiberFunction, s_of_t: Callable, rho_of_t: Callable) -> _Field:
    """Continuation field ``beta(t) d/dt + xi_t`` along a path of fibers."""

    def fiber(t, th):
        s = s_of_t(t)
        ft = f.grad(s, th)
        r = rho_of_t(t, s, th)
        return ft / r, ft * ft / r

    return _Field(_beta, fiber)


# ---------------------------------------------------------------------------
# counting


@dataclass
class _Problem:
    """One shooting problem: flow from ``u0`` towards ``u1`` in the u-direction."""

    field: _Field
    u0: float
    u1: float
    source: list[Equilibrium]       # fiber points over u0, in the u0 chart
    target: list[Equilibrium]       # fiber points over u1, in the u1 chart
    chart: int                      # sign of the theta coordinate change at u1
    crossings: int
    f_at: Callable                  # (u, theta) -> f
    C: float
    edge: str
    T: float
    side: int                       # +1 if u increases along the flow

    def sink_gap(self, tol: Tolerances):
        """Event function: positive until every trajectory is near a sink."""
        sinks = np.array([q.theta for q in self.target if q.fiber_index == 0])
        r = tol.lin_tol

        def gap(u, th):
            Theta = self.chart * th
            d = np.abs((Theta[:, None] - sinks[None, :] + math.pi) % TWO_PI - math.pi).min(axis=1)
            return float(np.maximum(np.abs(u - self.u1), d).max()) - r

        return gap

    def classify(self, u, th, tol: Tolerances):
        """Target equilibrium and lifted chart angle of each final state."""
        out = []
        for uu, tt in zip(u, th):
            if abs(uu - self.u1) > 10 * tol.lin_tol:
                out.append((None, math.nan))
                continue
            Theta = self.chart * tt
            best = None
            for q in self.target:
                k = round((Theta - q.theta) / TWO_PI)
                d = abs(Theta - q.theta - TWO_PI * k)
                if d < 10 * tol.lin_tol and (best is None or d < best[0]):
                    best = (d, q, k)
            out.append((None if best is None else (best[1].label, best[2], best[1].fiber_index), Theta))
        return out


def _energy_bound_C(f_at_s: Callable, u0: float, u1: float, ds_du: float) -> float:
    """``sup |d f / d u| * |u1 - u0|`` sampled on a grid with 5% margin."""
    us = np.linspace(min(u0, u1), max(u0, u1), 41)
    ths = np.linspace(0.0, TWO_PI, 73)
    U, TH = np.meshgrid(us, ths)
    fs = np.abs(f_at_s(U, TH)) * abs(ds_du)
    return float(1.05 * fs.max() * abs(u1 - u0)) + 1e-9


def _run(prob: _Problem, tol: Tolerances, psis: np.ndarray, p: Equilibrium):
    """Shoot from a small circle around ``(u0, theta_p)`` at angles ``psis``."""
    r = tol.start_radius
    u = prob.u0 + r * np.cos(psis)
    th = p.theta + r * np.sin(psis)
    T = prob.T
    for _ in range(3):
        uf, thf, e = _integrate(prob.field, u, th, T, tol, prob.sink_gap(tol))
        labels = prob.classify(uf, thf, tol)
        if all(l[0] is not None and l[0][2] == 0 for l in labels):
            return labels, e
        T *= 2.0
    return labels, e


def _first_branch(prob: _Problem, p: Equilibrium, tol: Tolerances, src_total: int):
    """Source with a one-dimensional unstable manifold along the u-direction."""
    psi = 0.0 if prob.side > 0 else math.pi
    labels, e = _run(prob, tol, np.array([psi]), p)
    lab, Theta = labels[0]
    if lab is None:
        raise ResolutionExhausted(f"branch from {p.base_label}/{p.label} did not converge")
    q = next(q for q in prob.target if q.label == lab[0])
    return [(q, prob.side, psi, float(e[0]))], (q.index_total if hasattr(q, "index_total") else None)


def _bisect(prob: _Problem, p: Equilibrium, tol: Tolerances, a: float, b: float, la, lb):
    """Refine a basin boundary in ``[a, b]`` until it brackets one saddle."""
    K = 31
    while b - a > tol.shoot_tol:
        psis = np.linspace(a, b, K + 2)[1:-1]
        labs, _ = _run(prob, tol, psis, p)
        seq = [(a, la)] + list(zip(psis, labs)) + [(b, lb)]
        for (x0, l0), (x1, l1) in zip(seq[:-1], seq[1:]):
            if l0[0] != l1[0]:
                a, la, b, lb = x0, l0, x1, l1
                break
        if b - a <= 4 * np.finfo(float).eps:
            break
    return a, b, la, lb


def _saddles_between(prob: _Problem, Ta: float, Tb: float):
    lo, hi = min(Ta, Tb), max(Ta, Tb)
    out = []
    for q in prob.target:
        if q.fiber_index != 1:
            continue
        k0 = math.ceil((lo - q.theta) / TWO_PI)
        k1 = math.floor((hi - q.theta) / TWO_PI)
        out.extend((q, k) for k in range(k0, k1 + 1) if lo < q.theta + TWO_PI * k < hi)
    return out


def _connecting_energy(prob: _Problem, p: Equilibrium, q: Equilibrium, k: int, psi: float,
                       tol: Tolerances) -> float:
    r = tol.start_radius
    y0 = np.array([prob.u0 + r * math.cos(psi), p.theta + r * math.sin(psi), 0.0])
    target = (q.theta + TWO_PI * k) * prob.chart

    def near(t, y):
        return max(abs(y[0] - prob.u1), abs(y[1] - target)) - tol.lin_tol * 10

    near.terminal = True
    sol = solve_ivp(prob.field.rhs, (0.0, 4 * prob.T), y0, method="RK45", rtol=tol.rtol,
                    atol=tol.atol, events=near)
    if sol.t_events[0].size:
        return float(sol.y_events[0][0][2])
    # a strongly repelling saddle peels the shot orbit off before it reaches q;
    # follow the one-dimensional stable manifold of q backwards instead
    return _backward_energy(prob, p, q, target, tol)


def _backward_energy(prob: _Problem, p: Equilibrium, q: Equilibrium, target: float,
                     tol: Tolerances) -> float:
    h = 1e-6
    z = np.array([prob.u1, target, 0.0])
    J = np.empty((2, 2))
    for j in range(2):
        dz = np.zeros(3)
        dz[j] = h
        J[:, j] = (prob.field.rhs(0.0, z + dz)[:2] - prob.field.rhs(0.0, z - dz)[:2]) / (2 * h)
    w, V = np.linalg.eig(J)
    stable = [i for i in range(2) if abs(w[i].imag) < 1e-12 and w[i].real < 0]
    if len(stable) != 1:
        raise ResolutionExhausted(f"{q.base_label}/{q.label} has no one-dimensional stable manifold")
    v = V[:, stable[0]].real
    if v[0] * (prob.u0 - prob.u1) < 0:
        v = -v
    y0 = z + np.array([v[0], v[1], 0.0]) * tol.start_radius

    def back(t, y):
        out = -prob.field.rhs(t, y)
        out[2] = -out[2]
        return out

    def near(t, y):
        d = abs((y[1] - p.theta + math.pi) % TWO_PI - math.pi)
        return max(abs(y[0] - prob.u0), d) - tol.lin_tol * 10

    near.terminal = True
    sol = solve_ivp(back, (0.0, 4 * prob.T), y0, method="RK45", rtol=tol.rtol, atol=tol.atol,
                    events=near)
    if not sol.t_events[0].size:
        raise ResolutionExhausted(
            f"stable manifold of {q.base_label}/{q.label} does not reach {p.base_label}/{p.label}")
    return float(sol.y_events[0][0][2])


def _count(prob: _Problem, p: Equilibrium, tol: Tolerances, rng: np.random.Generator,
           irregular: list) -> list[FlowLineRecord]:
    """Flow lines from ``p`` (over u0) to target points of one lower total index."""
    recs = []
    fp = float(prob.f_at(prob.u0, p.theta))

    def rec(q, sign, psi, energy, k):
        fq = float(prob.f_at(prob.u1, q.theta))
        bound = fp - fq + prob.C
        if energy > bound + 1e-6:
            log.warning("discarding %s->%s: energy %.6g exceeds bound %.6g", p.label, q.label,
                        energy, bound)
            return
        recs.append(FlowLineRecord((p.base_label, p.label), (q.base_label, q.label), sign, psi,
                                   energy, bound, prob.C, prob.crossings, prob.edge))

    if p.fiber_index == 0:
        psi = 0.0 if prob.side > 0 else math.pi
        labels, e = _run(prob, tol, np.array([psi]), p)
        lab, Theta = labels[0]
        if lab is None:
            raise ResolutionExhausted(f"branch from {p.base_label}/{p.label} did not converge "
                                      f"(parameter {psi})")
        q = next(q for q in prob.target if q.label == lab[0])
        if q.fiber_index != 0:
            irregular.append(f"{p.base_label}/{p.label} -> {q.base_label}/{q.label}: "
                             f"connection between points of equal index")
            return recs
        rec(q, prob.side, psi, float(e[0]), lab[1])
        return recs
    # two-dimensional unstable manifold: shoot over the half-circle facing u1
    lo = -math.pi / 2 if prob.side > 0 else math.pi / 2
    N = tol.grid
    jitter = rng.uniform(-0.25, 0.25, N)
    psis = lo + (np.arange(N) + 0.5 + jitter) * (math.pi / N)
    # boundary layers next to the fiber directions (degenerate linearizations)
    layer = (math.pi / N) * 0.5 * 10.0 ** (-0.5 * np.arange(1, 13))
    psis = np.unique(np.concatenate([psis, lo + layer, lo + math.pi - layer]))
    labels, _ = _run(prob, tol, psis, p)
    for (a, la), (b, lb) in zip(zip(psis[:-1], labels[:-1]), zip(psis[1:], labels[1:])):
        if la[0] is None or lb[0] is None:
            raise ResolutionExhausted(f"unresolved shooting interval [{a:.6g}, {b:.6g}] "
                                      f"from {p.base_label}/{p.label}")
        if la[0][2] != 0 or lb[0][2] != 0:
            irregular.append(f"{p.base_label}/{p.label}: trajectory ends at a non-sink")
            continue
        if la[0] == lb[0]:
            continue
        a2, b2, la2, lb2 = _bisect(prob, p, tol, a, b, la, lb)
        sad = _saddles_between(prob, la2[1], lb2[1])
        if len(sad) != 1:
            raise ResolutionExhausted(f"parameter interval [{a2:.12g}, {b2:.12g}] from "
                                      f"{p.base_label}/{p.label} brackets {len(sad)} saddles")
        q, k = sad[0]
        sign = 1 if lb2[1] > la2[1] else -1
        psi = 0.5 * (a2 + b2)
        rec(q, sign, psi, _connecting_energy(prob, p, q, k, psi, tol), k)
    return recs


def fiber_flow_lines(Z: ChartedBundle, s: float, label: str, tol: Tolerances = Tolerances()):
    """Signed flow lines of ``xi`` inside one fiber: ``[(p, q, sign, energy)]``."""
    pts = _fiber_points(Z.f, s, label, 0, tol, None)
    field_ = _bundle_field(Z, s_fixed=s)
    out = []
    for p in pts:
        if p.fiber_index != 1:
            continue
        th0 = np.array([p.theta + tol.start_radius, p.theta - tol.start_radius])
        uf, thf, e = _integrate(field_, np.zeros(2), th0, 80.0, tol)
        for tt, sign, en in zip(thf, (1, -1), e):
            q = min((q for q in pts if q.fiber_index == 0),
                    key=lambda q: abs((tt - q.theta + math.pi) % TWO_PI - math.pi))
            if abs((tt - q.theta + math.pi) % TWO_PI - math.pi) > 10 * tol.lin_tol:
                raise ResolutionExhausted(f"fiber flow from {label}/{p.label} did not converge")
            out.append((p.label, q.label, sign, float(en)))
    return out


@dataclass
class CountResult:
    """Integer outputs of one counting run plus the numerical provenance."""

    bundle: ChartedBundle
    seed: int
    tolerances: Tolerances
    equilibria: list[Equilibrium]
    base_flows: list[tuple[str, str, int]]
    fiber_flows: dict[str, list[tuple[str, str, int]]]
    records: list[FlowLineRecord]
    irregular: list[str] = field(default_factory=list)

    def integer_data(self) -> dict:
        """Everything the algebra consumes, and nothing numerical."""
        blocks: dict = {}
        for r in self.records:
            key = (r.source[0], r.target[0], r.edge)
            blocks.setdefault(key, {})
            k2 = (r.source[1], r.target[1])
            blocks[key][k2] = blocks[key].get(k2, 0) + r.sign
        return {
            "base_flows": [list(f) for f in self.base_flows],
            "fiber_flows": {x: [list(f) for f in fl] for x, fl in sorted(self.fiber_flows.items())},
            "blocks": {f"{a}->{b}:{e}": sorted([list(k) + [v] for k, v in d.items() if v])
                       for (a, b, e), d in sorted(blocks.items())},
        }

    def edge_matrix(self, edge: str) -> IntMatrix:
        """Continuation along one base edge (flow-line signs divided by the edge sign)."""
        fib = _fibers(self)
        x = next(r for r in self.records if r.edge == edge)
        src, dst = fib[x.source[0]], fib[x.target[0]]
        sp, dp = src.full_matrix_index(), dst.full_matrix_index()
        esign = dict((e, s) for e, s in _edge_signs(self))[edge]
        M = [[0] * len(sp) for _ in dp]
        for r in self.records:
            if r.edge == edge:
                M[dp[r.target[1]]][sp[r.source[1]]] += r.sign * esign
        return IntMatrix.from_rows(M, cols=len(sp))

    def to_json(self) -> dict:
        return {"bundle": self.bundle.to_json(), "seed": self.seed,
                "tolerances": self.tolerances.to_json(),
                "records": [r.to_json() for r in self.records],
                "irregular": self.irregular, "integer_data": self.integer_data()}


def _edge_signs(res: CountResult):
    if res.bundle.base == "circle":
        return [("a", 1), ("b", -1)]
    if res.bundle.base == "interval":
        return [("r", 1), ("l", -1)]
    return []


def _problems(Z: ChartedBundle, tol: Tolerances) -> list[tuple[_Problem, str]]:
    eq = find_equilibria(Z, tol)
    by_base: dict[str, list[Equilibrium]] = {}
    for e in eq:
        by_base.setdefault(e.base_label, []).append(e)
    field_ = _bundle_field(Z)

    def f_at(u, th):
        return Z.f.values(u, th)[0]

    def fs(u, th):
        return Z.f.values(u, th)[3]

    probs = []
    if Z.base == "circle":
        src = by_base["x1"]
        for edge, side, u1, chart, cross in (("a", 1, 0.5, 1, 0), ("b", -1, -0.5, Z.deck, 1)):
            C = _energy_bound_C(fs, 0.0, u1, 1.0)
            probs.append((_Problem(field_, 0.0, u1, src, by_base["x0"], chart, cross, f_at, C, edge,
                                   60.0, side), "x1"))
    elif Z.base == "interval":
        for edge, side, u1, tgt in (("r", 1, 1.0, "r"), ("l", -1, -1.0, "l")):
            C = _energy_bound_C(fs, 0.0, u1, 1.0)
            probs.append((_Problem(field_, 0.0, u1, by_base["c"], by_base[tgt], 1, 0, f_at, C,
                                   edge, 60.0, side), "c"))
    return probs


def count_flow_lines(Z: ChartedBundle, p: Equilibrium, q: Equilibrium | None = None, seed: int = 0,
                     tol: Tolerances = Tolerances()) -> list[FlowLineRecord]:
    """Flow lines of ``xi + horizontal lift of W`` leaving ``p`` (optionally ending at ``q``)."""
    rng = np.random.default_rng(seed)
    out = []
    irregular: list[str] = []
    for prob, x in _problems(Z, tol):
        if x == p.base_label:
            out.extend(_count(prob, p, tol, rng, irregular))
    if q is not None:
        out = [r for r in out if r.target == (q.base_label, q.label)]
    return out


def _base_flows(Z: ChartedBundle, tol: Tolerances) -> list[tuple[str, str, int]]:
    pts = Z.base_points()
    if len(pts) == 1:
        return []
    src = pts[0]
    u0 = np.array([src[1] + tol.start_radius, src[1] - tol.start_radius])
    uf, _, _ = _integrate(_Field(Z.base_field, lambda u, th: (0 * u, 0 * u)), u0, np.zeros(2),
                          30.0, tol)
    out = []
    for uu, sign in zip(uf, (1, -1)):
        for lab, s, i in pts[1:]:
            n = round(uu - s) if Z.base == "circle" else 0
            if abs(uu - s - n) < 10 * tol.lin_tol:
                out.append((src[0], lab, sign))
                break
        else:
            raise ResolutionExhausted(f"base flow from {src[0]} did not converge")
    return out


def count_bundle(Z: ChartedBundle, seed: int = 0, tol: Tolerances = Tolerances()) -> CountResult:
    """All counts needed for the family descriptor of ``Z``."""
    rng = np.random.default_rng(seed)
    eq = find_equilibria(Z, tol)
    fiber_flows = {}
    for lab, s, _ in Z.base_points():
        fiber_flows[lab] = [(p, q, sg) for p, q, sg, _ in fiber_flow_lines(Z, s, lab, tol)]
    records = []
    irregular: list[str] = []
    for prob, x in _problems(Z, tol):
        for p in prob.source:
            records.extend(_count(prob, p, tol, rng, irregular))
    return CountResult(Z, seed, tol, eq, _base_flows(Z, tol), fiber_flows, records, irregular)


def _fibers(res: CountResult) -> dict[str, MorseData]:
    out = {}
    for lab, _, _ in res.bundle.base_points():
        pts = [(e.label, e.fiber_index) for e in res.equilibria if e.base_label == lab]
        out[lab] = MorseData.build(pts, res.fiber_flows[lab])
    return out


def emit_descriptor(res: CountResult | ChartedBundle, seed: int = 0,
                    tol: Tolerances = Tolerances()) -> FamilyDescriptor:
    """Exact family descriptor from counted data."""
    if isinstance(res, ChartedBundle):
        res = count_bundle(res, seed, tol)
    Z = res.bundle
    base_pts = Z.base_points()
    base = MorseData.build([(lab, i) for lab, _, i in base_pts], res.base_flows)
    fibers = _fibers(res)
    agg: dict = {}
    for r in res.records:
        agg.setdefault((r.source[0], r.target[0]), []).append(r)
    blocks = []
    for (x, y), recs in agg.items():
        sp, dp = fibers[x].full_matrix_index(), fibers[y].full_matrix_index()
        M = [[0] * len(sp) for _ in dp]
        for r in recs:
            M[dp[r.target[1]]][sp[r.source[1]]] += r.sign
        blocks.append(Block(1, x, y, IntMatrix.from_rows(M, cols=len(sp))))
    dim_base = {"point": 0, "interval": 1, "circle": 1}[Z.base]
    return FamilyDescriptor(base, dim_base, 1, fibers, blocks, Z.deck == 1, Z.name)


# ---------------------------------------------------------------------------
# continuation along paths of fibers


def _path_count(f: FiberFunction, s_of_t, rho_of_t, src: list[Equilibrium],
                tgt: list[Equilibrium], chart: int, tol: Tolerances, rng, edge: str,
                irregular: list) -> list[FlowLineRecord]:
    field_ = _path_field(f, s_of_t, rho_of_t)

    def f_at(t, th):
        return f.values(s_of_t(t), th)[0]

    s0, s1 = float(s_of_t(0.0)), float(s_of_t(1.0))

    def fs(t, th):
        return f.values(s_of_t(t), th)[3]

    C = _energy_bound_C(fs, 0.0, 1.0, s1 - s0)
    prob = _Problem(field_, 0.0, 1.0, src, tgt, chart, 0 if chart == 1 else 1, f_at, C, edge, 80.0, 1)
    recs = []
    for p in src:
        for r in _count(prob, p, tol, rng, irregular):
            recs.append(r)
    return recs


def _matrix(recs, src: MorseData, dst: MorseData) -> IntMatrix:
    sp, dp = src.full_matrix_index(), dst.full_matrix_index()
    M = [[0] * len(sp) for _ in dp]
    for r in recs:
        M[dp[r.target[1]]][sp[r.source[1]]] += r.sign
    return IntMatrix.from_rows(M, cols=len(sp))


def metric_continuation(Z0: ChartedBundle, Z1: ChartedBundle, seed: int = 0,
                        tol: Tolerances = Tolerances()):
    """Continuation from the metric of ``Z0`` to that of ``Z1`` (same function).

    Over each base critical point ``x`` the field ``beta(t) d/dt + xi_t`` with
    ``rho_t = (1 - t) rho_0 + t rho_1`` is counted from ``t = 0`` to ``t = 1``.
    Returns ``(ContinuationBlocks, records, irregular)``.
    """
    if (Z0.base, Z0.f, Z0.deck) != (Z1.base, Z1.f, Z1.deck):
        raise ContractViolation("metric continuation needs the same base, function and charts")
    rng = np.random.default_rng(seed)
    D0, D1 = emit_descriptor(Z0, seed, tol), emit_descriptor(Z1, seed, tol)
    blocks, records, irregular = [], [], []
    for lab, s, _ in Z0.base_points():
        pts = _fiber_points(Z0.f, s, lab, 0, tol, None)

        def rho_t(t, ss, th):
            return (1.0 - t) * Z0.metric.rho(ss, th) + t * Z1.metric.rho(ss, th)

        recs = _path_count(Z0.f, lambda t, s=s: np.full_like(np.asarray(t, float), s), rho_t,
                           pts, pts, 1, tol, rng, lab, irregular)
        records.extend(recs)
        blocks.append(Block(0, lab, lab, _matrix(recs, D0.fibers[lab], D1.fibers[lab])))
    return ContinuationBlocks(D0, D1, blocks), records, irregular


def emit_cubical(Z: ChartedBundle, seed: int = 0, tol: Tolerances = Tolerances()) -> CubicalFamily:
    """Cubical dataset over the 2-vertex/2-edge cubulation of a circle base.

    Continuations run from each edge center to each of its two faces; the
    face ``v0`` of ``e1`` is reached across the seam.
    """
    if Z.base != "circle":
        raise ContractViolation("cubical emission needs a circle base")
    rng = np.random.default_rng(seed)
    K = circle_cubulation(2)
    centers = {"v0": 0.0, "v1": 0.5, "e0": 0.25, "e1": 0.75}
    fibers, pts = {}, {}
    for lab, s in centers.items():
        pts[lab] = _fiber_points(Z.f, s, lab, 0, tol, None)
        fl = [(p, q, sg) for p, q, sg, _ in fiber_flow_lines(Z, s, lab, tol)]
        fibers[lab] = MorseData.build([(e.label, e.fiber_index) for e in pts[lab]], fl)
    conts = {}
    irregular: list[str] = []
    faces = {("e0", "v0"): 0.0, ("e0", "v1"): 0.5, ("e1", "v1"): 0.5, ("e1", "v0"): 1.0}
    for (e, v), s_end in faces.items():
        s_start = centers[e]

        def s_of_t(t, a=s_start, b=s_end):
            return a + np.asarray(t, float) * (b - a)

        def rho_t(t, ss, th):
            return Z.metric.rho(ss, th)

        chart = Z.deck if s_end == 1.0 else 1
        recs = _path_count(Z.f, s_of_t, rho_t, pts[e], pts[v], chart, tol, rng, f"{e}->{v}",
                           irregular)
        conts[(e, v)] = _matrix(recs, fibers[e], fibers[v])
    if irregular:
        raise ResolutionExhausted("; ".join(irregular))
    return CubicalFamily(K, fibers, conts, {}, {"metric": str(Z.metric.to_json())}, Z.name)


# ---------------------------------------------------------------------------
# stability


@dataclass
class StabilityReport:
    stable: bool
    trials: int
    eps: float
    differences: list[dict]
    irregular: list[str]

    def to_json(self) -> dict:
        return {"stable": self.stable, "trials": self.trials, "eps": self.eps,
                "differences": self.differences, "irregular": self.irregular}


def regularity_check(Z: ChartedBundle, counts: CountResult | None = None, eps: float = 1e-3,
                     trials: int = 5, seed: int = 0, tol: Tolerances = Tolerances()) -> StabilityReport:
    """Recount after random conformal perturbations of size ``eps``.

    Stable iff every recount gives the same integer data and no trajectory
    connects points whose indices do not drop.
    """
    counts = counts or count_bundle(Z, seed, tol)
    ref = counts.integer_data()
    irregular = list(counts.irregular)
    diffs = []
    if eps == 0:
        return StabilityReport(not irregular, trials, eps, diffs, irregular)
    rng = np.random.default_rng(seed + 1)
    for k in range(trials):
        pert = Metric.random(rng, eps, Z.deck if Z.base == "circle" else None)
        Zk = replace(Z, metric=Metric(Z.metric.terms + pert.terms))
        res = count_bundle(Zk, seed, tol)
        irregular.extend(f"trial {k}: {m}" for m in res.irregular)
        if res.integer_data() != ref:
            diffs.append({"trial": k, "metric": pert.to_json(), "integer_data": res.integer_data()})
    return StabilityReport(not diffs and not irregular, trials, eps, diffs, irregular)


def tolerance_check(Z: ChartedBundle, seed: int = 0, tol: Tolerances = Tolerances(),
                    factor: float = 10.0) -> bool:
    """Counts agree after tightening every integration tolerance by ``factor``."""
    a = count_bundle(Z, seed, tol).integer_data()
    b = count_bundle(Z, seed, tol.tightened(factor)).integer_data()
    return a == b


# ---------------------------------------------------------------------------
# named bundles

BUNDLES: dict[str, Callable[[], ChartedBundle]] = {
    "torus": lambda: ChartedBundle("torus", "circle", FiberFunction("cos"), Metric(), 1),
    "klein": lambda: ChartedBundle("klein", "circle", FiberFunction("cos"), Metric(), -1),
    "rotating_torus": lambda: ChartedBundle("rotating_torus", "circle", FiberFunction("rotating"),
                                            Metric(), 1),
    "point": lambda: ChartedBundle("point", "point", FiberFunction("cos"), Metric(), 1),
    "tuned": lambda: ChartedBundle("tuned", "interval", FiberFunction("tuned"), Metric(), 1),
}

# bundles supplied combinatorially (fiber dimension or base beyond the numerics)
COMBINATORIAL: dict[str, Callable[[], FamilyDescriptor]] = {
    "s2_combinatorial": catalog.s1_x_s2,
    "sphere_base_toy": catalog.sphere_base_toy,
}


def bundle(name: str, metric_seed: int | None = None, eps: float = 0.0) -> ChartedBundle:
    try:
        Z = BUNDLES[name]()
    except KeyError:
        raise KeyError(f"unknown bundle {name!r}; known: {sorted(BUNDLES) + sorted(COMBINATORIAL)}") \
            from None
    if metric_seed is not None and eps:
        rng = np.random.default_rng(metric_seed)
        Z = replace(Z, metric=Metric.random(rng, eps, Z.deck if Z.base == "circle" else None))
    return Z


def bundle_from_recipe(recipe: Mapping) -> tuple[ChartedBundle, Tolerances]:
    """A named bundle with an optional parameter block.

    Keys: ``bundle`` (built-in name), ``fiber_function`` (``{"expr", "params"}``),
    ``metric_seed`` with ``eps`` (default 0.1), and ``tolerances``
    (any of the :class:`Tolerances` fields).
    """
    name = recipe.get("bundle")
    if name not in BUNDLES:
        raise ContractViolation(f"recipe names unknown bundle {name!r}; known: {sorted(BUNDLES)}")
    seed = recipe.get("metric_seed")
    Z = bundle(name, seed, float(recipe.get("eps", 0.1)) if seed is not None else 0.0)
    if "fiber_function" in recipe:
        Z = replace(Z, f=FiberFunction.from_json(recipe["fiber_function"]))
    known = set(Tolerances().to_json())
    extra = set(recipe.get("tolerances", {})) - known
    if extra:
        raise ContractViolation(f"unknown tolerance fields {sorted(extra)}")
    tol = replace(Tolerances(), **{k: type(getattr(Tolerances(), k))(v)
                                   for k, v in recipe.get("tolerances", {}).items()})
    return Z, tol


def reverse_flow_check(Z: ChartedBundle, seed: int = 0, tol: Tolerances = Tolerances()):
    """Counts for ``-f`` against the algebraic dual of the counts for ``f``.

    Needs compatibly oriented fibers.  Compares page groups and ``d_r`` images
    of the dual descriptor with those of the descriptor counted from ``-f``.
    """
    from .family import assemble, dualize
    from .spectral import SpectralSequence, same_pages

    D = emit_descriptor(Z, seed, tol)
    Dn = emit_descriptor(replace(Z, f=Z.f.negated()), seed, tol)
    return same_pages(SpectralSequence(assemble(dualize(D))), SpectralSequence(assemble(Dn)),
                      r_from=1)

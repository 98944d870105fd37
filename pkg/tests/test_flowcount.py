import json
from pathlib import Path

import numpy as np
import pytest

from morsefam import catalog
from morsefam.cubical import compare_with_family
from morsefam.exact_algebra import IntMatrix
from morsefam.family import FamilyDescriptor, continuation, e2_crosscheck
from morsefam.flowcount import (
    FiberFunction,
    Inadmissible,
    Metric,
    Tolerances,
    bundle,
    bundle_from_recipe,
    count_bundle,
    emit_descriptor,
    find_equilibria,
    fiber_flow_lines,
    regularity_check,
    reverse_flow_check,
)
from morsefam.exact_algebra import ContractViolation, FgAbGroup
from morsefam.family import DualityRefused, assemble, family_homology

GOLDEN = Path(__file__).parent / "data" / "klein_golden.json"


def golden_klein() -> FamilyDescriptor:
    """Hand-derived descriptor for f = cos(theta) over the height function on S^1.

    Fibers: maximum p1 at theta = 0, minimum p0 at theta = pi, two fiber
    flow lines of opposite sign.  Base flow line a (sign +1) transports by the
    identity; b (sign -1) crosses the seam where theta -> -theta reverses the
    unstable direction of p1 and fixes p0.  delta_1 = I - diag(-1, 1).
    """
    return FamilyDescriptor.from_json(json.loads(GOLDEN.read_text())["data"])


def test_metric_is_positive_and_deck_invariant():
    rng = np.random.default_rng(5)
    m = Metric.random(rng, 0.2, -1)
    s = rng.uniform(0, 1, 50)
    th = rng.uniform(0, 2 * np.pi, 50)
    assert np.all(m.rho(s, th) > 0)
    assert m.lower_bound() > 0
    # the deck transformation (s, theta) -> (s + 1, -theta) preserves rho
    assert np.allclose(m.rho(s + 1, -th), m.rho(s, th))


def test_fiber_function_derivatives():
    f = FiberFunction("rotating")
    s, th, h = 0.3, 1.1, 1e-6
    v, vt, vtt, vs = f.values(s, th)
    assert vt == pytest.approx((f.values(s, th + h)[0] - f.values(s, th - h)[0]) / (2 * h), abs=1e-6)
    assert vs == pytest.approx((f.values(s + h, th)[0] - f.values(s - h, th)[0]) / (2 * h), abs=1e-5)
    assert vtt == pytest.approx((f.values(s, th + h)[1] - f.values(s, th - h)[1]) / (2 * h), abs=1e-5)


def test_equilibria_of_klein():
    eq = find_equilibria(bundle("klein"))
    assert sorted((e.base_label, e.label, e.index) for e in eq) == [
        ("x0", "p0", 0), ("x0", "p1", 1), ("x1", "p0", 1), ("x1", "p1", 2)]


def test_degenerate_fiber_is_inadmissible():
    Z = bundle("klein")
    # tol.root_tol above |f_thetatheta| = 1 makes every fiber critical point degenerate
    with pytest.raises(Inadmissible):
        find_equilibria(Z, Tolerances(root_tol=2.0))


def test_fiber_flow_lines_cancel():
    fl = fiber_flow_lines(bundle("klein"), 0.0, "x1")
    assert sorted(sg for _, _, sg, _ in fl) == [-1, 1]


def test_klein_counts_match_golden(klein_counts):
    D = emit_descriptor(klein_counts)
    assert D.to_json() == golden_klein().to_json()
    assert D.to_json() == catalog.klein().to_json()


def test_klein_edge_matrices(klein_counts):
    assert klein_counts.edge_matrix("a") == IntMatrix.identity(2)
    assert klein_counts.edge_matrix("b") == IntMatrix.from_rows([[-1, 0], [0, 1]])


def test_energy_bound_on_every_record(klein_counts):
    assert klein_counts.records
    for r in klein_counts.records:
        assert 0 <= r.energy <= r.energy_bound


@pytest.mark.parametrize("name", ["torus", "rotating_torus"])
def test_trivial_monodromy_bundles(name):
    D = emit_descriptor(bundle(name))
    assert all(b.matrix.is_zero() for b in D.blocks)
    assert e2_crosscheck(D)


def test_counts_are_seed_independent():
    a = count_bundle(bundle("torus"), seed=7).integer_data()
    b = count_bundle(bundle("torus"), seed=8).integer_data()
    assert a == b


def test_regularity_report(klein_regularity):
    assert klein_regularity.stable
    assert klein_regularity.trials == 5 and not klein_regularity.differences


def test_tuned_example_is_flagged():
    Z = bundle("tuned")
    res = count_bundle(Z)
    assert any("equal index" in m for m in res.irregular)
    assert not regularity_check(Z, res, eps=0).stable


def test_metric_continuation_is_identity(klein_continuation):
    phi, records, irregular = klein_continuation
    assert not irregular
    assert all(b.matrix == IntMatrix.identity(2) for b in phi.blocks)
    assert continuation(phi)


def test_emitted_cubical_matches_family(klein_cubical_emitted):
    assert klein_cubical_emitted.phi("e1", "v0") == IntMatrix.from_rows([[-1, 0], [0, 1]])
    assert compare_with_family(klein_cubical_emitted, catalog.klein())


def test_fiber_function_json_and_negation():
    f = FiberFunction("cos", (2.0,))
    assert FiberFunction.from_json(f.to_json()) == f
    g = f.negated()
    assert "scale" in g.to_json() and FiberFunction.from_json(g.to_json()) == g
    v, vt, vtt, vs = f.values(0.2, 0.7)
    w = g.values(0.2, 0.7)
    assert np.allclose(w, (-v, -vt, -vtt, -vs))


def test_recipe_cos2_on_klein():
    # cos(2 theta): maxima at 0 and pi are fixed by theta -> -theta, the minima are swapped
    Z, tol = bundle_from_recipe({"bundle": "klein", "fiber_function": {"expr": "cos", "params": [2]}})
    D = emit_descriptor(Z, 0, tol)
    assert sum(len(F.critical_points) for F in D.fibers.values()) == 8
    assert e2_crosscheck(D)
    H = family_homology(assemble(D)).as_tuple(2)
    assert H == (FgAbGroup.from_orders([0]), FgAbGroup.from_orders([0, 2]), FgAbGroup())


def test_recipe_rejects_unknown_fields():
    with pytest.raises(ContractViolation, match="tolerance"):
        bundle_from_recipe({"bundle": "klein", "tolerances": {"shoot": 1e-9}})
    with pytest.raises(ContractViolation, match="unknown bundle"):
        bundle_from_recipe({"bundle": "moebius"})


def test_recipe_tolerances_are_applied():
    _, tol = bundle_from_recipe({"bundle": "torus", "tolerances": {"shoot_tol": 1e-11, "grid": 30}})
    assert tol.shoot_tol == 1e-11 and tol.grid == 30 and isinstance(tol.grid, int)


def test_reverse_flow_matches_dual():
    assert reverse_flow_check(bundle("torus"))
    with pytest.raises(DualityRefused):
        reverse_flow_check(bundle("klein"))

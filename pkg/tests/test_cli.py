import json
from pathlib import Path

import pytest

from morsefam import catalog
from morsefam.cli import EXIT, main
from morsefam.exact_algebra import IntMatrix
from morsefam.family import Block, FamilyDescriptor
from morsefam.morse import MorseData, circle_base
from morsefam.schemas import document, dumps

GOLDEN = Path(__file__).parent / "data" / "klein_golden.json"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def entry(page, i, j):
    return next(e for e in page["entries"] if (e["i"], e["j"]) == (i, j))


def test_compute_klein_pages(capsys, tmp_path):
    out = tmp_path / "k.json"
    assert main(["compute", "--example", "klein", "--pages", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["schema"] == "morsefam/1" and doc["config"]["seed"] == 0
    E2 = doc["data"]["pages"][0]
    assert E2["r"] == 2
    assert entry(E2, 0, 1) == {"i": 0, "j": 1, "free_rank": 0, "torsion": [2]}
    homology = {h["degree"]: (h["free_rank"], h["torsion"]) for h in doc["data"]["homology"]}
    assert homology[0] == (1, []) and homology[1] == (1, [2])


def test_compute_torus_trivial_collapses(capsys):
    doc = run_json(capsys, "compute", "--example", "torus-trivial")
    assert doc["data"]["collapse_at_E2"] is True
    ranks = {h["degree"]: h["free_rank"] for h in doc["data"]["homology"]}
    assert ranks == {0: 1, 1: 2, 2: 1}


def test_compute_csv(capsys):
    code, out, _ = run(capsys, "compute", "--example", "klein", "--format", "csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "page,i,j,free_rank,torsion"
    assert "2,0,1,0,2" in lines and "inf,0,1,0,2" in lines


def test_compute_bad_input_reports_schema_path(capsys, tmp_path):
    doc = document("family_descriptor", catalog.klein().to_json())
    doc["data"]["fibers"]["x0"]["critical_points"][0]["index"] = "one"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    code, _, err = run(capsys, "compute", "--input", str(bad))
    assert code == EXIT["schema"] == 2
    assert "$.data.fibers.x0.critical_points[0].index" in err


def test_compute_malformed_json(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("[")
    code, _, err = run(capsys, "compute", "--input", str(bad))
    assert code == 2 and "not valid JSON" in err


def test_compute_delta_squared_exit(capsys, tmp_path):
    G = MorseData.build([("p2", 2), ("q1", 1), ("p0", 0)], [("p2", "q1", 1)])
    D = FamilyDescriptor(circle_base(), 1, 2, {"x1": G, "x0": G},
                         [Block(1, "x1", "x0", IntMatrix.from_rows([[0, 0, 0], [0, 1, 0], [0, 0, 0]]))])
    path = tmp_path / "d2.json"
    path.write_text(dumps(document("family_descriptor", D.to_json())))
    code, _, err = run(capsys, "compute", "--input", str(path))
    assert code == EXIT["d2"] == 3 and "delta^2" in err


def test_compute_novikov_input(capsys, tmp_path):
    from morsefam.novikov import circle_one_form
    path = tmp_path / "n.json"
    path.write_text(dumps(document("novikov_complex", circle_one_form(1).to_json())))
    doc = run_json(capsys, "compute", "--input", str(path))
    assert all(h["rank"] == 0 for h in doc["data"]["novikov_homology"])


@pytest.mark.parametrize("argv", [
    ["check", "leray-serre", "--example", "klein"],
    ["check", "novikov-vanishing", "--omega", "1"],
    ["check", "novikov-units"],
    ["check", "e2", "--example", "klein"],
    ["check", "triviality", "--example", "torus-trivial"],
    ["check", "alternate", "--example", "klein"],
    ["check", "mayer-vietoris", "--example", "klein"],
    ["check", "monodromy", "--phi", "[[0, 1], [1, 0]]"],
    ["check", "continuation", "--example", "klein"],
    ["check", "poincare", "--example", "torus"],
])
def test_checks_pass(capsys, argv):
    doc = run_json(capsys, *argv)
    assert doc["data"]["ok"] is True


def test_poincare_refuses_klein(capsys):
    code, _, err = run(capsys, "check", "poincare", "--example", "klein")
    assert code == EXIT["unsupported"] == 5
    assert "orient" in err


def test_exact_form_check_and_non_product_refusal(capsys):
    code, out, _ = run(capsys, "check", "novikov-vanishing", "--omega", "0")
    assert code == 0 and json.loads(out)["data"]["ok"]
    code, _, _ = run(capsys, "check", "triviality", "--example", "klein")
    assert code == EXIT["unsupported"]


def test_examples_listing(capsys):
    doc = run_json(capsys, "examples")
    assert "klein" in doc["data"]["descriptors"]
    assert "s2_combinatorial" in doc["data"]["combinatorial_bundles"]
    assert "novikov-vanishing" in doc["data"]["checks"]


def test_seed_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("MORSEFAM_SEED", "11")
    assert run_json(capsys, "examples")["config"]["seed"] == 11


def test_flowcount_klein_emits_golden(capsys, tmp_path):
    d = tmp_path / "d.json"
    report = run_json(capsys, "flowcount", "--bundle", "klein", "--trials", "0", "--emit", str(d))
    golden = json.loads(GOLDEN.read_text())
    emitted = json.loads(d.read_text())
    assert emitted["data"] == golden["data"]
    assert emitted["config"]["seed"] == 0 and "tolerances" in emitted["config"]
    tight = run_json(capsys, "flowcount", "--bundle", "klein", "--trials", "0", "--shoot-tol", "1e-12")
    assert tight["data"]["emitted"] == report["data"]["emitted"]
    assert tight["config"]["tolerances"]["shoot_tol"] == 1e-12


def _integer_part(report):
    recs = report["data"]["counts"]["records"]
    return report["data"]["emitted"], [(r["source"], r["target"], r["sign"], r["edge"]) for r in recs]


def test_flowcount_seed_independence_and_reproducibility(capsys):
    a1 = run(capsys, "flowcount", "--bundle", "torus", "--trials", "0", "--seed", "7")
    a2 = run(capsys, "flowcount", "--bundle", "torus", "--trials", "0", "--seed", "7")
    b = run(capsys, "flowcount", "--bundle", "torus", "--trials", "0", "--seed", "8")
    assert a1 == a2  # byte-identical for identical (input, seed, version)
    assert _integer_part(json.loads(a1[1])) == _integer_part(json.loads(b[1]))


def test_flowcount_combinatorial_and_unknown(capsys):
    doc = run_json(capsys, "flowcount", "--bundle", "s2_combinatorial")
    assert doc["data"]["combinatorial"] is True
    code, _, _ = run(capsys, "flowcount", "--bundle", "moebius")
    assert code == EXIT["unsupported"]


def test_flowcount_recipe(capsys, tmp_path):
    path = tmp_path / "recipe.json"
    recipe = {"bundle": "torus", "metric_seed": 2, "eps": 0.1, "tolerances": {"shoot_tol": 1e-10}}
    path.write_text(dumps(document("bundle_recipe", recipe)))
    doc = run_json(capsys, "flowcount", "--bundle", str(path), "--trials", "0", "--format", "json")
    assert doc["config"]["recipe"] == recipe
    assert doc["config"]["tolerances"]["shoot_tol"] == 1e-10
    path.write_text(dumps(document("bundle_recipe", {"bundle": "torus", "tolerances": {"x": 1}})))
    assert run(capsys, "flowcount", "--bundle", str(path))[0] == EXIT["schema"]


def test_failing_check_exit_code(capsys, monkeypatch):
    from morsefam import checks
    from morsefam.complexes import CheckResult
    monkeypatch.setattr(checks, "check_monodromy",
                        lambda *a, **k: CheckResult(False, "forced failure", {"why": "test"}))
    code, out, _ = run(capsys, "check", "monodromy")
    assert code == EXIT["check_failed"] == 1
    doc = json.loads(out)
    assert doc["data"]["ok"] is False and doc["data"]["details"] == {"why": "test"}

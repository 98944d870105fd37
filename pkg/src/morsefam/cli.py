"""Command line: ``python -m morsefam {compute,check,flowcount,examples}``.

Exit codes: 0 success, 1 a check ran and failed, 2 invalid input,
3 ``d^2 != 0``, 4 numerical resolution failure, 5 unsupported combination.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import replace
from fractions import Fraction
from typing import Any, Sequence

from . import __version__, catalog, checks
from .complexes import InvalidComplex, homology_groups
from .cubical import CubicalFamily, assemble_cubical
from .exact_algebra import ContractViolation, FgAbGroup
from .family import FamilyDescriptor, assemble, family_homology, family_pages
from .flowcount import (
    BUNDLES,
    COMBINATORIAL,
    Inadmissible,
    ResolutionExhausted,
    Tolerances,
    bundle,
    count_bundle,
    emit_cubical,
    emit_descriptor,
    regularity_check,
)
from .morse import MorseData, morse_complex
from .novikov import NovikovComplexData, PrecisionExhausted, novikov_homology
from .schemas import SchemaError, decode, document, dumps, load
from .spectral import SpectralSequence

__all__ = ["main", "build_parser", "EXIT"]

EXIT = {"ok": 0, "check_failed": 1, "schema": 2, "d2": 3, "numeric": 4, "unsupported": 5}

log = logging.getLogger("morsefam")


def _default_seed() -> int:
    try:
        return int(os.environ.get("MORSEFAM_SEED", "0"))
    except ValueError:
        return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="morsefam", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"morsefam {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="write the result here instead of stdout")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--seed", type=int, default=None,
                       help="seed for stochastic steps (default: $MORSEFAM_SEED or 0)")
        p.add_argument("--precision", default="-10", help="Novikov working precision")
        p.add_argument("--verbose", action="store_true")

    p = sub.add_parser("compute", help="homology, pages and filtration of a family")
    common(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--example", help="built-in example name")
    src.add_argument("--input", help="JSON document (schema morsefam/1)")
    p.add_argument("--pages", action="store_true", help="include every page up to the stable one")

    p = sub.add_parser("check", help="run one named verification")
    common(p)
    p.add_argument("name", choices=checks.CHECKS)
    p.add_argument("--example", default=None)
    p.add_argument("--input", default=None)
    p.add_argument("--omega", default="1", help="class of the 1-form for novikov-vanishing")
    p.add_argument("--phi", default=None, help="monodromy matrix as JSON, for the monodromy check")

    p = sub.add_parser("flowcount", help="count flow lines on a named bundle")
    common(p)
    p.add_argument("--bundle", required=True,
                   help="built-in bundle name, or a bundle_recipe JSON document")
    p.add_argument("--emit", help="write the emitted descriptor document here")
    p.add_argument("--cubical", action="store_true", help="emit the cubical dataset instead")
    p.add_argument("--shoot-tol", type=float, default=None)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--eps", type=float, default=1e-3)

    p = sub.add_parser("examples", help="list built-in examples, bundles and checks")
    common(p)
    return ap


def _config(args) -> dict:
    skip = {"verbose", "out", "emit"}  # output paths do not affect results
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _jsonable(x: Any):
    if isinstance(x, dict):
        return {str(k) if not isinstance(k, tuple) else ",".join(map(str, k)): _jsonable(v)
                for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (str, int, float, bool)) or x is None:
        return x
    if isinstance(x, Fraction):
        return str(x)
    if hasattr(x, "to_json"):
        return _jsonable(x.to_json())
    if hasattr(x, "to_rows"):
        return x.to_rows()
    return repr(x)


def _emit(args, doc: dict, csv_rows: list[list] | None = None):
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for row in csv_rows or []:
            w.writerow(row)
        text = buf.getvalue()
    else:
        text = dumps(doc)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _group_row(g: FgAbGroup) -> list:
    return [g.free_rank, " ".join(map(str, g.torsion))]


def _filtered_result(C, name: str, all_pages: bool) -> tuple[dict, list[list]]:
    ss = SpectralSequence(C)
    H = family_homology(C)
    stable = ss.stable_page()
    last = max(stable.r, 2)
    pages = [ss.page(r) for r in range(2, (last if all_pages else 2) + 1)]
    inf = ss.infinity_page()
    data = {
        "name": name,
        "homology": [{"degree": m, **g.to_json()} for m, g in sorted(H.groups.items())],
        "filtration": H.to_json()["filtration"],
        "pages": [pg.to_json() for pg in pages],
        "e_infinity": inf.to_json(),
        "stable_r": stable.r,
        "collapse_at_E2": ss.collapses_at(2),
        "collapse_at_E2_over_Q": ss.collapses_at(2, rational=True),
    }
    rows = [["page", "i", "j", "free_rank", "torsion"]]
    for pg in pages:
        for (p, q) in sorted(pg.entries):
            rows.append([pg.r, p, q, *_group_row(pg.group(p, q))])
    for (p, q) in sorted(inf.entries):
        rows.append(["inf", p, q, *_group_row(inf.group(p, q))])
    return data, rows


def cmd_compute(args) -> int:
    if args.example:
        obj = catalog.get(args.example)
    else:
        obj = decode(load(args.input))
    if isinstance(obj, FamilyDescriptor):
        data, rows = _filtered_result(assemble(obj), obj.name, args.pages)
    elif isinstance(obj, CubicalFamily):
        data, rows = _filtered_result(assemble_cubical(obj), obj.name, args.pages)
    elif isinstance(obj, NovikovComplexData):
        mode = "Q" if obj.lattice.is_field_case else "Z"
        H = novikov_homology(obj, mode, Fraction(args.precision))
        data = {"novikov_homology": [h.to_json() for _, h in sorted(H.items())]}
        rows = [["degree", "rank", "elementary", "mode"]] + \
            [[n, h.rank, " ".join(map(str, h.elementary)), h.mode] for n, h in sorted(H.items())]
    else:
        H = homology_groups(morse_complex(obj))
        data = {"homology": [{"degree": m, **g.to_json()} for m, g in sorted(H.items())]}
        rows = [["degree", "free_rank", "torsion"]] + [[m, *_group_row(g)] for m, g in sorted(H.items())]
    _emit(args, document("compute_result", data, _config(args)), rows)
    return EXIT["ok"]


def _descriptor_for(args) -> FamilyDescriptor:
    if args.input:
        obj = decode(load(args.input))
        if not isinstance(obj, FamilyDescriptor):
            raise checks.Unsupported("this check needs a family descriptor")
        return obj
    return catalog.get(args.example or "torus")


def cmd_check(args) -> int:
    name, ex = args.name, args.example or "torus"
    if name == "e2":
        res = checks.check_e2(_descriptor_for(args))
    elif name == "leray-serre":
        res = checks.check_leray_serre(ex)
    elif name == "poincare":
        res = checks.check_poincare(_descriptor_for(args))
    elif name == "triviality":
        res = checks.check_triviality(_descriptor_for(args))
    elif name == "alternate":
        res = checks.check_alternate(ex)
    elif name == "mayer-vietoris":
        res = checks.check_mayer_vietoris(args.example or "klein")
    elif name == "monodromy":
        phi = json.loads(args.phi) if args.phi else None
        res = checks.check_monodromy(phi, seed=args.seed)
    elif name == "novikov-units":
        p = int(Fraction(args.precision))
        res = checks.check_novikov_units(range(-1, p - 1, -1) if p < 0 else [p])
    elif name == "novikov-vanishing":
        res = checks.check_novikov_vanishing(Fraction(args.omega), Fraction(args.precision))
    else:
        res = checks.check_continuation(_descriptor_for(args))
    data = {"check": name, "ok": res.ok, "message": res.message, "details": _jsonable(res.details)}
    _emit(args, document("check_report", data, _config(args)),
          [["check", "ok", "message"], [name, res.ok, res.message]])
    return EXIT["ok"] if res.ok else EXIT["check_failed"]


def cmd_flowcount(args) -> int:
    name = args.bundle
    config = _config(args)
    if name in COMBINATORIAL:
        D = COMBINATORIAL[name]()
        assemble(D)
        emitted = document("family_descriptor", D.to_json(),
                           {**config, "provenance": "combinatorial (no numerics)"})
        report = {"bundle": name, "combinatorial": True}
    else:
        if name.endswith(".json"):
            doc = load(name)
            if doc["kind"] != "bundle_recipe":
                raise SchemaError(f"expected a bundle_recipe document, got {doc['kind']}", "$.kind")
            Z, tol = decode(doc)
            config["recipe"] = doc["data"]
        elif name in BUNDLES:
            Z, tol = bundle(name), Tolerances()
        else:
            raise checks.Unsupported(f"unknown bundle {name!r}; known: "
                                     f"{sorted(BUNDLES) + sorted(COMBINATORIAL)}")
        if args.shoot_tol is not None:
            tol = replace(tol, shoot_tol=args.shoot_tol)
        res = count_bundle(Z, args.seed, tol)
        config["tolerances"] = tol.to_json()
        if args.cubical:
            obj = emit_cubical(Z, args.seed, tol)
            assemble_cubical(obj)
            emitted = document("cubical_family", obj.to_json(), config)
        else:
            D = emit_descriptor(res)
            assemble(D)
            emitted = document("family_descriptor", D.to_json(), config)
        stab = regularity_check(Z, res, args.eps, args.trials, args.seed, tol)
        report = {"bundle": Z.to_json(), "counts": res.to_json(), "stability": stab.to_json()}
        if not stab.stable:
            log.warning("counts are not stable under perturbation: %s", stab.irregular or stab.differences)
    if args.emit:
        with open(args.emit, "w", encoding="utf-8", newline="") as fh:
            fh.write(dumps(emitted))
    doc = document("flowcount_report", _jsonable({**report, "emitted": emitted["data"]}), config)
    rows = [["source_x", "source_p", "target_x", "target_p", "sign", "edge"]]
    for r in (report.get("counts") or {}).get("records", []):
        rows.append([*r["source"], *r["target"], r["sign"], r["edge"]])
    _emit(args, doc, rows)
    return EXIT["ok"]


def cmd_examples(args) -> int:
    data = {"descriptors": sorted(catalog.BUILTINS), "cubical": sorted(checks.CUBICAL),
            "bundles": sorted(BUNDLES), "combinatorial_bundles": sorted(COMBINATORIAL),
            "checks": list(checks.CHECKS), "leray_serre_oracles": sorted(catalog.LERAY_SERRE)}
    rows = [["kind", "name"]] + [[k, n] for k, v in data.items() for n in v]
    _emit(args, document("examples", data, _config(args)), rows)
    return EXIT["ok"]


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is None:
        args.seed = _default_seed()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"compute": cmd_compute, "check": cmd_check, "flowcount": cmd_flowcount,
                "examples": cmd_examples}
    try:
        return handlers[args.command](args)
    except SchemaError as e:
        print(f"schema error at {e}", file=sys.stderr)
        return EXIT["schema"]
    except InvalidComplex as e:
        print(f"invalid complex: {e}", file=sys.stderr)
        return EXIT["d2"]
    except (ResolutionExhausted, PrecisionExhausted, Inadmissible) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT["numeric"]
    except checks.Unsupported as e:
        print(f"unsupported: {e}", file=sys.stderr)
        return EXIT["unsupported"]
    except (KeyError, ContractViolation, OSError) as e:
        print(f"invalid input: {e}", file=sys.stderr)
        return EXIT["schema"]


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

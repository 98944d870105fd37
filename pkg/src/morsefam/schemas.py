"""Versioned JSON documents: schemas, validation and canonical dumping."""

from __future__ import annotations

import json
from typing import Any, Mapping

import jsonschema

from .cubical import CubicalFamily
from .family import FamilyDescriptor
from .morse import MorseData
from .novikov import NovikovComplexData

__all__ = ["SCHEMA_TAG", "SCHEMAS", "SchemaError", "validate", "document", "dumps", "load",
           "decode"]

SCHEMA_TAG = "morsefam/1"


class SchemaError(ValueError):
    """Input document does not match its schema; ``path`` locates the problem."""

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path


_int_matrix = {"type": "array", "items": {"type": "array", "items": {"type": "integer"}}}

_morse = {
    "type": "object",
    "required": ["critical_points"],
    "properties": {
        "critical_points": {
            "type": "array",
            "items": {"type": "object", "required": ["label", "index"],
                      "properties": {"label": {"type": "string"},
                                     "index": {"type": "integer", "minimum": 0}}},
        },
        "flows": {
            "type": "array",
            "items": {"type": "object", "required": ["from", "to", "count"],
                      "properties": {"from": {"type": "string"}, "to": {"type": "string"},
                                     "count": {"type": "integer"}}},
        },
        "orientation": {"type": "string"},
    },
}

_family = {
    "type": "object",
    "required": ["base", "dim_base", "fiber_dim", "fibers"],
    "properties": {
        "name": {"type": "string"},
        "base": _morse,
        "dim_base": {"type": "integer", "minimum": 0},
        "fiber_dim": {"type": "integer", "minimum": 0},
        "fibers": {"type": "object", "additionalProperties": _morse},
        "blocks": {
            "type": "array",
            "items": {"type": "object", "required": ["k", "from_x", "to_y", "matrix"],
                      "properties": {"k": {"type": "integer", "minimum": 0},
                                     "from_x": {"type": "string"}, "to_y": {"type": "string"},
                                     "matrix": _int_matrix}},
        },
        "oriented_fibers": {"type": "boolean"},
    },
}

_cubical = {
    "type": "object",
    "required": ["cubes", "fiber_data"],
    "properties": {
        "name": {"type": "string"},
        "cubes": {
            "type": "array",
            "items": {"type": "object", "required": ["id", "dim"],
                      "properties": {"id": {"type": "string"},
                                     "dim": {"type": "integer", "minimum": 0},
                                     "faces": {"type": "array"},
                                     "degenerate": {"type": "boolean"}}},
        },
        "fiber_data": {"type": "object", "additionalProperties": _morse},
        "blocks": {"type": "array",
                   "items": {"type": "object", "required": ["k", "from", "to", "matrix"]}},
    },
}

_novikov = {
    "type": "object",
    "required": ["lattice", "points"],
    "properties": {
        "lattice": {"type": "object", "required": ["rank", "omega"],
                    "properties": {"rank": {"type": "integer", "minimum": 0},
                                   "omega": {"type": "array", "items": {"type": "string"}}}},
        "points": {"type": "array",
                   "items": {"type": "object", "required": ["label", "index"]}},
        "flows": {"type": "array",
                  "items": {"type": "object", "required": ["from", "to", "A", "count"],
                            "properties": {"A": {"type": "array", "items": {"type": "integer"}},
                                           "count": {"type": "integer"}}}},
    },
}

_recipe = {
    "type": "object",
    "required": ["bundle"],
    "additionalProperties": False,
    "properties": {
        "bundle": {"type": "string"},
        "fiber_function": {"type": "object", "required": ["expr"],
                           "properties": {"expr": {"enum": ["cos", "rotating", "tuned"]},
                                          "params": {"type": "array", "items": {"type": "number"}},
                                          "scale": {"type": "number"}}},
        "metric_seed": {"type": "integer"},
        "eps": {"type": "number", "minimum": 0, "maximum": 0.9},
        "tolerances": {"type": "object",
                       "properties": {k: {"type": "number", "exclusiveMinimum": 0}
                                      for k in ("root_tol", "lin_tol", "shoot_tol", "rtol",
                                                "atol", "start_radius")}
                       | {"grid": {"type": "integer", "minimum": 2}},
                       "additionalProperties": False},
    },
}

SCHEMAS: dict[str, dict] = {
    "family_descriptor": _family,
    "cubical_family": _cubical,
    "novikov_complex": _novikov,
    "morse_data": _morse,
    "bundle_recipe": _recipe,
}

_envelope = {
    "type": "object",
    "required": ["schema", "kind", "data"],
    "properties": {
        "schema": {"const": SCHEMA_TAG},
        "kind": {"enum": sorted(SCHEMAS)},
        "data": {"type": "object"},
        "config": {"type": "object"},
    },
}


def _raise(err: jsonschema.ValidationError, prefix: str = "$"):
    path = prefix + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)
    raise SchemaError(err.message, path) from None


def validate(doc: Any) -> str:
    """Check the envelope and the payload; return the document kind."""
    try:
        jsonschema.validate(doc, _envelope)
    except jsonschema.ValidationError as e:
        _raise(e)
    try:
        jsonschema.validate(doc["data"], SCHEMAS[doc["kind"]])
    except jsonschema.ValidationError as e:
        _raise(e, "$.data")
    return doc["kind"]


def document(kind: str, data: Mapping, config: Mapping | None = None) -> dict:
    out = {"schema": SCHEMA_TAG, "kind": kind, "data": dict(data)}
    if config is not None:
        out["config"] = dict(config)
    return out


def dumps(doc: Mapping) -> str:
    """Canonical text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=True) + "\n"


def load(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise SchemaError(f"not valid JSON ({e.msg} at line {e.lineno})") from None
    validate(doc)
    return doc


def decode(doc: Mapping):
    """Validated document to the corresponding library object."""
    kind = validate(doc)
    data = doc["data"]
    if kind == "family_descriptor":
        return FamilyDescriptor.from_json(data)
    if kind == "cubical_family":
        return CubicalFamily.from_json(data)
    if kind == "novikov_complex":
        return NovikovComplexData.from_json(data)
    if kind == "bundle_recipe":
        from .flowcount import bundle_from_recipe
        return bundle_from_recipe(data)
    return MorseData.from_json(data)

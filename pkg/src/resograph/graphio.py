"""JSON graph files.

Schema::

    {
      "vertices": ["A", "B"],
      "edges": [{"from": "A", "to": "B", "length": 1.0}],
      "leads": [{"vertex": "A"}],
      "couplings": {
        "A": {"type": "delta", "alpha": 1.0},
        "B": {"type": "custom", "matrix": [[[re, im], [re, im]], [[re, im], [re, im]]]}
      }
    }

Coupling types: ``delta`` and ``delta_prime_s`` (``alpha``, default 0),
``permutation_invariant`` (``a``, ``b`` as ``[re, im]``), ``dirichlet``,
``neumann``, ``custom`` (``matrix`` given row by row as ``[re, im]`` pairs).
Vertices may be strings or integers; coupling keys are matched on ``str(vertex)``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import GraphFileError
from .graph import (Custom, Delta, DeltaPrimeS, Dirichlet, MetricGraph, Neumann,
                    PermutationInvariant)


def _complex(value, where):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if (isinstance(value, (list, tuple)) and len(value) == 2
            and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in value)):
        return complex(value[0], value[1])
    raise GraphFileError(f"expected a number or [re, im], got {value!r}", where)


def _real(obj, key, where, default=None):
    if key not in obj:
        if default is None:
            raise GraphFileError(f"missing field '{key}'", where)
        return default
    v = obj[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise GraphFileError(f"'{key}' must be a number, got {v!r}", f"{where}.{key}")
    return float(v)


def _coupling(obj, where):
    if not isinstance(obj, dict) or "type" not in obj:
        raise GraphFileError("coupling must be an object with a 'type'", where)
    kind = str(obj["type"]).lower()
    if kind == "delta":
        return Delta(_real(obj, "alpha", where, 0.0))
    if kind in ("delta_prime_s", "delta_prime"):
        return DeltaPrimeS(_real(obj, "alpha", where, 0.0))
    if kind == "dirichlet":
        return Dirichlet()
    if kind == "neumann":
        return Neumann()
    if kind == "permutation_invariant":
        for key in ("a", "b"):
            if key not in obj:
                raise GraphFileError(f"missing field '{key}'", where)
        return PermutationInvariant(_complex(obj["a"], f"{where}.a"), _complex(obj["b"], f"{where}.b"))
    if kind == "custom":
        rows = obj.get("matrix")
        if not isinstance(rows, list) or not rows:
            raise GraphFileError("custom coupling needs a non-empty 'matrix'", f"{where}.matrix")
        m = []
        for i, row in enumerate(rows):
            if not isinstance(row, list):
                raise GraphFileError("matrix rows must be lists", f"{where}.matrix[{i}]")
            m.append([_complex(x, f"{where}.matrix[{i}][{j}]") for j, x in enumerate(row)])
        if any(len(r) != len(m) for r in m):
            raise GraphFileError("matrix must be square", f"{where}.matrix")
        return Custom(np.array(m, dtype=complex))
    raise GraphFileError(f"unknown coupling type {obj['type']!r}", f"{where}.type")


def graph_from_dict(data) -> MetricGraph:
    if not isinstance(data, dict):
        raise GraphFileError("top level must be an object", "$")
    for key in ("vertices", "edges"):
        if key not in data:
            raise GraphFileError(f"missing field '{key}'", "$")
    vertices = data["vertices"]
    if not isinstance(vertices, list):
        raise GraphFileError("'vertices' must be a list", "vertices")
    for i, v in enumerate(vertices):
        if not isinstance(v, (str, int)) or isinstance(v, bool):
            raise GraphFileError(f"vertex names must be strings or integers, got {v!r}", f"vertices[{i}]")
    if len({str(v) for v in vertices}) != len(vertices):
        raise GraphFileError("duplicate vertex names", "vertices")
    by_name = {str(v): v for v in vertices}

    def vertex(name, where):
        if str(name) not in by_name:
            raise GraphFileError(f"unknown vertex {name!r}", where)
        return by_name[str(name)]

    edges = []
    if not isinstance(data["edges"], list):
        raise GraphFileError("'edges' must be a list", "edges")
    for i, e in enumerate(data["edges"]):
        where = f"edges[{i}]"
        if not isinstance(e, dict):
            raise GraphFileError("edge must be an object", where)
        for key in ("from", "to"):
            if key not in e:
                raise GraphFileError(f"missing field '{key}'", where)
        length = _real(e, "length", where)
        if not length > 0:
            raise GraphFileError(f"length must be positive, got {length}", f"{where}.length")
        edges.append((vertex(e["from"], f"{where}.from"), vertex(e["to"], f"{where}.to"), length))

    leads = []
    raw_leads = data.get("leads", [])
    if not isinstance(raw_leads, list):
        raise GraphFileError("'leads' must be a list", "leads")
    for i, lead in enumerate(raw_leads):
        where = f"leads[{i}]"
        if not isinstance(lead, dict) or "vertex" not in lead:
            raise GraphFileError("lead must be an object with a 'vertex'", where)
        leads.append(vertex(lead["vertex"], f"{where}.vertex"))

    couplings = {}
    raw = data.get("couplings", {})
    if not isinstance(raw, dict):
        raise GraphFileError("'couplings' must be an object", "couplings")
    for name, spec in raw.items():
        where = f"couplings.{name}"
        couplings[vertex(name, where)] = _coupling(spec, where)
    return MetricGraph(vertices, edges, leads, couplings)


def parse_graph(text: str) -> MetricGraph:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFileError(exc.msg, f"line {exc.lineno}, column {exc.colno}") from None
    return graph_from_dict(data)


def load_graph(path) -> MetricGraph:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise GraphFileError(f"cannot read file: {exc.strerror}", str(path)) from None
    return parse_graph(text)


def _pair(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def graph_to_dict(g: MetricGraph) -> dict:
    """Serialisable form of ``g``; couplings are written as custom matrices."""
    return {
        "vertices": list(g.vertices),
        "edges": [{"from": e.a, "to": e.b, "length": float(e.length)} for e in g.edges],
        "leads": [{"vertex": v} for v in g.leads],
        "couplings": {str(v): {"type": "custom", "matrix": [[_pair(x) for x in row] for row in U]}
                      for v, U in g.couplings.items()},
    }


def dump_graph(g: MetricGraph, path) -> None:
    Path(path).write_text(json.dumps(graph_to_dict(g), indent=2) + "\n")

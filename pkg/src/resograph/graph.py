"""Metric graphs with leads, vertex couplings and the one-vertex flower form.

Every vertex carries a unitary matrix U acting on the vector of boundary
values at that vertex through ``(U - I) psi + i (U + I) psi' = 0`` where the
derivatives are taken in the outward direction (pointing into the edge).

Local slot order at a vertex: edge ends in edge order (a self-loop
contributes its start then its end), then the attached leads in lead order.
The flower form uses slots ``2j, 2j+1`` for the start and end of edge ``j``
(0-based) and slots ``2N, ..., 2N+M-1`` for the leads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Sequence, Union

import numpy as np

from .errors import StructuralError, ValidationError

UNITARY_TOL = 1e-12


# -- coupling specifications -------------------------------------------------

@dataclass(frozen=True)
class Delta:
    """delta coupling: continuity plus sum of outward derivatives = alpha * f."""
    alpha: float = 0.0


@dataclass(frozen=True)
class DeltaPrimeS:
    alpha: float = 0.0


@dataclass(frozen=True)
class PermutationInvariant:
    """U = a J + b I with J the all-ones matrix."""
    a: complex
    b: complex


@dataclass(frozen=True)
class Dirichlet:
    pass


@dataclass(frozen=True)
class Neumann:
    pass


@dataclass(frozen=True)
class Custom:
    matrix: np.ndarray = field(compare=False)


CouplingSpec = Union[Delta, DeltaPrimeS, PermutationInvariant, Dirichlet, Neumann, Custom]


def unitarity_defect(U) -> float:
    U = np.asarray(U, dtype=complex)
    return float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0])))) if U.size else 0.0


def is_unitary(U, tol=UNITARY_TOL) -> bool:
    U = np.asarray(U)
    return U.ndim == 2 and U.shape[0] == U.shape[1] and unitarity_defect(U) <= tol


def permutation_invariant_params(spec: CouplingSpec, degree: int) -> tuple[complex, complex] | None:
    """(a, b) of the aJ + bI family for the specs that belong to it."""
    if isinstance(spec, Delta):
        return 2.0 / (degree + 1j * spec.alpha), -1.0 + 0j
    if isinstance(spec, DeltaPrimeS):
        return -2.0 / (degree - 1j * spec.alpha), 1.0 + 0j
    if isinstance(spec, PermutationInvariant):
        return complex(spec.a), complex(spec.b)
    if isinstance(spec, Dirichlet):
        return 0j, -1.0 + 0j
    if isinstance(spec, Neumann):
        return 0j, 1.0 + 0j
    return None


def build_coupling(spec: CouplingSpec, degree: int) -> np.ndarray:
    """Unitary coupling matrix of size ``degree`` for a coupling spec."""
    if degree < 1:
        raise StructuralError(f"degree must be positive, got {degree}")
    if isinstance(spec, Custom):
        U = np.array(spec.matrix, dtype=complex)
        if U.shape != (degree, degree):
            raise StructuralError(f"custom coupling has shape {U.shape}, vertex degree is {degree}")
        if not is_unitary(U):
            raise ValidationError(f"custom coupling is not unitary (defect {unitarity_defect(U):.3g})")
        return U
    params = permutation_invariant_params(spec, degree)
    if params is None:
        raise TypeError(f"unknown coupling spec {spec!r}")
    a, b = params
    if isinstance(spec, PermutationInvariant):
        if abs(abs(b) - 1) > UNITARY_TOL or abs(abs(b + a * degree) - 1) > UNITARY_TOL:
            raise ValidationError("permutation-invariant coupling needs |b| = 1 and |b + a deg| = 1")
    return a * np.ones((degree, degree), dtype=complex) + b * np.eye(degree, dtype=complex)


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary matrix."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


# -- graphs ------------------------------------------------------------------

@dataclass(frozen=True)
class Edge:
    a: Hashable
    b: Hashable
    length: float


@dataclass(frozen=True)
class SlotRef:
    """Where a flower slot comes from in the source graph.

    ``kind`` is ``"edge"`` or ``"lead"``; ``end`` is 0 (start) or 1 (end) for
    edges and ``None`` for leads. ``vertex``/``local`` locate the row of the
    vertex coupling matrix.
    """
    kind: str
    index: int
    end: int | None
    vertex: Hashable
    local: int


class MetricGraph:
    """Finite edges, semi-infinite leads and per-vertex couplings.

    ``couplings`` maps a vertex to either a coupling spec or an explicit
    matrix. Specs are resolved against the vertex degree on construction;
    nothing is validated here, see :func:`validate`.
    """

    def __init__(self, vertices: Sequence[Hashable], edges, leads=(), couplings=None):
        self.vertices = tuple(vertices)
        self.edges = tuple(e if isinstance(e, Edge) else Edge(*e) for e in edges)
        self.leads = tuple(leads)
        self._raw_couplings = dict(couplings or {})
        self.couplings = {}
        self._coupling_errors = {}
        for v in self.vertices:
            spec = self._raw_couplings.get(v)
            if spec is None:
                continue
            if isinstance(spec, (Delta, DeltaPrimeS, PermutationInvariant, Dirichlet, Neumann)):
                deg = self.degree(v)
                if deg == 0:
                    self._coupling_errors[v] = "coupling given for an isolated vertex"
                    continue
                try:
                    self.couplings[v] = build_coupling(spec, deg)
                except (ValidationError, StructuralError) as exc:
                    self._coupling_errors[v] = str(exc)
            else:
                m = spec.matrix if isinstance(spec, Custom) else spec
                self.couplings[v] = np.array(m, dtype=complex)

    def local_slots(self, v) -> list[SlotRef]:
        slots = []
        for j, e in enumerate(self.edges):
            if e.a == v:
                slots.append(SlotRef("edge", j, 0, v, len(slots)))
            if e.b == v:
                slots.append(SlotRef("edge", j, 1, v, len(slots)))
        for i, anchor in enumerate(self.leads):
            if anchor == v:
                slots.append(SlotRef("lead", i, None, v, len(slots)))
        return slots

    def degree(self, v) -> int:
        return len(self.local_slots(v))

    @property
    def lengths(self) -> np.ndarray:
        return np.array([e.length for e in self.edges], dtype=float)

    def with_lengths(self, lengths) -> "MetricGraph":
        edges = [Edge(e.a, e.b, float(l)) for e, l in zip(self.edges, lengths)]
        return MetricGraph(self.vertices, edges, self.leads, self._raw_couplings)

    def __repr__(self):
        return (f"MetricGraph(vertices={len(self.vertices)}, edges={len(self.edges)}, "
                f"leads={len(self.leads)})")


@dataclass(frozen=True)
class FlowerGraph:
    lengths: np.ndarray
    lead_count: int
    U: np.ndarray
    permutation: tuple[SlotRef, ...] = ()

    @property
    def N(self) -> int:
        return len(self.lengths)

    @property
    def M(self) -> int:
        return self.lead_count

    def with_lengths(self, lengths) -> "FlowerGraph":
        return FlowerGraph(np.asarray(lengths, dtype=float), self.lead_count, self.U, self.permutation)

    def blocks(self):
        """Split U into the interior/exterior blocks (U1, U2, U3, U4)."""
        n = 2 * self.N
        U = self.U
        return U[:n, :n], U[:n, n:], U[n:, :n], U[n:, n:]

    def as_metric_graph(self) -> MetricGraph:
        edges = [Edge(0, 0, float(l)) for l in self.lengths]
        return MetricGraph([0], edges, [0] * self.lead_count, {0: Custom(self.U)})


def validate(g: MetricGraph) -> list[str]:
    """Human-readable list of violated invariants; empty iff ``g`` is valid."""
    problems = []
    for j, e in enumerate(g.edges):
        if not (e.length > 0 and np.isfinite(e.length)):
            problems.append(f"edge {j}: length must be positive, got {e.length}")
        for end in (e.a, e.b):
            if end not in g.vertices:
                problems.append(f"edge {j}: unknown vertex {end!r}")
    for i, anchor in enumerate(g.leads):
        if anchor not in g.vertices:
            problems.append(f"lead {i}: unknown vertex {anchor!r}")
    for v, msg in g._coupling_errors.items():
        problems.append(f"vertex {v!r}: {msg}")
    for v in g.vertices:
        deg = g.degree(v)
        U = g.couplings.get(v)
        if U is None:
            if deg > 0 and v not in g._coupling_errors:
                problems.append(f"vertex {v!r}: missing coupling for degree {deg}")
            continue
        if U.shape != (deg, deg):
            problems.append(f"vertex {v!r}: coupling size {U.shape} does not match degree {deg}")
            continue
        defect = unitarity_defect(U)
        if defect > UNITARY_TOL:
            problems.append(f"vertex {v!r}: coupling not unitary (defect {defect:.3g})")
    return problems


def flowerize(g: MetricGraph) -> FlowerGraph:
    """Collect all vertex couplings into one block-diagonal U in flower slot order."""
    N, M = len(g.edges), len(g.leads)
    size = 2 * N + M
    U = np.zeros((size, size), dtype=complex)
    perm: list[SlotRef | None] = [None] * size

    def flower_slot(ref: SlotRef) -> int:
        return 2 * ref.index + ref.end if ref.kind == "edge" else 2 * N + ref.index

    for v in g.vertices:
        slots = g.local_slots(v)
        if not slots:
            continue
        Uv = g.couplings.get(v)
        if Uv is None:
            raise StructuralError(f"vertex {v!r} has degree {len(slots)} but no coupling")
        if Uv.shape != (len(slots), len(slots)):
            raise StructuralError(
                f"vertex {v!r}: coupling size {Uv.shape} does not match degree {len(slots)}")
        idx = [flower_slot(s) for s in slots]
        U[np.ix_(idx, idx)] = Uv
        for s, i in zip(slots, idx):
            perm[i] = s
    if any(p is None for p in perm):
        missing = [i for i, p in enumerate(perm) if p is None]
        raise StructuralError(f"slots {missing} are not attached to any known vertex")
    return FlowerGraph(g.lengths, M, U, tuple(perm))

"""Embedded eigenvalues from rationally related edge lengths.

The first ``n`` edges of a flower have lengths ``l0 * n_j``. At ``k0 l0 = 2 m pi``
(even parity) or ``(2m + 1) pi`` (odd parity) the compact secular matrix loses
rank whenever the 2N x 2n matrix built from the first 2n columns of U does;
``2n - rank`` is then a lower bound on the multiplicity of k0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivisorVanishes
from .graph import Delta, DeltaPrimeS, MetricGraph

RANK_TOL = 1e-10
SING_TOL = 1e-12


class Parity(enum.Enum):
    EVEN = "even"
    ODD = "odd"


def _parity(p) -> Parity:
    return p if isinstance(p, Parity) else Parity(str(p).lower())


@dataclass(frozen=True)
class RationalLengthSpec:
    """Lengths ``l0 * (n_j + eps_j)`` for the first ``len(multipliers)`` edges."""
    l0: float
    multipliers: tuple[int, ...]
    eps: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.l0 > 0:
            raise ValueError("l0 must be positive")
        if len(self.multipliers) < 1 or min(self.multipliers) < 1:
            raise ValueError("need at least one edge and multipliers >= 1")
        if self.eps and len(self.eps) != len(self.multipliers):
            raise ValueError("eps must have one entry per rational edge")

    @property
    def n(self) -> int:
        return len(self.multipliers)

    @property
    def eps_array(self) -> np.ndarray:
        return np.asarray(self.eps if self.eps else [0.0] * self.n, dtype=float)

    def lengths(self) -> np.ndarray:
        return self.l0 * (np.asarray(self.multipliers, dtype=float) + self.eps_array)

    def k0(self, m: int, parity) -> float:
        """2 m pi / l0 (even) or (2m + 1) pi / l0 (odd)."""
        if _parity(parity) is Parity.EVEN:
            if m < 1:
                raise ValueError("even parity needs m >= 1")
            return 2 * m * math.pi / self.l0
        if m < 0:
            raise ValueError("odd parity needs m >= 0")
        return (2 * m + 1) * math.pi / self.l0


@dataclass
class MultiplicityReport:
    k0: float | None
    parity: Parity
    rank: int
    n: int
    perturbed: bool = False
    singular_values: np.ndarray = field(default=None, repr=False)

    @property
    def multiplicity_lower_bound(self) -> int:
        return 2 * self.n - self.rank

    def as_dict(self) -> dict:
        return {"k0": self.k0, "parity": self.parity.value, "n": self.n, "rank": self.rank,
                "multiplicity_lower_bound": self.multiplicity_lower_bound,
                "perturbed": self.perturbed}


def numerical_rank(A, tol=RANK_TOL) -> tuple[int, np.ndarray]:
    """Number of singular values above ``tol`` times the largest one."""
    sv = np.linalg.svd(np.asarray(A, dtype=complex), compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0, sv
    return int(np.sum(sv > tol * sv[0])), sv


def _with_insertions(U, n, diag, off):
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ValueError(f"U must be square, got {U.shape}")
    if not 1 <= n <= U.shape[0] // 2:
        raise ValueError(f"n must lie in 1..{U.shape[0] // 2}, got {n}")
    M = U[:, :2 * n].copy()
    diag = np.broadcast_to(np.asarray(diag, dtype=complex), (n,))
    off = np.broadcast_to(np.asarray(off, dtype=complex), (n,))
    for j in range(n):
        a, b = 2 * j, 2 * j + 1
        M[a, a] += diag[j]
        M[b, b] += diag[j]
        M[a, b] += off[j]
        M[b, a] += off[j]
    return M


def m_even(U, n: int) -> np.ndarray:
    """First 2n columns of U with -1 added on the off-diagonal of each edge block."""
    return _with_insertions(U, n, 0.0, -1.0)


def m_odd(U, n: int) -> np.ndarray:
    return _with_insertions(U, n, 0.0, 1.0)


def embedded_multiplicity(U, n: int, parity="even", k0=None, tol=RANK_TOL) -> MultiplicityReport:
    parity = _parity(parity)
    M = m_even(U, n) if parity is Parity.EVEN else m_odd(U, n)
    rank, sv = numerical_rank(M, tol)
    return MultiplicityReport(k0, parity, rank, n, False, sv)


def epsilon_tilde(k0: float, l0: float, eps) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal corrections (eps~_a, eps~_b) for length offsets ``eps``."""
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    x = k0 * l0 * eps
    s, c = np.sin(x), np.cos(x)
    den = 2j * k0 * c - (1 + k0 ** 2) * s
    if np.any(np.abs(den) < SING_TOL):
        raise DivisorVanishes(f"2ik0 cos - (1 + k0^2) sin vanishes for k0={k0}, eps={eps}")
    ea = (1 - k0 ** 2) * s / den
    eb = (2j * k0 * (c - 1) - (1 + k0 ** 2) * s) / den
    return ea, eb


def perturbed_m(U, spec: RationalLengthSpec, k0: float, parity="even",
                tol=RANK_TOL) -> tuple[np.ndarray, MultiplicityReport]:
    """Rank matrix for the perturbed lengths; its defect is the surviving multiplicity at k0."""
    parity = _parity(parity)
    ea, eb = epsilon_tilde(k0, spec.l0, spec.eps_array)
    if parity is Parity.EVEN:
        M = _with_insertions(U, spec.n, ea, -1 + eb)
    else:
        M = _with_insertions(U, spec.n, ea, 1 - eb)
    rank, sv = numerical_rank(M, tol)
    return M, MultiplicityReport(float(k0), parity, rank, spec.n, bool(np.any(spec.eps_array)), sv)


def loop_graph(n: int, coupling="delta", alpha: float = 1.0, l0: float = 1.0,
               multipliers=None, eps=None, leads: int = 0) -> MetricGraph:
    """Closed loop of ``n`` edges with a permutation-invariant coupling at each vertex.

    Edge j joins vertex j to vertex j + 1 (mod n), so vertex j hosts the end of
    edge j - 1 and the start of edge j. ``leads`` half-lines hang from every vertex.
    ``coupling`` is ``"delta"`` or ``"delta_prime_s"``.
    """
    if n < 1:
        raise ValueError("a loop needs at least one edge")
    mult = np.ones(n) if multipliers is None else np.asarray(multipliers, dtype=float)
    e = np.zeros(n) if eps is None else np.asarray(eps, dtype=float)
    lengths = l0 * (mult + e)
    if coupling == "delta":
        spec = Delta(alpha)
    elif coupling in ("delta_prime_s", "delta_prime"):
        spec = DeltaPrimeS(alpha)
    else:
        raise ValueError(f"unknown coupling {coupling!r}")
    edges = [(j, (j + 1) % n, float(lengths[j])) for j in range(n)]
    lead_list = [v for v in range(n) for _ in range(leads)]
    return MetricGraph(list(range(n)), edges, lead_list, {v: spec for v in range(n)})

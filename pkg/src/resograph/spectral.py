"""Secular determinants, effective coupling and the on-shell S-matrix.

Edge ``j`` carries ``f_j(x) = a_j sin kx + b_j cos kx``; a lead carries an
outgoing wave ``g(x) = e^{ikx}`` (resolvent route) or ``c e^{-ikx} + d e^{ikx}``
(scattering route). The unknown vector is ``(a_1, b_1, ..., a_N, b_N, g_1(0), ..., g_M(0))``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import SingularAtK, SingularExterior
from .graph import FlowerGraph, UNITARY_TOL, unitarity_defect

SING_TOL = 1e-12


def _trig(k, lengths):
    kl = np.multiply.outer(k, np.asarray(lengths, dtype=float))
    return np.sin(kl), np.cos(kl)


def c1_matrix(k, lengths, lead_count=0) -> np.ndarray:
    """Boundary values (f(0), f(l)) per edge from (a, b); identity on leads.

    ``k`` may be an array; the matrices are then stacked along leading axes.
    """
    k = np.asarray(k, dtype=complex)
    N = len(lengths)
    s, c = _trig(k, lengths)
    C = np.zeros(k.shape + (2 * N + lead_count,) * 2, dtype=complex)
    r = np.arange(N) * 2
    C[..., r, r + 1] = 1.0
    C[..., r + 1, r] = s
    C[..., r + 1, r + 1] = c
    C[..., 2 * N:, 2 * N:] = np.eye(lead_count)
    return C


def c2_matrix(k, lengths, lead_count=0) -> np.ndarray:
    """Outward derivatives divided by k; ``i I`` on leads."""
    k = np.asarray(k, dtype=complex)
    N = len(lengths)
    s, c = _trig(k, lengths)
    C = np.zeros(k.shape + (2 * N + lead_count,) * 2, dtype=complex)
    r = np.arange(N) * 2
    C[..., r, r] = 1.0
    C[..., r + 1, r] = -c
    C[..., r + 1, r + 1] = s
    C[..., 2 * N:, 2 * N:] = 1j * np.eye(lead_count)
    return C


def secular_matrix(k, fg: FlowerGraph) -> np.ndarray:
    k = np.asarray(k, dtype=complex)
    U = fg.U
    I = np.eye(U.shape[0])
    C1 = c1_matrix(k, fg.lengths, fg.lead_count)
    C2 = c2_matrix(k, fg.lengths, fg.lead_count)
    return (U - I) @ C1 + 1j * k[..., None, None] * ((U + I) @ C2)


def secular_matrix_derivative(k, fg: FlowerGraph) -> np.ndarray:
    """d/dk of :func:`secular_matrix`."""
    k = np.asarray(k, dtype=complex)
    U = fg.U
    I = np.eye(U.shape[0])
    N, M = fg.N, fg.lead_count
    lengths = np.asarray(fg.lengths, dtype=float)
    s, c = _trig(k, lengths)
    r = np.arange(N) * 2
    dC1 = np.zeros(k.shape + (2 * N + M,) * 2, dtype=complex)
    dC1[..., r + 1, r] = lengths * c
    dC1[..., r + 1, r + 1] = -lengths * s
    dC2 = np.zeros_like(dC1)
    dC2[..., r + 1, r] = lengths * s
    dC2[..., r + 1, r + 1] = lengths * c
    C2 = c2_matrix(k, fg.lengths, M)
    kk = k[..., None, None]
    return (U - I) @ dC1 + 1j * ((U + I) @ C2) + 1j * kk * ((U + I) @ dC2)


def secular_log_derivative(k, fg: FlowerGraph):
    """(det A, tr(A^{-1} A')) for the secular matrix A at the points k."""
    k = np.asarray(k, dtype=complex)
    A = secular_matrix(k, fg)
    dA = secular_matrix_derivative(k, fg)
    f = np.linalg.det(A)
    with np.errstate(all="ignore"):
        try:
            g = np.trace(np.linalg.solve(A, dA), axis1=-2, axis2=-1)
        except np.linalg.LinAlgError:
            g = np.array([np.trace(np.linalg.lstsq(a, d, rcond=None)[0]) if abs(x) > 0 else np.inf
                          for a, d, x in zip(A.reshape(-1, *A.shape[-2:]), dA.reshape(-1, *A.shape[-2:]),
                                             f.ravel())]).reshape(f.shape)
    return f, g


def secular_det(k, fg: FlowerGraph):
    """det[(U - I) C1(k) + ik (U + I) C2(k)]; an entire function of k.

    Scalar k gives a complex number, an array of k gives an array.
    """
    if fg.U.shape[0] == 0:
        return np.ones(np.shape(k), dtype=complex) if np.ndim(k) else 1.0 + 0j
    d = np.linalg.det(secular_matrix(k, fg))
    return complex(d) if np.ndim(k) == 0 else d


# -- effective coupling ---------------------------------------------------------

@dataclass(frozen=True)
class EffectiveCouplingBlocks:
    U1: np.ndarray
    U2: np.ndarray
    U3: np.ndarray
    U4: np.ndarray

    @classmethod
    def from_flower(cls, fg: FlowerGraph) -> "EffectiveCouplingBlocks":
        return cls(*fg.blocks())

    def assembled(self) -> np.ndarray:
        return np.block([[self.U1, self.U2], [self.U3, self.U4]])

    def is_unitary(self) -> bool:
        return unitarity_defect(self.assembled()) <= UNITARY_TOL


def exterior_matrix(k, U4) -> np.ndarray:
    """(1 - k) U4 - (k + 1) I."""
    k = complex(k)
    return (1 - k) * U4 - (k + 1) * np.eye(U4.shape[0])


def exterior_is_regular(k, U4, tol=SING_TOL) -> bool:
    R = exterior_matrix(k, U4)
    if R.size == 0:
        return True
    scale = max(np.max(np.abs(R)), 1.0) ** R.shape[0]
    return abs(np.linalg.det(R)) > tol * scale


def effective_coupling(k, blocks: EffectiveCouplingBlocks) -> np.ndarray:
    """Energy-dependent coupling on the compact part after eliminating the leads.

    ``U1 - (1 - k) U2 [(1 - k) U4 - (k + 1) I]^{-1} U3``. Not unitary in general.
    """
    k = complex(k)
    if blocks.U4.size == 0:
        return np.array(blocks.U1, dtype=complex)
    R = exterior_matrix(k, blocks.U4)
    if not exterior_is_regular(k, blocks.U4):
        raise SingularExterior(f"(1-k)U4 - (k+1)I is singular at k={k}")
    return blocks.U1 - (1 - k) * blocks.U2 @ np.linalg.solve(R, blocks.U3)


# -- compact (half-shifted) formulation ----------------------------------------

def d_matrices(k, lengths) -> tuple[np.ndarray, np.ndarray]:
    """D1, D2 for the symmetric Ansatz A sin k(x - l/2) + B cos k(x - l/2)."""
    k = np.asarray(k, dtype=complex)
    lengths = np.asarray(lengths, dtype=float)
    N = len(lengths)
    s, c = _trig(k / 2, lengths)
    ik = 1j * k[..., None]
    D1 = np.zeros(k.shape + (2 * N, 2 * N), dtype=complex)
    D2 = np.zeros_like(D1)
    r = np.arange(N) * 2
    D1[..., r, r] = -s + ik * c
    D1[..., r, r + 1] = c + ik * s
    D1[..., r + 1, r] = s - ik * c
    D1[..., r + 1, r + 1] = c + ik * s
    D2[..., r, r] = s + ik * c
    D2[..., r, r + 1] = -c + ik * s
    D2[..., r + 1, r] = -s - ik * c
    D2[..., r + 1, r + 1] = -c + ik * s
    return D1, D2


def compact_secular_det(k, U, lengths) -> complex:
    """det[U D1(k) + D2(k)] for a lead-free flower with coupling U (2N x 2N)."""
    U = np.asarray(U, dtype=complex)
    if U.shape != (2 * len(lengths),) * 2:
        raise ValueError(f"U must be {2 * len(lengths)}x{2 * len(lengths)}, got {U.shape}")
    if U.shape[0] == 0:
        return np.ones(np.shape(k), dtype=complex) if np.ndim(k) else 1.0 + 0j
    D1, D2 = d_matrices(k, lengths)
    d = np.linalg.det(U @ D1 + D2)
    return complex(d) if np.ndim(k) == 0 else d


def effective_secular_det(k, fg: FlowerGraph) -> complex:
    """compact_secular_det with the lead-eliminated coupling substituted for U."""
    Ut = effective_coupling(k, EffectiveCouplingBlocks.from_flower(fg))
    return compact_secular_det(k, Ut, fg.lengths)


# -- scattering ---------------------------------------------------------------------

def _scattering_system(k, fg: FlowerGraph):
    A = secular_matrix(k, fg)
    U = fg.U
    I = np.eye(U.shape[0])
    C1 = c1_matrix(k, fg.lengths, fg.lead_count)
    # B differs from A only in the sign of the (U - I) C1 term
    B = A - 2 * ((U - I) @ C1)
    return A, B


def _solve_checked(A, B, k):
    sv = np.linalg.svd(A, compute_uv=False)
    bad = sv[..., -1] <= SING_TOL * sv[..., 0]
    if np.any(bad):
        where = np.asarray(k)[bad] if np.ndim(k) else k
        raise SingularAtK(f"interior system singular at k={where}")
    return np.linalg.solve(A, B)


def smatrix(k, fg: FlowerGraph) -> np.ndarray:
    """On-shell S(k): maps incoming amplitudes c to outgoing amplitudes d.

    An array of k gives a stack of matrices.
    """
    M = fg.lead_count
    if M < 1:
        raise ValueError("the S-matrix needs at least one lead")
    A, B = _scattering_system(k, fg)
    n = 2 * fg.N
    # one column per unit incoming wave; rhs is B restricted to the lead columns
    Z = _solve_checked(A, B[..., :, n:], k)
    return Z[..., n:, :]


def smatrix_inverse(k, fg: FlowerGraph) -> np.ndarray:
    """S(k)^{-1} built directly (outgoing -> incoming), regular at resonances.

    Treats the outgoing amplitudes d as data and solves for interior
    coefficients and incoming amplitudes c.
    """
    M = fg.lead_count
    if M < 1:
        raise ValueError("the S-matrix needs at least one lead")
    A, B = _scattering_system(k, fg)
    n = 2 * fg.N
    # coefficient of c in the full relation is -B on the lead columns
    lhs = np.concatenate([A[..., :, :n], -B[..., :, n:]], axis=-1)
    Z = _solve_checked(lhs, -A[..., :, n:], k)
    return Z[..., n:, :]


# -- secular families ---------------------------------------------------------------

class FamilyKind(enum.Enum):
    FULL_RESOLVENT = "FullResolvent"
    COMPACT_HALF_SHIFT = "CompactHalfShift"
    EFFECTIVE_COMPACT = "EffectiveCompact"
    LOOP_EXAMPLE = "LoopExample"
    CROSS_EXAMPLE = "CrossExample"


@dataclass(frozen=True)
class SecularFamily:
    """A complex function F(k, lam) together with what it encodes.

    ``singular_points`` lists k values (possibly depending on nothing) where F
    is not defined; search regions should avoid them.
    """
    kind: FamilyKind
    func: Callable[[complex, float], complex]
    params: object = None
    singular_points: tuple = ()
    perturbative_step: Callable | None = field(default=None, compare=False)

    def __call__(self, k, lam=0.0) -> complex:
        return self.func(k, lam)

    def at(self, lam) -> Callable[[complex], complex]:
        f = self.func
        return lambda k: f(k, lam)


def graph_family(builder: Callable[[float], FlowerGraph], kind=FamilyKind.FULL_RESOLVENT,
                 params=None) -> SecularFamily:
    """Family from a parameter-to-graph map, evaluated with the chosen determinant."""
    if kind is FamilyKind.FULL_RESOLVENT:
        def func(k, lam):
            return secular_det(k, builder(lam))
    elif kind is FamilyKind.EFFECTIVE_COMPACT:
        def func(k, lam):
            return effective_secular_det(k, builder(lam))
    elif kind is FamilyKind.COMPACT_HALF_SHIFT:
        def func(k, lam):
            fg = builder(lam)
            return compact_secular_det(k, fg.U, fg.lengths)
    else:
        raise ValueError(f"{kind} is not a graph-based family")
    return SecularFamily(kind, func, params)


def secular_function(fg: FlowerGraph, kind: str = "full") -> Callable:
    """One-argument, array-aware F(k) for the numerics routines.

    ``kind`` is ``"full"`` (secular_det), ``"compact"`` (lead-free half-shifted
    determinant) or ``"sinv"`` (det of S^{-1}).
    """
    if kind == "full":
        def F(k):
            return secular_det(k, fg)
        F.vectorized = True
        if fg.U.shape[0]:
            F.log_derivative = lambda zs: secular_log_derivative(zs, fg)
    elif kind == "compact":
        def F(k):
            return compact_secular_det(k, fg.U, fg.lengths)
        F.vectorized = True
    elif kind == "sinv":
        def F(k):
            d = np.linalg.det(smatrix_inverse(k, fg))
            return complex(d) if np.ndim(k) == 0 else d
        F.vectorized = True
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return F


def singularity_ratio(matrix_fn: Callable, z: complex, radius: float = 1e-3, samples: int = 16) -> float:
    """Smallest singular value of ``matrix_fn(z)`` relative to its median on a circle around z.

    Small values mean the matrix is singular at z and not merely small nearby;
    this also works for 1 x 1 matrices, where sigma_min / sigma_max is useless.
    """
    ring = z + radius * np.exp(2j * np.pi * np.arange(samples) / samples)
    s0 = np.linalg.svd(np.asarray(matrix_fn(z)), compute_uv=False)[-1]
    ref = np.median([np.linalg.svd(np.asarray(matrix_fn(w)), compute_uv=False)[-1] for w in ring])
    return float(s0 / ref) if ref > 0 else math.inf

"""Closed-form resonance conditions for two worked graphs.

*Loop*: two edges of lengths ``l(1 - lam)`` and ``l(1 + lam)`` joined at both
ends, one lead at each junction, with tunable attachment of the leads.
*Cross*: two dangling edges (Dirichlet at the loose ends) and two leads
meeting at one delta-coupled vertex.

All functions accept a scalar or a numpy array for ``k``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import PoleOfBeta, UndefinedAngle, VanishingCoefficient
from .graph import Custom, Delta, Dirichlet, MetricGraph, flowerize
from .numerics import newton_root
from .spectral import FamilyKind, SecularFamily, graph_family


def _xp(k):
    return cmath if np.ndim(k) == 0 else np


@dataclass(frozen=True)
class LoopParams:
    """Loop resonator. Pairs are (junction 1, junction 2).

    ``alpha_inv`` and ``alpha_tilde_inv`` are the inverse coupling strengths on
    the loop and lead side, ``gamma_sq`` the squared loop-lead couplings.
    """
    alpha_inv: tuple[float, float] = (0.0, 0.0)
    alpha_tilde_inv: tuple[float, float] = (0.0, 0.0)
    gamma_sq: tuple[float, float] = (1.0, 1.0)
    l: float = 1.0
    lam: float = 0.0

    def __post_init__(self):
        if not self.l > 0:
            raise ValueError("l must be positive")
        if min(self.gamma_sq) < 0:
            raise ValueError("gamma_sq entries must be nonnegative")

    def at(self, lam) -> "LoopParams":
        return replace(self, lam=float(lam))

    def lengths(self, lam=None):
        lam = self.lam if lam is None else lam
        return self.l * (1 - lam), self.l * (1 + lam)


@dataclass(frozen=True)
class CrossParams:
    alpha: float = 1.0
    l: float = 1.0
    lam: float = 0.0

    def __post_init__(self):
        if not self.l > 0:
            raise ValueError("l must be positive")

    def at(self, lam) -> "CrossParams":
        return replace(self, lam=float(lam))

    def lengths(self, lam=None):
        lam = self.lam if lam is None else lam
        return self.l * (1 - lam), self.l * (1 + lam)


# -- loop ------------------------------------------------------------------------------

def beta_inv(k, alpha_inv, alpha_tilde_inv, gamma_sq):
    """alpha^{-1} + i k |gamma|^2 / (1 - i k alpha~^{-1})."""
    den = 1 - 1j * k * alpha_tilde_inv
    if np.ndim(k) == 0 and abs(den) < 1e-14:
        raise PoleOfBeta(f"k = {k} is a pole of beta (k = -i / alpha_tilde_inv)")
    return alpha_inv + 1j * k * gamma_sq / den


def beta_inv_prime(k, alpha_tilde_inv, gamma_sq):
    """d/dk of beta_inv: i |gamma|^2 / (1 - i k alpha~^{-1})^2."""
    return 1j * gamma_sq / (1 - 1j * k * alpha_tilde_inv) ** 2


def _betas(k, p: LoopParams):
    b1 = beta_inv(k, p.alpha_inv[0], p.alpha_tilde_inv[0], p.gamma_sq[0])
    b2 = beta_inv(k, p.alpha_inv[1], p.alpha_tilde_inv[1], p.gamma_sq[1])
    return b1, b2


def loop_secular(k, p: LoopParams, lam=None):
    """Product form: sin kl(1-lam) sin kl(1+lam) - 4k^2 b1 b2 sin^2 kl + k (b1 + b2) sin 2kl."""
    xp = _xp(k)
    lam = p.lam if lam is None else lam
    l = p.l
    b1, b2 = _betas(k, p)
    s = xp.sin(k * l)
    return (xp.sin(k * l * (1 - lam)) * xp.sin(k * l * (1 + lam))
            - 4 * k ** 2 * b1 * b2 * s ** 2 + k * (b1 + b2) * xp.sin(2 * k * l))


def loop_secular2(k, p: LoopParams, lam=None):
    """Cosine form, equal to twice :func:`loop_secular`; used for tracking."""
    xp = _xp(k)
    lam = p.lam if lam is None else lam
    l = p.l
    b1, b2 = _betas(k, p)
    s = xp.sin(k * l)
    return (xp.cos(2 * k * l * lam) - xp.cos(2 * k * l)
            - 8 * k ** 2 * b1 * b2 * s ** 2 + 2 * k * (b1 + b2) * xp.sin(2 * k * l))


def loop_perturbative_step(k0, lam, eps, p: LoopParams) -> complex:
    """Leading-order shift of a root ``k0`` at ``lam`` when lam -> lam + eps.

    Solves the linearised relation ``kappa * f(k0) = g(lam, eps)`` where ``f``
    is the k-derivative of the product form at the new parameter and
    ``g = sin(k0 l (2 lam + eps)) sin(k0 l eps)``.
    """
    k0 = complex(k0)
    l = p.l
    b1, b2 = _betas(k0, p)
    bt1 = beta_inv_prime(k0, p.alpha_tilde_inv[0], p.gamma_sq[0])
    bt2 = beta_inv_prime(k0, p.alpha_tilde_inv[1], p.gamma_sq[1])
    sin, cos = cmath.sin, cmath.cos
    s2 = sin(2 * k0 * l)
    f = (l * (s2 - lam * sin(2 * k0 * l * lam))
         - 4 * l * k0 ** 2 * b1 * b2 * s2
         - 4 * (2 * k0 * b1 * b2 + k0 ** 2 * (b1 * bt2 + bt1 * b2)) * sin(k0 * l) ** 2
         + (b1 + b2 + bt1 * k0 + bt2 * k0) * s2
         + 2 * l * k0 * (b1 + b2) * cos(2 * k0 * l)
         - l * (eps * cos(k0 * l * eps) * sin(k0 * l * (2 * lam + eps))
                + (2 * lam + eps) * cos(k0 * l * (2 * lam + eps)) * sin(k0 * l * eps)))
    g = sin(k0 * l * (2 * lam + eps)) * sin(k0 * l * eps)
    if eps == 0:
        return 0j
    if abs(f) < 1e-300:
        raise VanishingCoefficient(f"coefficient of kappa vanishes at k0={k0}, lam={lam}")
    return g / f


def loop_angle(p: LoopParams, n: int) -> float:
    """Departure angle (downward positive) of the pole leaving k0 = n pi / l.

    Equals ``arctan(num / den)`` with num, den the imaginary and real part of
    ``beta_1^{-1} + beta_2^{-1}`` at k0; computed with atan2 so a vanishing
    denominator gives pi/2 and a negative one a leftward-moving pole.
    """
    k0 = n * math.pi / p.l
    num = den = 0.0
    den += p.alpha_inv[0] + p.alpha_inv[1]
    for at, g in zip(p.alpha_tilde_inv, p.gamma_sq):
        q = 1 + k0 ** 2 * at ** 2
        num += k0 * g / q
        den -= k0 ** 2 * g * at / q
    if num == 0 and den == 0:
        raise UndefinedAngle("angle undefined: beta_1^{-1} + beta_2^{-1} vanishes")
    return math.atan2(num, den)


def loop_im_bound(n: int, p: LoopParams) -> float:
    """Leading high-energy bound on |Im kappa| for the pole near n pi / l."""
    if n < 1:
        raise ValueError("n must be positive")
    pre = p.l / (2 * (math.pi * n) ** 2)
    (a1, a2), (t1, t2), (g1, g2) = p.alpha_inv, p.alpha_tilde_inv, p.gamma_sq
    if t1 != 0 and t2 != 0:
        num = g1 / t1 ** 2 + g2 / t2 ** 2
        den = (a1 + a2 - g1 / t1 - g2 / t2) ** 2
        return pre * num / den if den else math.inf
    if t1 == 0 and t2 == 0:
        return pre / (g1 + g2) if g1 + g2 else math.inf
    g = g1 if t1 == 0 else g2
    return pre / g if g else math.inf


def loop_vertex_coupling(alpha_inv, alpha_tilde_inv, gamma_sq) -> np.ndarray:
    """Unitary matrix for one loop junction, slots (edge 1, edge 2, lead).

    Conditions: f1 = f2, f1 = a (f1' + f2') + g * g', and
    g = conj(g) (f1' + f2') + a~ g', written as A psi + B psi' = 0 with
    outward derivatives; then U = -(A + iB)^{-1} (A - iB).
    """
    a, at = float(alpha_inv), float(alpha_tilde_inv)
    gam = math.sqrt(gamma_sq)
    A = np.array([[1, -1, 0], [1, 0, 0], [0, 0, 1]], dtype=complex)
    B = np.array([[0, 0, 0], [-a, -a, -gam], [-gam, -gam, -at]], dtype=complex)
    return -np.linalg.solve(A + 1j * B, A - 1j * B)


def loop_graph(p: LoopParams, lam=None) -> MetricGraph:
    l1, l2 = p.lengths(lam)
    UA = loop_vertex_coupling(p.alpha_inv[0], p.alpha_tilde_inv[0], p.gamma_sq[0])
    UB = loop_vertex_coupling(p.alpha_inv[1], p.alpha_tilde_inv[1], p.gamma_sq[1])
    return MetricGraph(["A", "B"], [("A", "B", l1), ("A", "B", l2)], ["A", "B"],
                       {"A": Custom(UA), "B": Custom(UB)})


# -- cross --------------------------------------------------------------------------------

def cross_secular(k, p: CrossParams, lam=None):
    """2k sin 2kl + (alpha - 2ik)(cos 2kl lam - cos 2kl)."""
    xp = _xp(k)
    lam = p.lam if lam is None else lam
    l = p.l
    return 2 * k * xp.sin(2 * k * l) + (p.alpha - 2j * k) * (xp.cos(2 * k * l * lam) - xp.cos(2 * k * l))


def cross_secular_product(k, p: CrossParams, lam=None):
    """k sin 2kl + (alpha - 2ik) sin kl(1 - lam) sin kl(1 + lam); half of cross_secular."""
    xp = _xp(k)
    lam = p.lam if lam is None else lam
    l = p.l
    return k * xp.sin(2 * k * l) + (p.alpha - 2j * k) * xp.sin(k * l * (1 - lam)) * xp.sin(k * l * (1 + lam))


def cross_perturbative_step(k0, lam, eps, p: CrossParams) -> complex:
    k0 = complex(k0)
    l, alpha = p.l, p.alpha
    sin, cos = cmath.sin, cmath.cos
    if eps == 0:
        return 0j
    w = alpha - 2j * k0
    den = (2j * (cos(2 * k0 * l * (lam + eps)) - cos(2 * k0 * l))
           + w * 2 * l * ((lam + eps) * sin(2 * k0 * l * (lam + eps)) - sin(2 * k0 * l))
           - 2 * sin(2 * k0 * l) - 4 * k0 * l * cos(2 * k0 * l))
    if abs(den) < 1e-300:
        raise VanishingCoefficient(f"denominator vanishes at k0={k0}, lam={lam}")
    return -2 * w * sin(k0 * l * eps) * sin(k0 * l * (2 * lam + eps)) / den


def cross_angle(n: int, alpha: float, l: float = 1.0) -> float:
    """arctan(2 n pi / (alpha l)), taken with atan2 so alpha = 0 gives pi/2."""
    return math.atan2(2 * n * math.pi / l, alpha)


def cross_embedded_points(n_max: int, l: float = 1.0):
    """(k, lam) pairs with kl = n pi / 2 and lam = 1 - 2m/n, 0 <= m <= n/2."""
    pts = []
    for n in range(1, n_max + 1):
        for m in range(0, n // 2 + 1):
            pts.append((n * math.pi / (2 * l), 1 - 2 * m / n, n, m))
    return pts


def cross_graph(p: CrossParams, lam=None) -> MetricGraph:
    l1, l2 = p.lengths(lam)
    return MetricGraph(["C", "E1", "E2"], [("C", "E1", l1), ("C", "E2", l2)], ["C", "C"],
                       {"C": Delta(p.alpha), "E1": Dirichlet(), "E2": Dirichlet()})


# -- families ---------------------------------------------------------------------------------

def as_secular_family(p, from_graph: bool = False) -> SecularFamily:
    """Wrap a parameter set as a lam-dependent secular family.

    With ``from_graph=True`` the family evaluates the full determinant of the
    corresponding metric graph instead of the closed form. A ready
    :class:`SecularFamily` is returned unchanged.
    """
    if isinstance(p, SecularFamily):
        return p
    if isinstance(p, LoopParams):
        if from_graph:
            return graph_family(lambda lam: flowerize(loop_graph(p, lam)), params=p)
        sing = tuple(-1j / t for t in p.alpha_tilde_inv if t != 0)

        def func(k, lam):
            return loop_secular2(k, p, lam)

        def step(k0, lam, eps):
            return loop_perturbative_step(k0, lam, eps, p)
        return SecularFamily(FamilyKind.LOOP_EXAMPLE, func, p, sing, step)
    if isinstance(p, CrossParams):
        if from_graph:
            return graph_family(lambda lam: flowerize(cross_graph(p, lam)), params=p)

        def func(k, lam):
            return cross_secular(k, p, lam)

        def step(k0, lam, eps):
            return cross_perturbative_step(k0, lam, eps, p)
        return SecularFamily(FamilyKind.CROSS_EXAMPLE, func, p, (), step)
    raise TypeError(f"cannot build a secular family from {type(p).__name__}")


# -- named parameter sets ------------------------------------------------------------------

@dataclass(frozen=True)
class Fixture:
    name: str
    params: object
    k0: tuple[complex, ...]
    lam_range: tuple[float, float] = (0.0, 1.0)
    step: float = 1e-3

    def family(self) -> SecularFamily:
        return as_secular_family(self.params)

    def starts(self) -> list[complex]:
        """Starting poles, polished at the beginning of the parameter range."""
        F = self.family().at(self.lam_range[0])
        return [newton_root(F, k) for k in self.k0]


FIXTURES = {
    "fig4": Fixture("fig4", LoopParams((1.0, 0.0), (-2.0, 1.0), (1.0, 1.0), 1.0), (2 * math.pi,), step=5e-5),
    "fig5": Fixture("fig5", LoopParams((1.0, 1.0), (1.0, 1.0), (1.0, 1.0), 1.0), (3 * math.pi,), step=5e-5),
    "fig6": Fixture("fig6", LoopParams((1.0, 1.0), (1.0, 1.0), (1.0, 1.0), 1.0), (2 * math.pi,), step=5e-5),
    "fig8": Fixture("fig8", CrossParams(10.0, 1.0), (2 * math.pi,)),
    "fig9": Fixture("fig9", CrossParams(1.0, 1.0), (2 * math.pi,), (0.0, 0.9)),
    "fig10": Fixture("fig10", CrossParams(2.596, 1.0), (2 * math.pi, 5.46 - 1.07j), (0.0, 0.9)),
}


def fixture(name: str) -> Fixture:
    try:
        return FIXTURES[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None

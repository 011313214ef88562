import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from resograph.embedded import (MultiplicityReport, Parity, RationalLengthSpec, embedded_multiplicity,
                                epsilon_tilde, loop_graph, m_even, m_odd, numerical_rank, perturbed_m)
from resograph.errors import DivisorVanishes
from resograph.graph import flowerize, random_unitary
from resograph.numerics import count_zeros
from resograph.spectral import compact_secular_det, secular_det

seeds = st.integers(0, 2 ** 32 - 1)


def test_numerical_rank():
    assert numerical_rank(np.diag([1.0, 1e-3, 0.0]))[0] == 2
    assert numerical_rank(np.diag([1.0, 1e-12]))[0] == 1
    assert numerical_rank(np.zeros((2, 2)))[0] == 0


def test_insertions_on_identity():
    M = m_even(np.eye(4), 1)
    assert np.allclose(M, [[1, -1], [-1, 1], [0, 0], [0, 0]])
    assert numerical_rank(M)[0] == 1
    # U = I is a Neumann interval, an eigenvalue at every k l = m pi
    assert numerical_rank(m_odd(np.eye(4), 1))[0] == 1


def test_dirichlet_interval_is_even_and_odd():
    # U = -I: every k l = m pi is an eigenvalue of the isolated interval
    U = -np.eye(2)
    assert embedded_multiplicity(U, 1, "even").multiplicity_lower_bound == 1
    assert embedded_multiplicity(U, 1, "odd").multiplicity_lower_bound == 1


def test_input_checks():
    with pytest.raises(ValueError):
        m_even(np.eye(3)[:, :2], 1)
    with pytest.raises(ValueError):
        m_even(np.eye(4), 3)
    with pytest.raises(ValueError):
        RationalLengthSpec(0.0, (1,))
    with pytest.raises(ValueError):
        RationalLengthSpec(1.0, (1, 2), (0.1,))
    with pytest.raises(ValueError):
        RationalLengthSpec(1.0, (1,)).k0(0, Parity.EVEN)


@settings(max_examples=30)
@given(seeds, st.integers(1, 3))
def test_rank_ignores_later_columns_and_row_mixing(seed, n):
    rng = np.random.default_rng(seed)
    N = n + int(rng.integers(0, 2))
    U = random_unitary(2 * N + int(rng.integers(0, 2)), rng)
    base = embedded_multiplicity(U, n, "even").rank
    # left multiplication by an invertible matrix keeps the rank
    T = random_unitary(U.shape[0], rng) @ np.diag(rng.uniform(0.5, 2, U.shape[0]))
    assert numerical_rank(T @ m_even(U, n))[0] == base
    U2 = U.copy()
    U2[:, 2 * n:] = 0
    assert embedded_multiplicity(U2, n, "even").rank == base


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_delta_loop_bounds(n):
    U = flowerize(loop_graph(n, "delta", alpha=1.3)).U
    assert embedded_multiplicity(U, n, "even").multiplicity_lower_bound == 1
    assert embedded_multiplicity(U, n, "odd").multiplicity_lower_bound == (1 if n % 2 == 0 else 0)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_delta_prime_loop_bounds(n):
    U = flowerize(loop_graph(n, "delta_prime_s", alpha=1.3)).U
    assert (embedded_multiplicity(U, n, "even").multiplicity_lower_bound >= 1) == (n % 2 == 0)
    assert embedded_multiplicity(U, n, "odd").multiplicity_lower_bound >= 1


@pytest.mark.parametrize("n,kind,k0", [(3, "delta", 2 * math.pi), (4, "delta_prime_s", 3 * math.pi)])
def test_bound_seen_by_census(n, kind, k0):
    fg = flowerize(loop_graph(n, kind, alpha=0.8))
    parity = "even" if round(k0 / math.pi) % 2 == 0 else "odd"
    bound = embedded_multiplicity(fg.U, n, parity).multiplicity_lower_bound
    c = count_zeros(lambda k: compact_secular_det(k, fg.U, fg.lengths), (k0 - 1e-3, k0 + 1e-3, -1e-3, 1e-3))
    assert c.count >= bound >= 1


def test_epsilon_tilde():
    ea, eb = epsilon_tilde(2 * math.pi, 1.0, [0.0, 1e-3])
    assert ea[0] == 0 and eb[0] == 0
    assert abs(ea[1]) > 0 and abs(eb[1]) > 0
    # both corrections are first order in eps
    ea2, eb2 = epsilon_tilde(2 * math.pi, 1.0, [5e-4])
    assert abs(abs(ea[1]) / abs(ea2[0]) - 2) < 1e-2 and abs(abs(eb[1]) / abs(eb2[0]) - 2) < 1e-2
    with pytest.raises(DivisorVanishes):
        epsilon_tilde(0.0, 1.0, [0.0])


@settings(max_examples=20)
@given(seeds, st.sampled_from(["even", "odd"]))
def test_zero_perturbation_reduces_to_unperturbed(seed, parity):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    U = random_unitary(2 * n + 1, rng)
    spec = RationalLengthSpec(1.0, (1,) * n)
    M, rep = perturbed_m(U, spec, spec.k0(1, parity), parity)
    ref = m_even(U, n) if parity == "even" else m_odd(U, n)
    assert np.allclose(M, ref)
    assert rep.rank == embedded_multiplicity(U, n, parity).rank
    assert not rep.perturbed


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("eps_first", [1e-4, 1e-3])
def test_perturbation_cannot_raise_multiplicity(n, eps_first):
    fg = flowerize(loop_graph(n, "delta", alpha=1.3))
    eps = np.zeros(n)
    eps[0] = eps_first
    spec = RationalLengthSpec(1.0, (1,) * n, tuple(eps))
    for parity, k0 in (("even", 2 * math.pi), ("odd", 3 * math.pi)):
        base = embedded_multiplicity(fg.U, n, parity).multiplicity_lower_bound
        _, rep = perturbed_m(fg.U, spec, k0, parity)
        assert rep.perturbed
        assert rep.multiplicity_lower_bound <= base


def test_rational_spec_lengths_and_k0():
    spec = RationalLengthSpec(0.5, (1, 2), (0.0, 0.01))
    assert spec.lengths() == pytest.approx([0.5, 1.005])
    assert spec.k0(1, "even") == pytest.approx(4 * math.pi)
    assert spec.k0(0, Parity.ODD) == pytest.approx(2 * math.pi)


def test_report_dict():
    rep = MultiplicityReport(1.0, Parity.ODD, 3, 2)
    assert rep.as_dict() == {"k0": 1.0, "parity": "odd", "n": 2, "rank": 3,
                             "multiplicity_lower_bound": 1, "perturbed": False}


def test_loop_graph_structure():
    g = loop_graph(3, "delta", alpha=2.0, multipliers=[1, 2, 1], eps=[0, 0.1, 0], leads=2)
    assert [(e.a, e.b) for e in g.edges] == [(0, 1), (1, 2), (2, 0)]
    assert g.lengths == pytest.approx([1.0, 2.1, 1.0])
    assert len(g.leads) == 6 and g.degree(0) == 4
    with pytest.raises(ValueError):
        loop_graph(0)
    with pytest.raises(ValueError):
        loop_graph(2, "weird")


def test_embedded_eigenvalue_is_real_zero_with_leads():
    fg = flowerize(loop_graph(2, "delta", alpha=1.3, leads=1))
    assert abs(secular_det(2 * math.pi, fg)) < 1e-10

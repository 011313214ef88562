import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from resograph.errors import PoleOfBeta, UndefinedAngle
from resograph.graph import flowerize, unitarity_defect
from resograph.models import (FIXTURES, CrossParams, LoopParams, as_secular_family, beta_inv,
                              beta_inv_prime, cross_angle, cross_embedded_points, cross_graph,
                              cross_secular, cross_secular_product, fixture, loop_angle, loop_graph,
                              loop_im_bound, loop_secular, loop_secular2, loop_vertex_coupling)
from resograph.numerics import find_zeros, newton_root
from resograph.spectral import secular_det

small = st.floats(-3, 3, allow_nan=False)
loop_params = st.builds(LoopParams, st.tuples(small, small), st.tuples(small, small),
                        st.tuples(st.floats(0, 3), st.floats(0, 3)), st.floats(0.5, 2), st.floats(0, 0.9))
ks = st.builds(complex, st.floats(0.1, 15), st.floats(-2, 0.5))


def test_beta_trivial_cases():
    assert beta_inv(3.0, 0.0, 0.0, 0.0) == 0
    assert beta_inv(3.0, 0.5, 0.0, 2.0) == pytest.approx(0.5 + 6j)
    assert beta_inv_prime(3.0, 0.0, 2.0) == pytest.approx(2j)


def test_beta_frozen_value():
    # 1 + 2 pi i / (1 + 4 pi i)
    assert beta_inv(2 * math.pi, 1.0, -2.0, 1.0) == pytest.approx(1.4968536375839372 + 0.03953835620733635j, rel=1e-14)


def test_beta_pole():
    with pytest.raises(PoleOfBeta):
        beta_inv(-1j, 0.0, 1.0, 1.0)


@given(ks, small, st.floats(0, 3))
def test_beta_prime_matches_difference(k, at, g):
    if abs(1 - 1j * k * at) < 1e-2:
        return
    h = 1e-6
    fd = (beta_inv(k + h, 0.0, at, g) - beta_inv(k - h, 0.0, at, g)) / (2 * h)
    assert abs(beta_inv_prime(k, at, g) - fd) <= 1e-5 * max(1.0, abs(fd))


@given(ks, loop_params)
def test_loop_forms_differ_by_two(k, p):
    if any(abs(1 - 1j * k * t) < 1e-3 for t in p.alpha_tilde_inv):
        return
    a, b = loop_secular(k, p), loop_secular2(k, p)
    assert abs(b - 2 * a) <= 1e-9 * max(1.0, abs(b))


@given(ks, loop_params)
def test_loop_conjugation_symmetry(k, p):
    if any(abs(1 - 1j * k * t) < 1e-3 for t in p.alpha_tilde_inv):
        return
    f = loop_secular(k, p)
    assert abs(loop_secular(-k.conjugate(), p) - f.conjugate()) <= 1e-9 * max(1.0, abs(f))


def test_cross_frozen_value():
    # 4 sin 4 + (10 - 4i)(cos 1.2 - cos 4)
    assert cross_secular(2.0, CrossParams(10.0, 1.0), 0.3) == pytest.approx(
        7.132803772171145 - 4.064005501361143j, rel=1e-14)


@given(ks, st.floats(-5, 20), st.floats(0.5, 2), st.floats(0, 1))
def test_cross_forms_and_symmetry(k, alpha, l, lam):
    p = CrossParams(alpha, l)
    f = cross_secular(k, p, lam)
    scale = max(1.0, abs(f))
    assert abs(f - 2 * cross_secular_product(k, p, lam)) <= 1e-9 * scale
    assert abs(cross_secular(-k.conjugate(), p, lam) - f.conjugate()) <= 1e-9 * scale


def test_array_evaluation():
    p = fixture("fig4").params
    k = np.array([6.0 - 0.1j, 7.0 - 0.2j])
    assert np.allclose(loop_secular2(k, p, 0.2), [loop_secular2(complex(z), p, 0.2) for z in k])
    q = CrossParams(2.0)
    assert np.allclose(cross_secular(k, q, 0.2), [cross_secular(complex(z), q, 0.2) for z in k])


@pytest.mark.parametrize("a,at,g", [(0.0, 0.0, 1.0), (1.0, -2.0, 1.0), (0.3, 1.5, 2.0), (2.0, 0.0, 0.0)])
def test_loop_vertex_coupling_unitary(a, at, g):
    assert unitarity_defect(loop_vertex_coupling(a, at, g)) <= 1e-12


@pytest.mark.parametrize("name,lam", [("fig4", 0.0), ("fig4", 0.37), ("fig5", 0.6), ("fig6", 0.2)])
def test_loop_zeros_match_graph(name, lam):
    p = fixture(name).params
    box = (4.0, 10.0, -1.5, -1e-3)
    closed = find_zeros(lambda k: loop_secular(k, p, lam), box)
    fg = flowerize(loop_graph(p, lam))
    graph = find_zeros(lambda k: secular_det(k, fg), box)
    assert sum(m for _, m in closed) == sum(m for _, m in graph) > 0
    for (z1, _), (z2, _) in zip(closed, graph):
        assert abs(z1 - z2) < 1e-8


@pytest.mark.parametrize("alpha,lam", [(10.0, 0.25), (1.0, 0.5), (2.596, 0.1)])
def test_cross_zeros_match_graph(alpha, lam):
    p = CrossParams(alpha, 1.0)
    box = (1.0, 10.0, -2.0, -1e-3)
    closed = find_zeros(lambda k: cross_secular(k, p, lam), box)
    fg = flowerize(cross_graph(p, lam))
    graph = find_zeros(lambda k: secular_det(k, fg), box)
    assert sum(m for _, m in closed) == sum(m for _, m in graph) > 0
    for (z1, _), (z2, _) in zip(closed, graph):
        assert abs(z1 - z2) < 1e-8


def test_graph_family_agrees_with_closed_form():
    p = fixture("fig8").params
    closed, graph = as_secular_family(p), as_secular_family(p, from_graph=True)
    k = newton_root(closed.at(0.4), 7.0 - 0.3j)
    assert abs(newton_root(graph.at(0.4), k) - k) < 1e-9
    assert as_secular_family(closed) is closed
    with pytest.raises(TypeError):
        as_secular_family(3.0)


def _perturbative_errors(name, lam, k_guess, eps_list):
    fam = fixture(name).family()
    k0 = newton_root(fam.at(lam), k_guess)
    out = []
    for eps in eps_list:
        exact = newton_root(fam.at(lam + eps), k0)
        out.append(abs(k0 + fam.perturbative_step(k0, lam, eps) - exact))
    return out


@pytest.mark.parametrize("name", ["fig4", "fig8"])
def test_perturbative_step_second_order(name):
    e = _perturbative_errors(name, 0.3, 2 * math.pi - 0.05j, [1e-2, 5e-3, 2.5e-3])
    assert 3.0 < e[0] / e[1] < 5.5 and 3.0 < e[1] / e[2] < 5.5


@pytest.mark.parametrize("name", ["fig4", "fig8"])
def test_perturbative_step_fourth_order_at_symmetric_point(name):
    # lam -> -lam symmetry removes the odd terms at lam = 0
    e = _perturbative_errors(name, 0.0, 2 * math.pi - 0.05j, [1e-2, 5e-3, 2.5e-3])
    assert 12.0 < e[0] / e[1] < 20.0 and 12.0 < e[1] / e[2] < 20.0


def test_loop_angle_limits():
    assert loop_angle(LoopParams((0, 0), (0, 0), (1, 1)), 3) == pytest.approx(math.pi / 2, abs=1e-15)
    assert loop_angle(LoopParams((1, 0.5), (1, -2), (0, 0)), 3) == 0.0
    assert loop_angle(LoopParams((-1, 0), (0, 0), (0, 0)), 1) == pytest.approx(math.pi)
    with pytest.raises(UndefinedAngle):
        loop_angle(LoopParams((0, 0), (1, 1), (0, 0)), 2)


def test_loop_angle_frozen():
    # k0 = 2 pi, fig4: num = 2 pi / (1 + 16 pi^2) + 2 pi / (1 + 4 pi^2),
    # den = 1 + 8 pi^2 / (1 + 16 pi^2) - 4 pi^2 / (1 + 4 pi^2)
    k = 2 * math.pi
    num = k / (1 + 4 * k * k) + k / (1 + k * k)
    den = 1 + 2 * k * k / (1 + 4 * k * k) - k * k / (1 + k * k)
    assert loop_angle(fixture("fig4").params, 2) == pytest.approx(math.atan(num / den), rel=1e-14)


def test_cross_angle():
    assert cross_angle(1, 0.0) == pytest.approx(math.pi / 2)
    assert cross_angle(2, 10.0, 1.0) == pytest.approx(math.atan(4 * math.pi / 10))
    assert cross_angle(1, -1.0) > math.pi / 2


def test_im_bound_scaling():
    for p in (LoopParams((2, 2), (1, 1), (1, 1)), LoopParams((0, 0), (0, 0), (1, 2)),
              LoopParams((0, 0), (1, 0), (1, 3))):
        assert loop_im_bound(6, p) / loop_im_bound(3, p) == pytest.approx(0.25)
    assert loop_im_bound(2, LoopParams((0, 0), (0, 0), (1, 2))) == pytest.approx(1 / (2 * 4 * math.pi ** 2 * 3))
    assert math.isinf(loop_im_bound(2, LoopParams((1, 1), (1, 1), (1, 1))))
    with pytest.raises(ValueError):
        loop_im_bound(0, LoopParams())


def test_cross_embedded_points_are_zeros():
    pts = cross_embedded_points(6)
    assert len(pts) == sum(n // 2 + 1 for n in range(1, 7))
    for k, lam, n, m in pts:
        assert k == pytest.approx(n * math.pi / 2) and lam == pytest.approx(1 - 2 * m / n)
        assert abs(cross_secular(k, CrossParams(3.0), lam)) < 1e-10


def test_fixtures_start_on_roots():
    for name, fx in FIXTURES.items():
        F = fx.family().at(fx.lam_range[0])
        for k in fx.starts():
            assert abs(F(k)) < 1e-9, name
    with pytest.raises(KeyError):
        fixture("fig99")


def test_param_validation():
    with pytest.raises(ValueError):
        LoopParams(l=0.0)
    with pytest.raises(ValueError):
        LoopParams(gamma_sq=(-1.0, 1.0))
    with pytest.raises(ValueError):
        CrossParams(l=-1.0)
    assert LoopParams().at(0.3).lengths() == pytest.approx((0.7, 1.3))

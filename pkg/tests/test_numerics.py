import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from resograph.errors import (InsufficientSamples, NoConvergence, QuadratureFailure, StepUnderflow,
                              ZeroOnContour)
from resograph.numerics import (PoleTrajectory, count_zeros, count_zeros_disc, departure_angle, derivative,
                                evaluate, find_zeros, newton_root, newton_solve, track_pole, vectorized)

roots = st.lists(st.builds(complex, st.floats(-0.9, 0.9), st.floats(-0.9, 0.9)), min_size=0, max_size=5)


def _poly(zs):
    zs = list(zs)

    def F(z):
        out = 1.0 + 0j * np.asarray(z)
        for r in zs:
            out = out * (z - r)
        return out
    return F


def test_newton_polynomial():
    assert abs(newton_root(lambda z: z * z + 1, 0.5 + 0.5j) - 1j) < 1e-13
    res = newton_solve(lambda z: z ** 3 - 8, 1.5)
    assert abs(res.root - 2) < 1e-13 and res.iterations < 10
    assert abs(res.derivative - 12) < 1e-5


def test_newton_failure_modes():
    with pytest.raises(NoConvergence):
        newton_root(lambda z: z * z + 1, 0.3, max_iter=3)
    with pytest.raises(NoConvergence):
        newton_root(lambda z: np.exp(z) * 0 + complex("nan"), 1.0)


def test_evaluate_probes_and_falls_back():
    scalar_only = lambda z: complex(z) ** 2  # noqa: E731
    zs = np.array([1.0, 2.0, 3.0j])
    assert np.allclose(evaluate(scalar_only, zs), zs ** 2)
    arr = vectorized(lambda z: np.asarray(z) ** 2)
    assert np.allclose(evaluate(arr, zs), zs ** 2)
    assert derivative(lambda z: z ** 3, 2.0) == pytest.approx(12.0, rel=1e-8)


@settings(max_examples=40, deadline=None)
@given(roots)
def test_census_counts_polynomial_zeros(zs):
    F = _poly(zs)
    # keep the contour away from the roots
    if any(abs(abs(z.real) - 1) < 1e-3 or abs(abs(z.imag) - 1) < 1e-3 for z in zs):
        return
    c = count_zeros(F, (-1, 1, -1, 1))
    assert c.count == len(zs)
    assert c.residual < 0.1
    if zs:
        assert abs(c.centroid() - np.mean(zs)) < 1e-6


@settings(max_examples=30, deadline=None)
@given(roots)
def test_disc_census_matches_box(zs):
    F = _poly(zs)
    inside = sum(abs(z) < 0.95 for z in zs)
    if any(abs(abs(z) - 0.95) < 1e-3 for z in zs):
        return
    assert count_zeros_disc(F, 0, 0.95) == inside


def test_census_residual_small_for_entire_functions():
    c = count_zeros(np.sin, (-10.5, 10.5, -1, 1))
    assert c.count == 7 and c.residual < 1e-8


def test_zero_on_contour():
    with pytest.raises(ZeroOnContour):
        count_zeros(lambda z: z - 1, (0, 1, -1, 1))
    with pytest.raises(ValueError):
        count_zeros(lambda z: z, (1, 0, 0, 1))


def test_non_holomorphic_rejected():
    with pytest.raises((QuadratureFailure, ZeroOnContour)):
        count_zeros(lambda z: np.abs(z) + 0.5 + 0j * z, (-1, 1, -1, 1))


def test_find_zeros_with_multiplicity():
    F = _poly([0.3 - 0.2j, -0.5 + 0.1j, -0.5 + 0.1j, 0.1 + 0.6j])
    found = find_zeros(F, (-1, 1, -1, 1))
    assert [m for _, m in found] == [2, 1, 1]
    assert abs(found[0][0] - (-0.5 + 0.1j)) < 1e-6
    assert abs(found[1][0] - (0.1 + 0.6j)) < 1e-10
    assert abs(found[2][0] - (0.3 - 0.2j)) < 1e-10


def test_find_zeros_of_sine():
    found = find_zeros(np.sin, (0.5, 13, -1, 1))
    assert np.allclose([z for z, _ in found], [math.pi * n for n in range(1, 5)], atol=1e-10)


def _line_family(k, lam):
    # root k(lam) = 2 + lam - i lam^2
    return k - (2 + lam - 1j * lam ** 2)


def test_track_known_path():
    tr = track_pole(_line_family, 2.0, (0.0, 1.0), 0.05)
    assert np.allclose(tr.k, 2 + tr.lam - 1j * tr.lam ** 2, atol=1e-12)
    assert tr.lam[0] == 0.0 and tr.lam[-1] == 1.0
    assert len(tr) == 21
    assert tr.touch_points() == [0.0]
    rows = list(tr.rows())
    assert rows[1][0] == pytest.approx(0.05)


def test_track_backwards():
    tr = track_pole(_line_family, 3 - 1j, (1.0, 0.0), 0.1)
    assert abs(tr.k[-1] - 2) < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.floats(-1, 1), st.floats(0.2, 2), st.floats(0.1, 0.6))
def test_track_reversibility(a, b, span):
    def fam(k, lam):
        return np.sin(k) - lam * (a + b * 1j) * np.cos(2 * k)
    k0 = newton_root(lambda k: fam(k, 0.0), 3.0)
    try:
        fwd = track_pole(fam, k0, (0.0, span), 0.01)
    except StepUnderflow:
        # two roots collide on the way; there is no regular path to reverse
        assume(False)
    back = track_pole(fam, fwd.k[-1], (span, 0.0), 0.01)
    assert abs(back.k[-1] - k0) <= 1e-6


def test_perturbative_predictor_uncorrected():
    step = lambda k, lam, eps: eps - 1j * (2 * lam * eps + eps * eps)  # noqa: E731
    tr = track_pole(_line_family, 2.0, (0.0, 1.0), 0.1, predictor="perturbative", correct=False,
                    perturbative_step=step)
    assert np.allclose(tr.k, 2 + tr.lam - 1j * tr.lam ** 2, atol=1e-12)
    with pytest.raises(ValueError):
        track_pole(_line_family, 2.0, (0.0, 1.0), 0.1, predictor="perturbative")
    with pytest.raises(ValueError):
        track_pole(_line_family, 2.0, (0.0, 1.0), 0.1, predictor="magic")


def test_step_underflow_on_lost_root():
    def fam(k, lam):
        return k * k + (lam - 0.5) if lam <= 0.5 else complex("nan")
    with pytest.raises(StepUnderflow):
        track_pole(fam, 0.5 ** 0.5, (0.0, 1.0), 0.1, min_step=1e-3)


def test_touches_interior():
    # root 2 + lam - i (lam - 0.5)^2 touches the axis only at lam = 0.5
    fam = lambda k, lam: k - (2 + lam - 1j * (lam - 0.5) ** 2)  # noqa: E731
    tr = track_pole(fam, 2 - 0.25j, (0.0, 1.0), 0.01)
    assert tr.touch_points() == pytest.approx([0.5])


@pytest.mark.parametrize("phi", [0.3, math.pi / 2, 2.5, -0.4])
def test_departure_angle_of_straight_line(phi):
    lam = np.linspace(0, 1e-3, 21)
    k = 5 + lam * np.exp(-1j * phi)
    tr = PoleTrajectory(lam, k, np.zeros_like(lam), complex(k[0]), 5e-5)
    assert departure_angle(tr, 20) == pytest.approx(phi, abs=1e-12)


def test_departure_angle_needs_motion():
    lam = np.linspace(0, 1, 5)
    tr = PoleTrajectory(lam, np.full(5, 1 + 0j), np.zeros(5), 1 + 0j, 0.25)
    with pytest.raises(InsufficientSamples):
        departure_angle(tr)
    with pytest.raises(InsufficientSamples):
        departure_angle(PoleTrajectory(lam[:2], np.array([1, 2j]), np.zeros(2), 1 + 0j, 1.0))

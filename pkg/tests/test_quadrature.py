"""Quadrature rules against closed-form integrals."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from residuelab.quadrature import (
    QuadSpec,
    QuadratureError,
    box_rule,
    gauss_legendre,
    integrate_nodes,
    log_radial_rule,
    sphere_rule,
    sphere_volume,
)


def test_gauss_legendre_polynomial_exactness():
    x, w = gauss_legendre(-1.0, 3.0, 8)
    # degree 15 polynomial integrated exactly
    assert w @ x**15 == pytest.approx((3.0**16 - 1.0) / 16.0, rel=1e-13)


def test_box_rule_area_and_gaussian():
    pts, w = box_rule([-1.0, 0.0], [2.0, 1.5], 24)
    assert w.sum() == pytest.approx(3.0 * 1.5, rel=1e-13)
    vals = np.exp(-(pts**2).sum(axis=1))
    expect = quad(lambda t: math.exp(-t * t), -1, 2)[0] * quad(
        lambda t: math.exp(-t * t), 0, 1.5
    )[0]
    assert w @ vals == pytest.approx(expect, rel=1e-12)


def test_sphere_volumes():
    assert sphere_volume(1) == 2.0
    assert sphere_volume(2) == pytest.approx(2 * math.pi)
    assert sphere_volume(3) == pytest.approx(4 * math.pi)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_sphere_rule_total_measure(d):
    dirs, w = sphere_rule(d, 64)
    assert w.sum() == pytest.approx(sphere_volume(d), rel=1e-12)
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0)


def test_sphere_rule_integrates_s1_harmonics():
    dirs, w = sphere_rule(2, 64)
    # cos^2 integrates to pi on the circle, odd harmonics to zero
    assert w @ dirs[:, 0] ** 2 == pytest.approx(math.pi, rel=1e-12)
    assert abs(w @ dirs[:, 0]) < 1e-12


def test_log_radial_rule_log_integral():
    # int_1^R dr/r = log R, integrand in u-space is 1
    u, w = log_radial_rule(0.0, math.log(1e8))
    assert w @ np.ones_like(u) == pytest.approx(math.log(1e8), rel=1e-13)


def test_log_radial_rule_oscillatory_antiderivative():
    # int (sin log u + cos log u) du = u sin log u  (u > 0)
    u_lo, u_hi = math.log(4.0), 1096.0
    u, w = log_radial_rule(u_lo, u_hi)
    vals = np.sin(np.log(u)) + np.cos(np.log(u))
    expect = u_hi * math.sin(math.log(u_hi)) - u_lo * math.sin(math.log(u_lo))
    assert w @ vals == pytest.approx(expect, rel=1e-10)


def test_log_radial_rule_respects_breakpoints():
    u, w = log_radial_rule(0.0, 2.0, breakpoints=(0.5,), spec=QuadSpec(radial_panel_nodes=6))
    # kink at 0.5 integrated exactly because a panel edge sits there
    vals = np.where(u < 0.5, 0.0, 1.0)
    assert w @ vals == pytest.approx(1.5, rel=1e-13)


def test_integrate_nodes_rejects_nonfinite():
    with pytest.raises(QuadratureError):
        integrate_nodes(np.array([1.0, np.inf]), np.array([0.5, 0.5]))

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fhj.core import DomainGeometry, ExteriorData
from fhj.fields import CallableField, DistanceField, GridFunction, Point
from fhj.fracop import (QuadratureError, apply_on_grid, eval_extremal, eval_infsup, eval_linear_pv,
                        eval_operator)
from fhj.kernels import Kernel, OperatorSpec, physical_kernel, unit_kernel

DOM = DomainGeometry.interval()
HALF = DomainGeometry.half_line()


def bump(s):
    return CallableField(lambda y: np.where(np.abs(y) < 1.0, np.abs(1.0 - y * y) ** s, 0.0),
                         domain=DOM)


@pytest.mark.parametrize("s", [0.6, 0.75, 0.9])
@pytest.mark.parametrize("x", [0.0, 0.3, -0.7, 0.95])
def test_torsion_bump(s, x):
    # -(-Delta)^s (1 - x^2)_+^s = -Gamma(2s + 1) on (-1, 1)
    r = eval_linear_pv(physical_kernel(s), bump(s), Point.of(x, DOM), 1e-9)
    assert r.value == pytest.approx(-math.gamma(2 * s + 1), rel=1e-7)


def test_constant_field_is_annihilated():
    one = CallableField(lambda y: np.ones_like(y))
    assert eval_linear_pv(unit_kernel(0.75), one, 0.3, 1e-10).value == pytest.approx(0.0, abs=1e-9)


def test_negative_at_strict_maximum():
    f = CallableField(lambda y: np.exp(-y * y))
    assert eval_linear_pv(unit_kernel(0.75), f, 0.0, 1e-10).value < 0.0


@settings(max_examples=15, deadline=None)
@given(st.floats(0.55, 0.95), st.floats(-0.9, 1.05), st.floats(0.05, 20.0))
def test_power_scaling_on_half_line(s, frac, x):
    # I d^tau (x) = c(tau) x^{tau - 2s}
    tau = frac if frac < 2 * s - 0.05 else 2 * s - 0.1
    u = DistanceField.power(HALF, tau)
    K = unit_kernel(s)
    at_one = eval_linear_pv(K, u, Point(1.0, 1.0, math.inf), 1e-10).value
    at_x = eval_linear_pv(K, u, Point(x, x, math.inf), 1e-10).value
    # c(tau) vanishes at tau = s - 1 and tau = s, so the floor is absolute
    assert at_x == pytest.approx(at_one * x ** (tau - 2 * s), rel=1e-6, abs=1e-8 * x ** (tau - 2 * s))


@settings(max_examples=20, deadline=None)
@given(st.floats(0.55, 0.95), st.floats(0.2, 1.0), st.floats(1.0, 3.0),
       st.floats(-0.9, 0.9), st.floats(-0.6, 1.0))
def test_pucci_sandwich(s, lo, width, x, tau):
    hi = lo * width
    u = DistanceField.power(DOM, tau if tau < 2 * s - 0.05 else 0.0, smoothing=0.1)
    pt = Point.of(x, DOM)
    m_minus = eval_extremal("-", s, lo, hi, u, pt, 1e-9).value
    m_plus = eval_extremal("+", s, lo, hi, u, pt, 1e-9).value
    for a in (lo, 0.5 * (lo + hi), hi):
        val = eval_linear_pv(Kernel(s, a), u, pt, 1e-9).value
        slack = 1e-7 * (1.0 + abs(val))
        assert m_minus - slack <= val <= m_plus + slack


def test_centre_kink_is_rejected():
    # the raw distance has a concave kink at the centre; with 2s > 1 the integral diverges there
    with pytest.raises(QuadratureError):
        eval_linear_pv(unit_kernel(0.75), DistanceField.power(DOM, 1.0), Point.of(0.0, DOM), 1e-9)


def test_pucci_of_constant_kernel_band_is_linear():
    s = 0.75
    u = DistanceField.power(DOM, 0.3)
    pt = Point.of(0.2, DOM)
    lin = eval_linear_pv(Kernel(s, 1.5), u, pt, 1e-10).value
    assert eval_extremal("+", s, 1.5, 1.5, u, pt, 1e-10).value == pytest.approx(lin, rel=1e-9)


def test_infsup_picks_the_right_entry():
    s = 0.75
    u = DistanceField.power(DOM, 0.3)
    pt = Point.of(0.2, DOM)
    k1, k2 = Kernel(s, 1.0), Kernel(s, 2.0)
    v1 = eval_linear_pv(k1, u, pt, 1e-10).value
    v2 = eval_linear_pv(k2, u, pt, 1e-10).value
    r = eval_infsup([[k1, k2]], u, pt, 1e-10)
    assert r.value == pytest.approx(max(v1, v2), rel=1e-12)
    assert r.active == ((0, 0) if v1 >= v2 else (0, 1))
    r = eval_infsup([[k1], [k2]], u, pt, 1e-10)
    assert r.value == pytest.approx(min(v1, v2), rel=1e-12)


def test_eval_operator_dispatch():
    s = 0.75
    u = DistanceField.power(DOM, -0.3)
    pt = Point.of(0.5, DOM)
    plus = eval_operator(OperatorSpec.pucci("+", s, 1.0, 2.0), u, pt, 1e-9).value
    assert plus == pytest.approx(eval_extremal("+", s, 1.0, 2.0, u, pt, 1e-9).value)


def test_exterior_data_enters_linearly():
    s = 0.75
    K = unit_kernel(s)
    pt = Point.of(0.0, DOM)
    base = DistanceField.power(DOM, 0.5, smoothing=0.1)
    shifted = DistanceField(DOM, ((1.0, 0.5),), exterior=ExteriorData.constant(1.0), smoothing=0.1)
    gain = eval_linear_pv(K, shifted, pt, 1e-10).value - eval_linear_pv(K, base, pt, 1e-10).value
    # exterior mass at the centre of (-1, 1): 2 * 1^{-2s} / (2s)
    assert gain == pytest.approx(1.0 / s, rel=1e-8)


def test_apply_on_grid_matches_pointwise():
    s = 0.75
    dom = DomainGeometry.interval(n=41)
    x = dom.nodes()
    g = GridFunction(dom, x, (1.0 - x * x) ** s)
    out = apply_on_grid(OperatorSpec.linear(physical_kernel(s)), g, 1e-8)
    assert out.values.shape == x.shape
    mid = np.abs(x) < 0.5
    # nodal model of the bump: close to the exact constant away from the boundary
    assert np.max(np.abs(out.values[mid] + math.gamma(2 * s + 1))) < 0.05

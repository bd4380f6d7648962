import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fhj.core import (DomainError, DomainGeometry, ExteriorData, ProblemSpec, SourceSpec,
                      beta_exponent, critical_exponents, exterior_mass, lambda0,
                      blowup_cases, validate_problem)
from fhj.kernels import Kernel, OperatorSpec, unit_kernel

s_open = st.floats(0.51, 0.99)


def test_critical_exponents_at_three_quarters():
    ex = critical_exponents(0.75)
    assert ex.p0 == pytest.approx(1.2)
    assert ex.p1 == pytest.approx(1.25)
    assert ex.p2 == pytest.approx(1.4)


@pytest.mark.parametrize("s", [0.5, 1.0, 0.3])
def test_critical_exponents_reject_s(s):
    with pytest.raises(DomainError):
        critical_exponents(s)


@given(s_open)
def test_exponents_ordered(s):
    ex = critical_exponents(s)
    assert 1.0 < ex.p1 < ex.p2 < 2.0 * s
    assert ex.p0 < ex.p2


@pytest.mark.parametrize("p, beta, band", [
    (1.3, -2.0 / 3.0, "positive_scale"),
    (1.45, -1.0 / 9.0, "negative_scale"),
    (1.1, -4.0, "below_p1"),
])
def test_beta_exponent(p, beta, band):
    ex = beta_exponent(0.75, p)
    assert ex.beta == pytest.approx(beta, rel=1e-13)
    assert ex.band == band


@pytest.mark.parametrize("p", [1.0, 0.9, 1.5, 1.6])
def test_beta_needs_superlinear_subcritical(p):
    with pytest.raises(DomainError):
        beta_exponent(0.75, p)


@given(s_open, st.floats(0.01, 0.999))
def test_beta_bands(s, frac):
    ex = critical_exponents(s)
    p = 1.0 + frac * (2.0 * s - 1.0)
    b = beta_exponent(s, p)
    if ex.p1 < p < ex.p2:
        assert -1.0 - 1e-9 < b.beta < s - 1.0 + 1e-9
        assert b.band == "positive_scale"
    if ex.p2 < p:
        assert s - 1.0 < b.beta < 0.0
        assert b.band == "negative_scale"


@pytest.mark.parametrize("p, cases", [
    (0.5, ("family",)),
    (1.1, ("family",)),
    (1.3, ("family", "scale_pos")),
    (1.45, ("scale_neg",)),
    (1.4, ()),
])
def test_blowup_cases(p, cases):
    assert blowup_cases(0.75, p) == cases


def test_lambda0_unit_kernel_on_unit_interval():
    # infimum of (d_a^{-2s} + d_b^{-2s}) / (2s) is at the centre, equal to 1/s
    for s in (0.6, 0.75, 0.9):
        op = OperatorSpec.linear(unit_kernel(s))
        assert lambda0(op, DomainGeometry.interval()) == pytest.approx(1.0 / s, rel=1e-10)


def test_lambda0_scales_with_interval_length():
    s = 0.75
    op = OperatorSpec.linear(unit_kernel(s))
    L = 5.0
    lam = lambda0(op, DomainGeometry.interval(0.0, L))
    assert lam == pytest.approx(2.0 * (L / 2.0) ** (-2 * s) / (2 * s), rel=1e-10)


def test_lambda0_takes_weakest_kernel():
    s = 0.75
    op = OperatorSpec.infsup([[Kernel(s, 0.5), Kernel(s, 2.0)]])
    assert lambda0(op, DomainGeometry.interval()) == pytest.approx(0.5 / s, rel=1e-10)


def test_lambda0_half_line_undefined():
    with pytest.raises(DomainError):
        lambda0(OperatorSpec.linear(unit_kernel(0.75)), DomainGeometry.half_line())


def test_exterior_mass_blows_up_at_boundary():
    dom = DomainGeometry.interval()
    op = OperatorSpec.linear(unit_kernel(0.75))
    m = exterior_mass(op, dom, np.array([0.0, 0.9, 0.999]))
    assert np.all(np.diff(m) > 0)


@pytest.mark.parametrize("lam, valid", [(0.0, True), (-1.0, True), (-1.34, False), (-10.0, False)])
def test_validate_lambda_threshold(lam, valid):
    spec = ProblemSpec(0.75, 1.1, lam, DomainGeometry.interval())
    rep = validate_problem(spec)
    assert rep.valid is valid
    assert rep.lambda0 == pytest.approx(4.0 / 3.0, rel=1e-10)
    if not valid:
        assert [c.name for c in rep.failed()] == ["lambda"]


def test_validate_degenerate_p_keeps_family_only():
    rep = validate_problem(ProblemSpec(0.75, 1.0, 0.0, DomainGeometry.interval()))
    assert [c.name for c in rep.failed()] == ["p_not_one"]
    assert rep.valid
    assert rep.cases == ("family",)


def test_validate_never_raises_on_singular_source():
    spec = ProblemSpec(0.75, 1.1, 0.0, DomainGeometry.interval(),
                       source=SourceSpec.power_singular(1.0, 0.5))
    rep = validate_problem(spec)
    assert rep.source_class != "bounded"
    assert rep.lines()[-1].startswith("cases:")


def test_problem_spec_rejects_bad_parameters():
    dom = DomainGeometry.interval()
    with pytest.raises(DomainError):
        ProblemSpec(0.4, 1.1, 0.0, dom)
    with pytest.raises(DomainError):
        ProblemSpec(0.75, 1.6, 0.0, dom)
    with pytest.raises(DomainError):
        ProblemSpec(0.75, 1.1, 0.0, dom, operator=OperatorSpec.linear(unit_kernel(0.6)))


def test_exterior_constant():
    ex = ExteriorData.constant(2.5)
    assert not ex.is_zero
    assert np.all(ex(np.array([-3.0, 4.0]), DomainGeometry.interval()) == 2.5)
    assert ExteriorData.zero().is_zero


# -- grids ---------------------------------------------------------------------

def test_uniform_grid():
    dom = DomainGeometry.interval(n=9)
    x = dom.nodes()
    assert np.allclose(np.diff(x), 0.2)
    assert x[4] == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(200, 3000), st.floats(1.01, 1.2), st.sampled_from([1e-9, 1e-7, 1e-5]),
       st.floats(0.5, 20.0))
def test_graded_grid_properties(n, ratio, d_min, L):
    dom = DomainGeometry.interval(-L / 2, L / 2, n=n, grading=ratio, d_min=d_min * L)
    try:
        x = dom.nodes()
    except DomainError:
        return
    da, db = dom.node_boundary_distances()
    assert x.size == n
    assert np.all(np.diff(x) > 0)
    assert np.all(dom.contains(x))
    assert np.allclose(x, -x[::-1], atol=1e-12 * L)
    assert da[0] == pytest.approx(d_min * L, rel=1e-12)
    assert db[-1] == pytest.approx(d_min * L, rel=1e-12)
    gaps = np.diff(np.concatenate([[0.0], da[: n // 2]]))
    # spacings never shrink going inwards and grow by at most the ratio
    assert np.all(gaps[1:] >= gaps[:-1] * (1 - 1e-9))
    assert np.all(gaps[2:] <= gaps[1:-1] * ratio * (1 + 1e-9))


def test_weak_grading_is_a_domain_error():
    with pytest.raises(DomainError, match="grading too weak"):
        DomainGeometry.interval(n=100, grading=1.01, d_min=1e-9).nodes()


def test_half_line_has_no_grid():
    with pytest.raises(DomainError):
        DomainGeometry.half_line().nodes()


def test_domain_rejects_bad_interval():
    with pytest.raises(DomainError):
        DomainGeometry.interval(1.0, -1.0)
    with pytest.raises(DomainError):
        DomainGeometry.interval(grading=0.9)

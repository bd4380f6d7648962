import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fhj.barriers import (Barrier, barrier_pair, barriers_ordered, build_barrier,
                          default_gamma, expansion_probe, gamma_interval, verify_barrier)
from fhj.constants import CaseMismatchError, c_kernel
from fhj.core import DomainError, DomainGeometry, ProblemSpec, SourceSpec
from fhj.kernels import OperatorSpec, unit_kernel

DOM = DomainGeometry.interval()
CASES = {"family": 1.1, "scale_pos": 1.3, "scale_neg": 1.45}
LEADING = {"family": (1.0, -0.25), "scale_pos": (220.5758006320083, -2.0 / 3.0),
           "scale_neg": (-185.47981031331587, -1.0 / 9.0)}


@pytest.fixture(scope="module", params=sorted(CASES))
def pair(request):
    case = request.param
    spec = ProblemSpec(0.75, CASES[case], 0.0, DOM)
    return case, spec, barrier_pair(case, spec)


def test_leading_terms(pair):
    case, _, (sub, sup) = pair
    c, e = LEADING[case]
    for b in (sub, sup):
        assert b.leading[0] == pytest.approx(c, rel=1e-10)
        assert b.leading[1] == pytest.approx(e, rel=1e-12)


def test_signs_and_shifts(pair):
    case, _, (sub, sup) = pair
    assert sub.is_sub and not sup.is_sub
    assert sub.shift <= 0.0 <= sup.shift
    assert sub.terms[1][0] < 0.0 < sup.terms[1][0]
    assert sub.sign == sup.sign == (-1.0 if case == "scale_neg" else 1.0)


def test_residual_signs_on_whole_interval(pair):
    _, spec, (sub, sup) = pair
    for b in (sub, sup):
        near = verify_barrier(b, spec, (1e-4, b.d_eps), n_check=12)
        assert near.passed, near.worst
        far = verify_barrier(b, spec, (b.d_eps, 0.5 * DOM.diameter), n_check=12)
        assert far.passed, far.worst


def test_ordered(pair):
    _, _, (sub, sup) = pair
    assert barriers_ordered(sub, sup)
    d = np.geomspace(1e-12, 1.0, 200)
    assert np.all(sup.values_at_distance(d) - sub.values_at_distance(d) >= 0.0)


def test_vanishes_outside(pair):
    _, _, (sub, sup) = pair
    x = np.array([-3.0, -1.0, 1.0, 2.5])
    assert np.all(sub(x) == 0.0) and np.all(sup(x) == 0.0)


def test_verification_table_shape(pair):
    _, spec, (_, sup) = pair
    rep = verify_barrier(sup, spec, (1e-3, 1e-2), n_check=5)
    assert rep.table().shape == (10, 5)
    assert np.all(np.diff(rep.table()[:, 0]) > 0)


def test_family_parameter_scales_leading_term():
    spec = ProblemSpec(0.75, 1.1, 0.0, DOM)
    for t in (0.5, 2.0):
        sub, sup = barrier_pair("family", spec, t)
        assert sub.leading == (t, -0.25) and sup.leading == (t, -0.25)


@pytest.mark.parametrize("case, p", [("family", 1.45), ("scale_pos", 1.1), ("scale_pos", 1.45),
                                     ("scale_neg", 1.3)])
def test_outside_band(case, p):
    with pytest.raises(CaseMismatchError):
        build_barrier(f"{case}_super", ProblemSpec(0.75, p, 0.0, DOM))


def test_gamma_must_lie_in_interval():
    spec = ProblemSpec(0.75, 1.3, 0.0, DOM)
    lo, hi = gamma_interval("scale_pos", 0.75, 1.3)
    with pytest.raises(CaseMismatchError):
        build_barrier("scale_pos_super", spec, gamma=hi + 0.01)
    assert lo < default_gamma("scale_pos", 0.75, 1.3) < hi


@settings(max_examples=30, deadline=None)
@given(st.floats(0.55, 0.95), st.floats(0.05, 0.95))
def test_gamma_intervals(s, frac):
    from fhj.core import critical_exponents
    ex = critical_exponents(s)
    p = ex.p1 + frac * (ex.p2 - ex.p1)
    lo, hi = gamma_interval("scale_pos", s, p)
    assert lo == s - 1.0 and hi <= 0.0
    if hi > lo:
        assert lo < default_gamma("scale_pos", s, p) < hi
    lo, hi = gamma_interval("scale_neg", s, p)
    assert (lo, hi) == (0.0, 2.0 * s - 1.0)


def test_unknown_case():
    with pytest.raises(ValueError):
        build_barrier("nope_sub", ProblemSpec(0.75, 1.1, 0.0, DOM))


def test_bounded_source_keeps_barrier_valid():
    spec = ProblemSpec(0.75, 1.1, 0.0, DOM, source=SourceSpec.constant(3.0))
    sub, sup = barrier_pair("family", spec)
    for b in (sub, sup):
        assert verify_barrier(b, spec, (1e-4, 0.5), n_check=10).passed


def test_half_line_barrier_is_unshifted():
    spec = ProblemSpec(0.75, 1.3, 0.0, DomainGeometry.half_line())
    b = build_barrier("scale_pos_super", spec)
    assert b.shift == 0.0 and b.d_eps is None


def test_barrier_smoothing_default():
    b = Barrier("family_super", DOM, ((1.0, -0.25),))
    assert 0.0 < b.smoothing < 0.5


@pytest.mark.parametrize("tau", [-0.4, 0.3])
def test_expansion_recovers_c(tau):
    fit = expansion_probe(OperatorSpec.linear(unit_kernel(0.75)), tau, DOM)
    assert fit.measured_c == pytest.approx(c_kernel(0.75, tau).value, rel=1e-4, abs=1e-6)
    assert fit.remainder_order > 0.65 or fit.amplitude == 0.0


def test_expansion_half_line_is_exact():
    fit = expansion_probe(OperatorSpec.linear(unit_kernel(0.75)), 0.3, DomainGeometry.half_line())
    assert fit.measured_c == pytest.approx(c_kernel(0.75, 0.3).value, rel=1e-8)
    assert fit.amplitude == 0.0


def test_expansion_rejects_bad_distances():
    op = OperatorSpec.linear(unit_kernel(0.75))
    with pytest.raises(DomainError):
        expansion_probe(op, 0.3, DOM, np.array([1e-3, 1e-2, 1e-4, 1e-5]))
    with pytest.raises(DomainError):
        expansion_probe(op, 1.6, DOM)

"""The ten acceptance criteria, each reported as one PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines are
repeated in the terminal summary.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import N_LAST, report
from fhj.analysis import fit_boundary_rate, verify_family
from fhj.barriers import barrier_pair, barriers_ordered, expansion_probe, verify_barrier
from fhj.constants import c_curve, c_kernel, scale_constants
from fhj.core import DomainGeometry, ExteriorData, ProblemSpec, lambda0
from fhj.fields import GridFunction
from fhj.fracop import eval_linear_pv
from fhj.kernels import OperatorSpec, physical_kernel, unit_kernel
from fhj.solver.discretize import Discretization
from fhj.solver.exterior import reduce_exterior_data
from fhj.solver.scheme import DiscreteProblem


# -- 1: c-curve structure ------------------------------------------------------

S_VALUES = (0.6, 0.75, 0.9)
DELTA = 0.02


@pytest.fixture(scope="module")
def curves():
    t0 = time.perf_counter()
    out = {s: c_curve(s) for s in S_VALUES}
    return out, t0


def _second_differences(cv):
    return cv.values[2:] - 2.0 * cv.values[1:-1] + cv.values[:-2]


def test_c1_zeros_signs_growth(curves):
    out, t0 = curves
    worst_zero = 0.0
    signs_ok = growth_ok = True
    for s, cv in out.items():
        zeros = cv.zeros()
        assert len(zeros) == 2
        worst_zero = max(worst_zero, abs(zeros[0] - (s - 1.0)), abs(zeros[1] - s))
        tau, v = cv.tau_nodes, cv.values
        signs_ok &= bool(np.all(v[tau < s - 1 - DELTA] > 0) and np.all(v[(tau > s - 1 + DELTA) & (tau < s - DELTA)] < 0)
                         and np.all(v[tau > s + DELTA] > 0))
        k = np.arange(3, 11)
        lo = [c_kernel(s, -1.0 + 2.0 ** -kk).value for kk in k]
        hi = [c_kernel(s, 2.0 * s - 2.0 ** -kk).value for kk in k]
        growth_ok &= bool(np.all(np.diff(lo) > 0) and np.all(np.diff(hi) > 0))
    elapsed = time.perf_counter() - t0
    ok = worst_zero < 1e-6 and signs_ok and growth_ok and elapsed <= 60.0
    report(1, ok, f"zeros within {worst_zero:.1e}, signs {signs_ok}, endpoint growth {growth_ok}, {elapsed:.1f}s")
    assert ok


def test_c1_second_differences_convex(curves):
    """Second differences are nonnegative: c is convex with two zeros and
    diverges at both ends."""
    out, _ = curves
    for s, cv in out.items():
        slack = 1e-8 + cv.errors[2:] + 2 * cv.errors[1:-1] + cv.errors[:-2]
        assert np.all(_second_differences(cv) >= -slack)


@pytest.mark.xfail(strict=True, reason="c is convex; second differences <= tol cannot hold (see ledger)")
def test_c1_second_differences_concave(curves):
    out, _ = curves
    worst = 0.0
    for s, cv in out.items():
        slack = 1e-8 + cv.errors[2:] + 2 * cv.errors[1:-1] + cv.errors[:-2]
        worst = max(worst, float(np.max(_second_differences(cv) - slack)))
    report(1, worst <= 0.0, f"literal concavity check: max second difference excess {worst:.3e}")
    assert worst <= 0.0


# -- 2: c(0) -------------------------------------------------------------------

def test_c2_c_of_zero():
    s = 0.75
    val = c_kernel(s, 0.0).value
    err = abs(val + 1.0 / (2.0 * s))
    report(2, err < 1e-8, f"c(0) = {val:.15f}, |c(0) + 1/(2s)| = {err:.1e}")
    assert err < 1e-8


# -- 3: cos oracle -------------------------------------------------------------

def test_c3_cos_oracle():
    s = 0.75
    K = physical_kernel(s)
    dom = DomainGeometry.interval(-1.0, 1.0, n=2001)
    x = dom.nodes()
    idx = np.linspace(0, x.size - 1, 20).astype(int)
    t0 = time.perf_counter()
    worst = 0.0
    for xi in (1.0, 2.0):
        f = lambda y, xi=xi: np.cos(xi * y)
        g = GridFunction(dom, x, f(x), ExteriorData.bounded(f, tail="oscillatory"))
        for i in idx:
            val = eval_linear_pv(K, g, g.point(i)).value
            exact = -xi ** (2 * s) * math.cos(xi * x[i])
            worst = max(worst, abs(val - exact) / xi ** (2 * s))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-3 and elapsed <= 30.0
    report(3, ok, f"max error relative to |xi|^(2s): {worst:.2e}, {elapsed:.1f}s")
    assert ok


# -- 4: expansion probe --------------------------------------------------------

@pytest.mark.parametrize("tau", [
    -0.8, -0.4, 0.3,
    pytest.param(1.2, marks=pytest.mark.xfail(
        strict=True, reason="far-boundary term has order 2s - tau = 0.3 < 0.65 (see ledger)")),
])
def test_c4_expansion_interval(tau):
    s = 0.75
    op = OperatorSpec.linear(unit_kernel(s))
    fit = expansion_probe(op, tau, DomainGeometry.interval(-1.0, 1.0))
    c = c_kernel(s, tau).value
    rel = abs(fit.measured_c / c - 1.0)
    need = min(s, 1.0 + tau) - 0.1
    ok = rel < 0.02 and fit.remainder_order >= need
    report(4, ok, f"tau={tau:+.1f}: constant off by {rel:.1e}, remainder order "
                f"{fit.remainder_order:.3f} (need >= {need:.2f})")
    assert ok


def test_c4_expansion_half_line(rng):
    s = 0.75
    op = OperatorSpec.linear(unit_kernel(s))
    hl = DomainGeometry.half_line()
    worst = 0.0
    for tau in rng.uniform(-0.95, 2 * s - 0.05, 10):
        fit = expansion_probe(op, float(tau), hl)
        ref = c_kernel(s, float(tau))
        worst = max(worst, abs(fit.measured_c - ref.value) / (1e-9 + 10 * ref.quad_error + 1e-12 * abs(ref.value)))
    report(4, worst <= 1.0, f"half line, 10 random tau: worst error / tolerance {worst:.2e}")
    assert worst <= 1.0


# -- 5: barrier verification ---------------------------------------------------

BARRIER_CASES = (("family", 1.1), ("scale_pos", 1.3), ("scale_neg", 1.45))


@pytest.mark.parametrize("case,p", BARRIER_CASES)
def test_c5_barriers(case, p):
    t0 = time.perf_counter()
    spec = ProblemSpec(0.75, p, 0.0, DomainGeometry.interval(-1.0, 1.0))
    sub, sup = barrier_pair(case, spec, 1.0 if case == "family" else None)
    ok = True
    notes = []
    for b in (sub, sup):
        rep = verify_barrier(b, spec, (1e-4, b.d_eps))
        ok &= rep.passed and b.d_eps > 1e-3
        notes.append(f"{b.case_label.rsplit('_', 1)[-1]} d_eps={b.d_eps:.3g} {'ok' if rep.passed else 'FAIL'}")
    ordered = barriers_ordered(sub, sup)
    elapsed = time.perf_counter() - t0
    ok &= ordered and elapsed <= 120.0
    report(5, ok, f"{case} p={p}: {', '.join(notes)}, ordered {ordered}, {elapsed:.1f}s")
    assert ok


# -- 6-8: blow-up solutions ----------------------------------------------------

def test_c6_family(perron_runs):
    t0 = time.perf_counter()
    members = []
    for t in (0.5, 1.0, 2.0):
        spec, _, _, st = perron_runs.get("family", t)
        members.append((t, st.grid))
    verdict = verify_family(members, 0.75, solved_distance=1.0 / N_LAST)
    elapsed = time.perf_counter() - t0
    fits = ", ".join(f"t={t:g}: {f.exponent:.4f}/{f.coefficient:.4f}" for t, f in verdict.fits)
    ok = verdict.passed and elapsed <= 600.0
    report(6, ok, f"ordered {verdict.ordered}; exponent/coefficient {fits}; {elapsed:.1f}s")
    assert ok


def test_c7_positive_scale(perron_runs):
    spec, _, _, st = perron_runs.get("scale_pos")
    T = scale_constants(0.75, 1.3).T_bar
    fit = fit_boundary_rate(st.grid, solved_distance=st.info["solved_distance"])
    rel = abs(fit.coefficient / T - 1.0)
    ok = abs(fit.exponent + 2.0 / 3.0) <= 0.05 and rel <= 0.10
    report(7, ok, f"exponent {fit.exponent:.4f} (want -0.6667), coefficient {fit.coefficient:.2f} "
                f"vs T_bar {T:.2f} ({100 * rel:.1f}%)")
    assert ok


def test_c8_negative_scale(perron_runs):
    spec, _, _, st = perron_runs.get("scale_neg")
    T = scale_constants(0.75, 1.45).T_star
    fit = fit_boundary_rate(st.grid, solved_distance=st.info["solved_distance"])
    d = spec.domain.distance(st.grid.nodes)
    negative = bool(np.all(st.values[d < 0.05] < 0.0))
    rel = abs(fit.coefficient / -T - 1.0)
    ok = negative and abs(fit.exponent + 1.0 / 9.0) <= 0.03 and rel <= 0.10
    report(8, ok, f"negative near boundary {negative}, exponent {fit.exponent:.4f} (want -0.1111), "
                f"coefficient {fit.coefficient:.2f} vs -T* {-T:.2f} ({100 * rel:.1f}%)")
    assert ok


# -- 9: comparison fuzzing -----------------------------------------------------

def comparison_instance(rng, n=64):
    """A random bounded problem with a discrete subsolution (a solution for a
    smaller source) and a discrete supersolution (a random function whose
    residual is made nonnegative through the source)."""
    s = float(rng.uniform(0.55, 0.95))
    p = float(rng.uniform(0.2, 2 * s - 0.05))
    dom = DomainGeometry.interval(-1.0, 1.0, n=n)
    op = OperatorSpec.linear(unit_kernel(s))
    lam = float(rng.uniform(-lambda0(op, dom) + 0.1, 3.0))
    phi = float(rng.uniform(-1.0, 1.0))
    spec = ProblemSpec(s, p, lam, dom, exterior=ExteriorData.constant(phi) if phi else ExteriorData.zero())
    disc = Discretization.build(spec.operator, dom)
    prob = DiscreteProblem.of(spec, disc)
    x = disc.nodes
    coef = rng.normal(size=4)
    v = phi + 0.5 * sum(c * np.cos((k + 1) * np.pi * x / 2) for k, c in enumerate(coef))
    f = prob.residual(v) + prob.f - rng.uniform(0.0, 1.0, n)
    big = replace(prob, f=f)
    small = replace(prob, f=f - rng.uniform(0.0, 1.0, n))
    w = small.solve(np.zeros(n), np.ones(n, bool), None, None, 1e-11, 100, "newton")["u"]
    return big, v, w


def test_c9_comparison_fuzz():
    rng = np.random.default_rng(9)
    t0 = time.perf_counter()
    violations = 0
    checked = 0
    for _ in range(50):
        prob, sup, sub = comparison_instance(rng)
        assert np.all(prob.residual(sup) >= -1e-9 * prob.magnitude(sup))
        assert np.all(prob.residual(sub) <= 1e-9 * prob.magnitude(sub))
        violations += int(np.sum(sub > sup + 1e-10 * (1 + np.abs(sup))))
        checked += 1
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed <= 60.0
    report(9, ok, f"{checked} instances, {violations} ordering violations, {elapsed:.1f}s")
    assert ok


# -- 10: exterior-data reduction -----------------------------------------------

def test_c10_exterior_reduction():
    s = 0.75
    dom = DomainGeometry.interval(-1.0, 1.0, n=200)
    op = OperatorSpec.linear(unit_kernel(s))
    x = np.unique(np.concatenate([dom.nodes(), [0.0]]))
    red = reduce_exterior_data(ExteriorData.constant(1.0), op, dom, x)
    exact = ((1 - x) ** (-2 * s) + (1 + x) ** (-2 * s)) / (2 * s)
    err = max(np.max(np.abs(red.lower.values - exact)), np.max(np.abs(red.upper.values - exact)))
    lam0 = lambda0(op, dom)
    gap = abs(float(np.min(red.upper.values)) - lam0)
    ok = red.ok and err < 1e-6 and gap < 1e-6
    report(10, ok, f"max error {err:.1e}, |inf - lambda0| = {gap:.1e}")
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v"]))

"""Closed-form blow-up barriers built from powers of the distance, their
numerical verification, and the expansion probe for ``I d^tau``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import least_squares

from .constants import (CaseMismatchError, c1_bar, c_extremal, c_operator, c_tilde,
                        t_bar, t_star)
from .core import (DomainError, DomainGeometry, ProblemSpec, beta_exponent,
                   critical_exponents, exterior_mass)
from .fields import DistanceField, Point
from .fracop import eval_operator
from .kernels import OperatorSpec

CASES = ("family_sub", "family_super", "scale_pos_sub", "scale_pos_super",
         "scale_neg_sub", "scale_neg_super")
CORRECTOR_GAP = 0.05
CENTRE_SMOOTHING = 0.1


@dataclass(frozen=True)
class Barrier:
    """``sum_k c_k d^{e_k} + shift * chi_Omega`` with zero exterior values.

    ``shift`` already carries its sign (negative for subsolutions).
    ``d_eps`` is the upper edge of the verified boundary band.  On an
    interval the distance is smoothed within ``smoothing`` of the centre
    (default a tenth of the half-length), so the barrier is C^{1,1} there.
    """

    case_label: str
    domain: DomainGeometry
    terms: tuple[tuple[float, float], ...]
    shift: float = 0.0
    params: dict = field(default_factory=dict)
    d_eps: float | None = None
    smoothing: float | None = None

    def __post_init__(self):
        if self.smoothing is None:
            width = CENTRE_SMOOTHING * 0.5 * self.domain.diameter \
                if self.domain.kind == "interval" else 0.0
            object.__setattr__(self, "smoothing", width)

    @property
    def is_sub(self) -> bool:
        return self.case_label.endswith("_sub")

    @property
    def sign(self) -> float:
        """``+1`` for blow-up to ``+inf``, ``-1`` for blow-down."""
        return math.copysign(1.0, self.terms[0][0])

    @property
    def leading(self) -> tuple[float, float]:
        return self.terms[0]

    def field(self) -> DistanceField:
        return DistanceField(self.domain, self.terms, self.shift, smoothing=self.smoothing)

    def values_at_distance(self, d: np.ndarray) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        return np.where(d > 0.0, self.field().inside(np.maximum(d, 1e-300)), 0.0)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.values_at_distance(self.domain.distance(x))

    def gradient(self, pt: Point) -> float:
        return self.field().gradient(pt)

    def with_shift(self, shift: float) -> "Barrier":
        return replace(self, shift=shift)


@dataclass(frozen=True)
class VerificationRow:
    x: float
    d: float
    residual: float
    margin: float
    passed: bool


@dataclass(frozen=True)
class VerificationReport:
    case_label: str
    eps: float
    rows: tuple[VerificationRow, ...]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    @property
    def worst(self) -> VerificationRow:
        return min(self.rows, key=lambda r: r.margin)

    def table(self) -> np.ndarray:
        return np.array([[r.x, r.d, r.residual, r.margin, float(r.passed)] for r in self.rows])


# ---------------------------------------------------------------------------
# residuals

def source_sup(spec: ProblemSpec) -> float:
    """``sup |f|``; for singular sources the sup away from the boundary."""
    sup = spec.source.sup_norm(spec.domain)
    if math.isfinite(sup):
        return sup
    d = np.linspace(0.1, 0.5, 41) * spec.domain.diameter
    return float(np.max(np.abs(spec.source.values(spec.domain.a + d, d))))


def default_eps(spec: ProblemSpec) -> float:
    return 0.05 * source_sup(spec) + 0.01


def field_residual(spec: ProblemSpec, u: DistanceField, pt: Point, tol: float = 1e-8) -> float:
    """``-I u + |u'|^p + lam u - f`` at ``pt`` for a distance profile."""
    Iu = eval_operator(spec.operator, u, pt, tol).value
    grad = u.gradient(pt)
    val = u.value(pt)
    f = float(spec.source.values(np.array([pt.x]), np.array([pt.d]))[0])
    return -Iu + abs(grad) ** spec.p + spec.lam * val - f


def _check_points(dom: DomainGeometry, d: np.ndarray) -> list[Point]:
    pts = []
    for dk in d:
        pts.append(Point.at_distance(dom, float(dk), "b"))
        if dom.kind == "interval":
            pts.append(Point.at_distance(dom, float(dk), "a"))
    return pts


def _margin(b: Barrier, r: float, eps: float) -> float:
    return (-eps - r) if b.is_sub else (r - eps)


def verify_barrier(b: Barrier, spec: ProblemSpec, band: tuple[float, float],
                   n_check: int = 24, eps: float | None = None,
                   tol: float = 1e-8) -> VerificationReport:
    """Strict residual sign at ``n_check`` log-spaced distances in ``band``
    (both ends of an interval)."""
    lo, hi = band
    if not 0.0 < lo < hi:
        raise DomainError("band must satisfy 0 < d_min < d_max")
    dom = b.domain
    if dom.kind == "interval" and hi > 0.5 * dom.diameter:
        raise DomainError("band extends past the centre")
    eps = b.params.get("eps", default_eps(spec)) if eps is None else eps
    u = b.field()
    rows = []
    for pt in _check_points(dom, np.geomspace(lo, hi, n_check)):
        r = field_residual(spec, u, pt, tol)
        m = _margin(b, r, eps)
        rows.append(VerificationRow(pt.x, pt.d, r, m, m >= 0.0))
    rows.sort(key=lambda r: r.x)
    return VerificationReport(b.case_label, eps, tuple(rows))


def _passes_at(b: Barrier, spec: ProblemSpec, d: float, eps: float) -> bool:
    u = b.field()
    return all(_margin(b, field_residual(spec, u, pt), eps) >= 0.0
               for pt in _check_points(b.domain, np.array([d])))


def find_band_edge(b: Barrier, spec: ProblemSpec, d_min: float = 1e-4, eps: float | None = None,
                   n_scan: int = 25, rel_tol: float = 0.01) -> float:
    """Largest ``d_eps`` such that the residual check passes on a log grid of
    ``[d_min, d_eps]``; 0 when it already fails at ``d_min``."""
    eps = b.params.get("eps", default_eps(spec)) if eps is None else eps
    dom = b.domain
    d_max = 0.45 * dom.diameter if dom.kind == "interval" else 10.0
    grid = np.geomspace(d_min, d_max, n_scan)
    last_ok = 0.0
    for d in grid:
        if not _passes_at(b, spec, d, eps):
            break
        last_ok = d
    else:
        return d_max
    if last_ok == 0.0:
        return 0.0
    lo, hi = last_ok, d
    while hi / lo > 1.0 + rel_tol:
        mid = math.sqrt(lo * hi)
        if _passes_at(b, spec, mid, eps):
            lo = mid
        else:
            hi = mid
    return lo


def size_shift(b: Barrier, spec: ProblemSpec, d_eps: float, eps: float | None = None,
               n_check: int = 24, max_doublings: int = 40) -> float:
    """Smallest ``M = 2^k max(1, |f|, |lam|)`` making the shifted barrier pass
    on ``d_eps <= d <= diam/2``."""
    eps = b.params.get("eps", default_eps(spec)) if eps is None else eps
    dom = b.domain
    if dom.kind != "interval":
        raise DomainError("indicator shifts are sized on bounded intervals")
    d_hi = 0.5 * dom.diameter
    d = np.concatenate([np.linspace(max(d_eps, 1e-12), d_hi, n_check),
                        d_hi - b.smoothing * np.array([1.0, 0.5, 0.1])])
    d = np.unique(d[d >= d_eps])
    pts = _check_points(dom, d)
    base = b.field()
    r0 = np.array([field_residual(spec, base, pt) for pt in pts])
    # the indicator enters linearly: L(chi) = -(exterior mass) for every kernel
    mass = np.array([exterior_mass(spec.operator, dom, np.array([pt.x]))[0] for pt in pts])
    unit = max(1.0, source_sup(spec), abs(spec.lam))
    sgn = -1.0 if b.is_sub else 1.0
    linear = spec.operator.kind == "linear"
    M = 0.0
    for k in range(max_doublings + 1):
        shifted = b.with_shift(sgn * M)
        if linear or M == 0.0:
            # L(chi_Omega) = -(exterior mass), so the shift enters linearly
            r = r0 + sgn * M * (mass + spec.lam)
        else:
            u = shifted.field()
            r = np.array([field_residual(spec, u, pt) for pt in pts])
        if all(_margin(shifted, ri, eps) >= 0.0 for ri in r):
            return M
        M = unit * 2.0 ** k
    raise CaseMismatchError("no indicator shift makes the barrier pass in the interior")


# ---------------------------------------------------------------------------
# construction

def gamma_interval(case: str, s: float, p: float) -> tuple[float, float]:
    family = case.split("_")[0]
    if family == "family":
        return s - 1.0, min(2.0 * s - 1.0, 2.0 * s + (s - 2.0) * p)
    if case.startswith("scale_pos"):
        beta = beta_exponent(s, p).beta
        return s - 1.0, min(0.0, beta + s)
    if case.startswith("scale_neg"):
        return 0.0, 2.0 * s - 1.0
    raise ValueError(f"unknown case {case!r}")


def default_gamma(case: str, s: float, p: float) -> float:
    lo, hi = gamma_interval(case, s, p)
    if hi <= lo:
        raise CaseMismatchError(f"empty corrector interval ({lo}, {hi}) for {case}")
    if case.startswith("family") and p < critical_exponents(s).p0 and hi > 0.0:
        lo = max(lo, 0.0)
    return 0.5 * (lo + hi)


def _check_band(case: str, s: float, p: float) -> None:
    ex = critical_exponents(s)
    if case.startswith("family"):
        ok = 0.0 < p < ex.p2
    elif case.startswith("scale_pos"):
        ok = max(1.0, ex.p1) < p < ex.p2
    else:
        ok = ex.p2 < p < 2.0 * s
    if not ok:
        raise CaseMismatchError(f"(s, p) = ({s}, {p}) is outside the band of {case}")


def build_barrier(case_label: str, spec: ProblemSpec, t_or_T: float | None = None,
                  gamma: float | None = None, eps: float | None = None,
                  corrector: float | None = None, shift: float | None = None,
                  d_min: float = 1e-4) -> Barrier:
    """Closed-form barrier for ``case_label``.

    ``t_or_T`` is the family parameter ``t`` (default 1) or overrides the
    scale amplitude.  ``corrector`` overrides the coefficient of ``d^gamma``.
    ``shift`` (the indicator coefficient, unsigned) is sized automatically
    when omitted, after locating the band edge ``d_eps``.
    """
    if case_label not in CASES:
        raise ValueError(f"unknown case {case_label!r}")
    s, p, op = spec.s, spec.p, spec.operator
    _check_band(case_label, s, p)
    lo, hi = gamma_interval(case_label, s, p)
    g = default_gamma(case_label, s, p) if gamma is None else float(gamma)
    if not lo < g < hi:
        raise CaseMismatchError(f"gamma={g} outside ({lo}, {hi})")
    eps = default_eps(spec) if eps is None else float(eps)
    sub = case_label.endswith("_sub")
    params: dict = {"gamma": g, "eps": eps}

    if case_label.startswith("family"):
        t = 1.0 if t_or_T is None else float(t_or_T)
        lo_b, hi_b = op.bounds
        c1 = c1_bar(s, p, t, c_extremal(s, g, lo_b, hi_b, "+").value)
        if corrector is None:
            # the gap only has to be positive; a large one shrinks the verified band
            gap = min(eps, CORRECTOR_GAP * c1)
            corrector = c1 - gap if sub else c1 + gap
        params.update(t=t, C1_bar=c1, C1=corrector)
        lead = (t, s - 1.0)
    else:
        beta = beta_exponent(s, p).beta
        if case_label.startswith("scale_pos"):
            T = t_bar(beta, p, c_operator(op, beta).value) if t_or_T is None else float(t_or_T)
            params.update(T_bar=T)
            lead = (T, beta)
        else:
            T = t_star(beta, p, c_tilde(s, beta, op).value) if t_or_T is None else float(t_or_T)
            params.update(T_star=T)
            lead = (-T, beta)
        params.update(beta=beta)
        corrector = 1.0 if corrector is None else float(corrector)
        params.update(C=corrector)
    corr = (-corrector if sub else corrector, g)
    b = Barrier(case_label, spec.domain, (lead, corr), 0.0, params)
    if spec.domain.kind != "interval":
        return b
    d_eps = find_band_edge(b, spec, d_min, eps)
    if shift is None:
        shift = size_shift(b, spec, d_eps, eps) if d_eps > 0.0 else math.nan
    if not math.isfinite(shift):
        raise CaseMismatchError(f"{case_label}: residual check fails already at d={d_min}")
    params["M"] = shift
    return Barrier(case_label, spec.domain, b.terms, -shift if sub else shift, params, d_eps,
                   b.smoothing)


def barrier_pair(case: str, spec: ProblemSpec, t_or_T: float | None = None,
                 **kw) -> tuple[Barrier, Barrier]:
    """Sub- and supersolution of one case, built with the same parameters."""
    return (build_barrier(f"{case}_sub", spec, t_or_T, **kw),
            build_barrier(f"{case}_super", spec, t_or_T, **kw))


def barriers_ordered(sub: Barrier, sup: Barrier, n: int = 2001) -> bool:
    """``sub <= sup`` on a graded sample of the domain (both vanish outside)."""
    dom = sub.domain
    if dom.kind == "interval":
        d = np.concatenate([np.geomspace(1e-12, 0.5 * dom.diameter, n)])
    else:
        d = np.geomspace(1e-12, 1e6, n)
    return bool(np.all(sub.values_at_distance(d) <= sup.values_at_distance(d)))


# ---------------------------------------------------------------------------
# expansion probe

@dataclass(frozen=True)
class ExpansionFit:
    tau: float
    measured_c: float
    remainder_order: float
    amplitude: float
    r_squared: float
    d_sequence: np.ndarray
    c_hat: np.ndarray


def expansion_probe(op: OperatorSpec, tau: float, dom: DomainGeometry,
                    d_sequence: np.ndarray | None = None, tol: float = 1e-10) -> ExpansionFit:
    """Fit ``d^{2s - tau} I d^tau (x) = c + A d^alpha`` over points at the
    given distances from the boundary."""
    s = op.s
    if not -1.0 < tau < 2.0 * s:
        raise DomainError(f"tau={tau} outside (-1, 2s)")
    d = np.geomspace(1e-2, 1e-6, 9) if d_sequence is None else np.asarray(d_sequence, float)
    if d.size < 4:
        raise DomainError("need at least four distances")
    if np.any(np.diff(d) >= 0.0) or d[-1] <= 0.0:
        raise DomainError("d_sequence must be strictly decreasing and positive")
    u = DistanceField.power(dom, tau)
    c_hat = []
    errs = []
    for dk in d:
        r = eval_operator(op, u, Point.at_distance(dom, float(dk)), tol)
        c_hat.append(dk ** (2.0 * s - tau) * r.value)
        errs.append(dk ** (2.0 * s - tau) * r.quad_error)
    c_hat = np.array(c_hat)
    noise = 10.0 * max(errs) + 1e-12 * max(1.0, float(np.max(np.abs(c_hat))))
    if np.ptp(c_hat) <= noise:
        return ExpansionFit(tau, float(np.mean(c_hat)), math.inf, 0.0, 1.0, d, c_hat)
    return _fit_constant_plus_power(tau, d, c_hat)


def _fit_constant_plus_power(tau, d, c_hat) -> ExpansionFit:
    logd = np.log(d)
    diffs = np.abs(np.diff(c_hat))
    ok = diffs > 0
    if ok.sum() >= 2:
        slope = np.polyfit(logd[:-1][ok], np.log(diffs[ok]), 1)[0]
    else:
        slope = 1.0
    alpha0 = float(np.clip(slope, 0.05, 4.0))
    c0 = float(c_hat[-1])
    a0 = float((c_hat[0] - c0) / d[0] ** alpha0) if d[0] > 0 else 0.0

    def resid(x):
        c, a, al = x
        return (c + a * d ** al - c_hat)

    scale = max(np.ptp(c_hat), 1e-300)
    fit = least_squares(resid, [c0, a0, alpha0], x_scale=[scale, abs(a0) + scale, 1.0],
                        bounds=([-np.inf, -np.inf, 1e-3], [np.inf, np.inf, 10.0]),
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=5000)
    c, a, al = fit.x
    ss_res = float(np.sum(fit.fun ** 2))
    ss_tot = float(np.sum((c_hat - c_hat.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return ExpansionFit(tau, float(c), float(al), float(a), r2, d, c_hat)

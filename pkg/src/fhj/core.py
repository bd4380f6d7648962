"""Problem description, critical exponents, the comparison threshold lambda_0
and admissibility checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .kernels import Kernel, OperatorSpec, unit_kernel


class DomainError(ValueError):
    """Parameters outside the range where a formula is defined."""


# ---------------------------------------------------------------------------
# geometry

@dataclass(frozen=True)
class DomainGeometry:
    """A one-dimensional domain: the interval ``(a, b)`` or the half-line
    ``(0, inf)``.

    The grid has ``n`` interior nodes.  Spacing grows geometrically with
    ratio ``grading`` away from each boundary point, starting from the
    distance ``d_min``, and is uniform once it matches the interior spacing.
    ``grading == 1`` gives a uniform grid.
    """

    kind: str = "interval"
    a: float = -1.0
    b: float = 1.0
    n: int = 200
    grading: float = 1.0
    d_min: float | None = None

    def __post_init__(self):
        if self.kind == "interval":
            if not self.a < self.b:
                raise DomainError(f"interval needs a < b, got ({self.a}, {self.b})")
        elif self.kind == "half_line":
            object.__setattr__(self, "a", 0.0)
            object.__setattr__(self, "b", math.inf)
        else:
            raise DomainError(f"unknown domain kind {self.kind!r}")
        if self.n < 1:
            raise DomainError("need at least one node")
        if self.grading < 1.0:
            raise DomainError("grading ratio must be >= 1")

    @classmethod
    def interval(cls, a: float = -1.0, b: float = 1.0, **kw) -> "DomainGeometry":
        return cls("interval", a, b, **kw)

    @classmethod
    def half_line(cls, **kw) -> "DomainGeometry":
        return cls("half_line", **kw)

    @property
    def diameter(self) -> float:
        return self.b - self.a

    @property
    def center(self) -> float:
        return 0.5 * (self.a + self.b)

    def distance(self, x: np.ndarray) -> np.ndarray:
        """``dist(x, boundary)`` inside, zero outside."""
        x = np.asarray(x, dtype=float)
        d = np.minimum(x - self.a, self.b - x)
        return np.where(d > 0.0, d, 0.0)

    def contains(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x > self.a) & (x < self.b)

    def nodes(self) -> np.ndarray:
        """Interior grid nodes, strictly increasing, symmetric about the centre."""
        if self.kind != "interval":
            raise DomainError("grids are only built on intervals")
        return self.a + self.node_distances_from_a()

    def node_distances_from_a(self) -> np.ndarray:
        """Node offsets ``x - a``.  Offsets of the right half are computed
        from ``b`` so boundary distances keep full relative precision; use
        :meth:`node_boundary_distances` when that precision matters."""
        da, db = self.node_boundary_distances()
        return np.where(da <= db, da, self.diameter - db)

    def node_boundary_distances(self) -> tuple[np.ndarray, np.ndarray]:
        """``(x - a, b - x)`` for every node, each accurate to full relative
        precision on its own side of the centre."""
        if self.kind != "interval":
            raise DomainError("grids are only built on intervals")
        L = self.diameter
        n = self.n
        if self.grading == 1.0:
            k = np.arange(1, n + 1)
            h = L / (n + 1)
            return k * h, (n + 1 - k) * h
        half = graded_offsets(0.5 * L, n, self.grading, self.d_min)
        mid = [0.5 * L] if n % 2 else []
        da = np.concatenate([half, mid, L - half[::-1]])
        db = np.concatenate([L - half, mid, half[::-1]])
        return da, db


def graded_offsets(half_len: float, n: int, ratio: float, d_min: float | None) -> np.ndarray:
    """Distances from one end of the ``n // 2`` nodes of one half.

    The first node sits at ``d_min``; spacings then grow geometrically from
    ``d_min`` by ``ratio`` and are capped at a uniform ``h``, tuned so the
    last gap to the centre matches the spacing (half of it when ``n`` is
    even, as the gap is then shared).
    """
    m = n // 2
    if m == 0:
        return np.empty(0)
    d_min = 1e-6 * half_len if d_min is None else float(d_min)
    share = 1.0 if n % 2 else 0.5

    def build(h):
        steps = np.minimum(d_min * ratio ** np.arange(1, m), h)
        return d_min + np.concatenate([[0.0], np.cumsum(steps)])

    def excess(h):
        return build(h)[-1] + share * h - half_len

    if d_min * (1.0 + share) >= half_len:
        raise DomainError("d_min too large for the domain")
    if excess(half_len) < 0.0:
        raise DomainError("grading too weak to reach the centre; raise n, ratio or d_min")
    h = brentq(excess, 0.0, half_len, xtol=1e-15 * half_len, rtol=1e-14)
    d = build(h)
    if m > 1 and d_min * ratio ** (m - 1) < h:
        raise DomainError("grading too weak to reach the centre; raise n, ratio or d_min")
    return d


# ---------------------------------------------------------------------------
# data

@dataclass(frozen=True)
class ExteriorData:
    """Dirichlet data on the complement of the domain.

    ``func`` maps positions to values; ``dist_func``, when given, maps the
    distance to the domain instead and is preferred near the boundary.
    ``growth`` is an exponent bounding ``|phi(y)| <~ |y|^growth`` and
    ``tail`` selects how integrals over far exterior regions are done:
    ``"smooth"`` for data that is eventually monotone, ``"oscillatory"``
    for data that is not.
    """

    kind: str = "zero"
    func: Callable[[np.ndarray], np.ndarray] | None = None
    dist_func: Callable[[np.ndarray], np.ndarray] | None = None
    growth: float = 0.0
    tail: str = "smooth"

    def __post_init__(self):
        if self.kind not in ("zero", "bounded", "weighted_integrable"):
            raise DomainError(f"unknown exterior kind {self.kind!r}")
        if self.kind != "zero" and self.func is None and self.dist_func is None:
            raise DomainError("non-zero exterior data needs a function")

    @classmethod
    def zero(cls) -> "ExteriorData":
        return cls("zero")

    @classmethod
    def constant(cls, c: float) -> "ExteriorData":
        c = float(c)
        return cls("bounded", dist_func=lambda d, c=c: np.full(np.shape(d), c))

    @classmethod
    def bounded(cls, func, tail: str = "smooth") -> "ExteriorData":
        return cls("bounded", func=func, tail=tail)

    @classmethod
    def power(cls, c: float, kappa: float) -> "ExteriorData":
        """``c * dist(y, domain)^kappa``."""
        return cls("weighted_integrable",
                   dist_func=lambda d, c=c, k=kappa: c * np.asarray(d, float) ** k,
                   growth=max(kappa, 0.0))

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    def values(self, y: np.ndarray, dist: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.kind == "zero":
            return np.zeros(y.shape)
        if self.dist_func is not None:
            return np.asarray(self.dist_func(np.asarray(dist, float)), dtype=float)
        return np.asarray(self.func(y), dtype=float)

    def __call__(self, y: np.ndarray, dom: DomainGeometry) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        dist = np.maximum(dom.a - y, y - dom.b)
        return self.values(y, np.maximum(dist, 0.0))

    def weighted_norm(self, dom: DomainGeometry, s: float) -> float:
        """``int_{complement} |phi| (1+|y|)^{-(1+2s)} dy``; ``inf`` when the
        truncated integrals keep growing."""
        if self.kind == "zero":
            return 0.0
        from scipy.integrate import quad

        def side(sign: float, edge: float) -> float:
            total = 0.0
            prev = 0.0
            r = 0.0
            for k in range(40):
                r_next = 2.0 ** k
                f = lambda t: float(abs(self.values(np.array([edge + sign * t]),
                                                   np.array([t]))[0])) \
                    * (1.0 + abs(edge + sign * t)) ** (-1.0 - 2.0 * s)
                part, _ = quad(f, r, r_next, limit=200)
                total += part
                if k > 8 and part < 1e-10 * max(total, 1.0) and part <= 0.7 * prev + 1e-300:
                    return total
                prev = part
                r = r_next
            return math.inf

        total = side(1.0, dom.b) if math.isfinite(dom.b) else 0.0
        total += side(-1.0, dom.a)
        return total


@dataclass(frozen=True)
class SourceSpec:
    """Right-hand side ``f``: a bounded continuous function of position, or
    ``c * d(x)^{-kappa}``."""

    kind: str = "bounded_continuous"
    func: Callable[[np.ndarray], np.ndarray] | None = None
    c: float = 0.0
    kappa: float = 0.0

    def __post_init__(self):
        if self.kind not in ("bounded_continuous", "power_singular"):
            raise DomainError(f"unknown source kind {self.kind!r}")

    @classmethod
    def constant(cls, value: float) -> "SourceSpec":
        v = float(value)
        return cls("bounded_continuous", func=lambda x, v=v: np.full(np.shape(x), v))

    @classmethod
    def zero(cls) -> "SourceSpec":
        return cls.constant(0.0)

    @classmethod
    def power_singular(cls, c: float, kappa: float) -> "SourceSpec":
        return cls("power_singular", c=float(c), kappa=float(kappa))

    def values(self, x: np.ndarray, d: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "power_singular":
            return self.c * np.asarray(d, float) ** (-self.kappa)
        if self.func is None:
            return np.zeros(x.shape)
        return np.asarray(self.func(x), dtype=float) * np.ones(x.shape)

    def sup_norm(self, dom: DomainGeometry, samples: int = 2001) -> float:
        if self.kind == "power_singular":
            return math.inf if self.kappa > 0 and self.c != 0 else abs(self.c)
        if self.func is None:
            return 0.0
        if dom.kind == "interval":
            x = np.linspace(dom.a, dom.b, samples + 2)[1:-1]
        else:
            x = np.logspace(-6, 6, samples)
        return float(np.max(np.abs(self.values(x, dom.distance(x)))))


@dataclass(frozen=True)
class ProblemSpec:
    """One Dirichlet problem ``-I u + |u'|^p + lam u = f`` in the domain,
    ``u = phi`` outside."""

    s: float
    p: float
    lam: float = 0.0
    domain: DomainGeometry = field(default_factory=DomainGeometry)
    source: SourceSpec = field(default_factory=SourceSpec.zero)
    exterior: ExteriorData = field(default_factory=ExteriorData.zero)
    operator: OperatorSpec | None = None

    def __post_init__(self):
        if not 0.5 < self.s < 1.0:
            raise DomainError(f"s={self.s} outside (1/2, 1)")
        if not 0.0 < self.p < 2.0 * self.s:
            raise DomainError(f"p={self.p} outside (0, 2s)")
        if self.operator is None:
            object.__setattr__(self, "operator", OperatorSpec.linear(unit_kernel(self.s)))
        elif abs(self.operator.s - self.s) > 1e-15:
            raise DomainError("operator order differs from s")


# ---------------------------------------------------------------------------
# exponents

@dataclass(frozen=True)
class Exponents:
    p0: float
    p1: float
    p2: float
    beta: float | None = None
    band: str | None = None


def critical_exponents(s: float) -> Exponents:
    """``p0 = 2s/(2-s)``, ``p1 = s + 1/2``, ``p2 = (s+1)/(2-s)``."""
    if not 0.5 < s < 1.0:
        raise DomainError(f"s={s} outside (1/2, 1)")
    return Exponents(p0=2.0 * s / (2.0 - s), p1=s + 0.5, p2=(s + 1.0) / (2.0 - s))


def beta_exponent(s: float, p: float) -> Exponents:
    """The scale exponent ``(2s - p)/(1 - p)`` for ``1 < p < 2s``, with the
    band it falls in: ``"positive_scale"`` for ``p1 < p < p2``,
    ``"negative_scale"`` for ``p2 < p < 2s`` and ``"below_p1"`` otherwise."""
    ex = critical_exponents(s)
    if not 1.0 < p < 2.0 * s:
        raise DomainError(f"beta needs 1 < p < 2s, got p={p}")
    beta = (2.0 * s - p) / (1.0 - p)
    if ex.p1 < p < ex.p2:
        band = "positive_scale"
    elif ex.p2 < p:
        band = "negative_scale"
    elif p == ex.p2:
        band = "critical"
    else:
        band = "below_p1"
    return Exponents(ex.p0, ex.p1, ex.p2, beta=beta, band=band)


def blowup_cases(s: float, p: float) -> tuple[str, ...]:
    """Which of the three blow-up constructions apply to ``(s, p)``."""
    ex = critical_exponents(s)
    cases = []
    if 0.0 < p < ex.p2:
        cases.append("family")
    if ex.p1 < p < ex.p2:
        cases.append("scale_pos")
    if ex.p2 < p < 2.0 * s:
        cases.append("scale_neg")
    return tuple(cases)


# ---------------------------------------------------------------------------
# lambda_0

def _exterior_mass(k: Kernel, da: np.ndarray, db: np.ndarray) -> np.ndarray:
    if k.is_constant:
        c = float(k.multiplier) / (2.0 * k.s)
        return c * (da ** (-2.0 * k.s) + db ** (-2.0 * k.s))
    return np.array([k.mass_beyond(u) + k.mass_beyond(v) for u, v in zip(da, db)])


def exterior_mass(op: OperatorSpec, dom: DomainGeometry, x: np.ndarray) -> np.ndarray:
    """``inf`` over the kernels of ``int_{complement} K(x - y) dy``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    da, db = x - dom.a, dom.b - x
    return np.min([_exterior_mass(k, da, db) for k in op.kernels], axis=0)


def lambda0(op: OperatorSpec, dom: DomainGeometry, n_scan: int = 1024) -> float:
    """``inf_x inf_K int_{complement} K(x - y) dy`` over the domain."""
    if dom.kind != "interval":
        raise DomainError("lambda0 is only defined for bounded intervals")
    x = np.linspace(dom.a, dom.b, n_scan + 2)[1:-1]
    m = exterior_mass(op, dom, x)
    k = int(np.argmin(m))
    lo = x[max(k - 1, 0)] if k > 0 else 0.5 * (dom.a + x[0])
    hi = x[min(k + 1, n_scan - 1)] if k < n_scan - 1 else 0.5 * (dom.b + x[-1])
    f = lambda t: float(exterior_mass(op, dom, np.array([t]))[0])
    res = minimize_scalar(f, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12 * dom.diameter})
    return float(min(res.fun, m[k]))


# ---------------------------------------------------------------------------
# validation

@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    checks: tuple[Check, ...]
    cases: tuple[str, ...]
    lambda0: float | None
    source_class: str

    def failed(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def lines(self) -> list[str]:
        out = [f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}" for c in self.checks]
        out.append(f"cases: {','.join(self.cases) if self.cases else 'none'}")
        return out


def source_growth(src: SourceSpec, dom: DomainGeometry) -> float:
    """Estimated blow-up exponent ``kappa`` with ``|f| ~ d^{-kappa}`` near the
    boundary (0 for bounded sources)."""
    if src.kind == "power_singular":
        return src.kappa if src.c != 0 else 0.0
    if src.func is None:
        return 0.0
    d = np.logspace(-10, -2, 17)
    vals = []
    for side in (dom.a + d, dom.b - d) if dom.kind == "interval" else (dom.a + d,):
        vals.append(np.abs(src.values(side, d)))
    mag = np.max(vals, axis=0)
    if not np.all(np.isfinite(mag)):
        return math.inf
    if mag.max() <= 10.0 * max(mag[-1], 1e-300) or mag.max() == 0.0:
        return 0.0
    slope = np.polyfit(np.log(d[:8]), np.log(np.maximum(mag[:8], 1e-300)), 1)[0]
    return max(0.0, -float(slope))


def validate_problem(spec: ProblemSpec, n_scan: int = 1024) -> ValidationReport:
    """Check every hypothesis of the existence results; never raises."""
    checks: list[Check] = []
    s, p = spec.s, spec.p
    ex = critical_exponents(s)
    checks.append(Check("s_range", 0.5 < s < 1.0, f"s={s}"))
    checks.append(Check("p_range", 0.0 < p < 2.0 * s, f"p={p}, 2s={2 * s}"))
    degenerate = abs(p - 1.0) <= 1e-9
    checks.append(Check("p_not_one", not degenerate,
                        "p within 1e-9 of 1: scale exponent undefined" if degenerate else f"p={p}"))

    lam0 = None
    try:
        lam0 = lambda0(spec.operator, spec.domain, n_scan)
        ok = spec.lam > -lam0
        checks.append(Check("lambda", ok, f"lambda={spec.lam}, -lambda0={-lam0:.12g}"
                            + ("" if ok else " (lambda <= -lambda0)")))
    except DomainError as err:
        checks.append(Check("lambda", False, f"lambda0 unavailable: {err}"))

    try:
        norm = spec.exterior.weighted_norm(spec.domain, s)
        checks.append(Check("exterior_integrable", math.isfinite(norm),
                            f"weighted L1 norm={norm:.6g}"))
    except Exception as err:  # numerical failure is reported, not raised
        checks.append(Check("exterior_integrable", False, f"check failed: {err}"))

    kappa = source_growth(spec.source, spec.domain)
    if kappa == 0.0:
        src_class = "bounded"
    elif kappa < s + 1.0 and kappa < 2.0 * s:
        src_class = "H1+H2"
    elif kappa < s + 1.0:
        src_class = "H1"
    else:
        src_class = "none"
    h1 = kappa < s + 1.0
    h2 = kappa < 2.0 * s
    checks.append(Check("source_H1", h1, f"growth exponent {kappa:.6g} vs s+1={s + 1}"))
    checks.append(Check("source_H2", h2, f"growth exponent {kappa:.6g} vs 2s={2 * s}"))

    cases = []
    for c in blowup_cases(s, p):
        if degenerate and c != "family":
            continue
        if c == "scale_neg" and not h2:
            continue
        if c in ("family", "scale_pos") and not h1:
            continue
        cases.append(c)
    checks.append(Check("blowup_case", bool(cases),
                        f"p0={ex.p0:.6g} p1={ex.p1:.6g} p2={ex.p2:.6g}"))
    essential = {"s_range", "p_range", "lambda", "exterior_integrable", "blowup_case"}
    valid = all(c.passed for c in checks if c.name in essential)
    return ValidationReport(valid, tuple(checks), tuple(cases), lam0, src_class)

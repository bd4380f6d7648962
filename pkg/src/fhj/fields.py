"""Functions on the real line as seen by the nonlocal operators.

A field is sampled through ``sample(y, sa, sb)`` where ``sa = y - a`` and
``sb = b - y`` are the signed offsets to the domain ends.  The engine passes
offsets computed without cancellation, so fields that blow up at the boundary
keep full relative precision however close ``y`` is to it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import make_interp_spline

from .core import DomainError, DomainGeometry, ExteriorData


@dataclass(frozen=True)
class Point:
    """An evaluation point with its offsets to both domain ends."""

    x: float
    da: float
    db: float

    @classmethod
    def of(cls, x: float, dom: DomainGeometry | None = None) -> "Point":
        if dom is None:
            return cls(float(x), math.inf, math.inf)
        return cls(float(x), float(x) - dom.a, dom.b - float(x))

    @classmethod
    def at_distance(cls, dom: DomainGeometry, d: float, side: str = "b") -> "Point":
        """The point at distance ``d`` from the end ``side`` (``"a"`` or ``"b"``)."""
        if side == "a" or dom.kind == "half_line":
            return cls(dom.a + d, d, dom.b - (dom.a + d))
        return cls(dom.b - d, dom.diameter - d, d)

    @property
    def d(self) -> float:
        return min(self.da, self.db)


class Field:
    """Base class.  Subclasses implement :meth:`sample` and provide
    ``domain`` (``None`` for globally defined functions), ``growth`` (power
    growth at infinity) and ``oscillatory``."""

    def sample(self, y: np.ndarray, sa: np.ndarray, sb: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def value(self, pt: Point) -> float:
        return float(self.sample(np.array([pt.x]), np.array([pt.da]), np.array([pt.db]))[0])

    def breakpoints(self, pt: Point) -> list[tuple[float, int]]:
        """Offsets ``z > 0`` where ``u(x + z) + u(x - z)`` is not smooth, each
        with the number of graded panels to lay toward it."""
        return []

    def boundary_exponent(self) -> float | None:
        """Exponent ``e`` with ``u ~ d^e`` at the boundary from inside, when
        that is a singularity."""
        return None

    def local_scale(self, pt: Point) -> float:
        """Radius around ``pt`` where ``u`` is smooth."""
        return math.inf

    def near_delta(self, pt: Point, z: np.ndarray) -> np.ndarray:
        """``u(x+z) + u(x-z) - 2u(x)`` for small ``z``."""
        return self._delta(pt, z)

    def _delta(self, pt: Point, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        up = self.sample(pt.x + z, pt.da + z, pt.db - z)
        um = self.sample(pt.x - z, pt.da - z, pt.db + z)
        return up + um - 2.0 * self.value(pt)

    def __neg__(self) -> "Field":
        return ScaledField(self, -1.0)


@dataclass(frozen=True)
class ScaledField(Field):
    base: Field
    c: float

    @property
    def domain(self):
        return self.base.domain

    @property
    def growth(self):
        return self.base.growth

    @property
    def oscillatory(self):
        return self.base.oscillatory

    def sample(self, y, sa, sb):
        return self.c * self.base.sample(y, sa, sb)

    def breakpoints(self, pt):
        return self.base.breakpoints(pt)

    def boundary_exponent(self):
        return self.base.boundary_exponent()

    def local_scale(self, pt):
        return self.base.local_scale(pt)

    def near_delta(self, pt, z):
        return self.c * self.base.near_delta(pt, z)


@dataclass(frozen=True)
class SumField(Field):
    left: Field
    right: Field

    @property
    def domain(self):
        return self.left.domain or self.right.domain

    @property
    def growth(self):
        return max(self.left.growth, self.right.growth)

    @property
    def oscillatory(self):
        return self.left.oscillatory or self.right.oscillatory

    def sample(self, y, sa, sb):
        return self.left.sample(y, sa, sb) + self.right.sample(y, sa, sb)

    def breakpoints(self, pt):
        return self.left.breakpoints(pt) + self.right.breakpoints(pt)

    def boundary_exponent(self):
        e = [v for v in (self.left.boundary_exponent(), self.right.boundary_exponent())
             if v is not None]
        return min(e) if e else None

    def local_scale(self, pt):
        return min(self.left.local_scale(pt), self.right.local_scale(pt))

    def near_delta(self, pt, z):
        return self.left.near_delta(pt, z) + self.right.near_delta(pt, z)


@dataclass(frozen=True)
class CallableField(Field):
    """A globally defined function of position.

    ``scale`` is a length over which ``func`` is well approximated by a
    polynomial; it sets the near-field radius.  ``growth`` bounds the power
    growth at infinity.
    """

    func: Callable[[np.ndarray], np.ndarray]
    scale: float = 0.25
    growth: float = 0.0
    oscillatory: bool = False
    domain: DomainGeometry | None = None

    def sample(self, y, sa, sb):
        y = np.asarray(y, dtype=float)
        return np.asarray(self.func(y), dtype=float) * np.ones(y.shape)

    def local_scale(self, pt):
        return self.scale


@dataclass(frozen=True)
class DistanceField(Field):
    """``sum_k c_k d^{e_k} + const`` inside the domain, ``exterior`` outside.

    Barriers and the pure powers ``d^tau`` are of this form.  On an interval
    the distance has a kink at the centre.  With ``smoothing = delta > 0``
    the distance is replaced within ``delta`` of the centre by the C^1
    quadratic cap ``H - (y^2/delta + delta)/2`` (``y`` the offset from the
    centre, ``H`` the half-length); it is unchanged for ``d <= H - delta``.
    """

    domain: DomainGeometry
    terms: tuple[tuple[float, float], ...] = ()
    const: float = 0.0
    exterior: ExteriorData = field(default_factory=ExteriorData.zero)
    smoothing: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple((float(c), float(e)) for c, e in self.terms))

    @classmethod
    def power(cls, dom: DomainGeometry, tau: float, coef: float = 1.0, **kw) -> "DistanceField":
        return cls(dom, ((coef, tau),), **kw)

    @property
    def growth(self) -> float:
        g = self.exterior.growth
        if self.domain.kind == "half_line":
            g = max([g, 0.0] + [e for c, e in self.terms if c != 0.0])
        return g

    @property
    def oscillatory(self) -> bool:
        return self.exterior.tail == "oscillatory"

    def smoothed(self, d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Smoothed distance and its derivative with respect to ``d``."""
        d = np.asarray(d, dtype=float)
        delta = self.smoothing
        if delta <= 0.0 or self.domain.kind != "interval":
            return d, np.ones(d.shape)
        H = 0.5 * self.domain.diameter
        y = np.maximum(H - d, 0.0)
        cap = y < delta
        ds = np.where(cap, H - 0.5 * (y * y / delta + delta), d)
        return ds, np.where(cap, y / delta, 1.0)

    def inside(self, d: np.ndarray) -> np.ndarray:
        d, _ = self.smoothed(d)
        out = np.full(d.shape, self.const)
        for c, e in self.terms:
            if c != 0.0:
                out = out + c * d ** e
        return out

    def derivative_in_d(self, d: np.ndarray) -> np.ndarray:
        d, dd = self.smoothed(d)
        out = np.zeros(d.shape)
        for c, e in self.terms:
            if c != 0.0 and e != 0.0:
                out = out + c * e * d ** (e - 1.0)
        return out * dd

    def gradient(self, pt: Point) -> float:
        """``u'(x)``; ``d' = +1`` nearer ``a`` and ``-1`` nearer ``b``."""
        sign = 1.0 if pt.da <= pt.db else -1.0
        return sign * float(self.derivative_in_d(np.array([pt.d]))[0])

    def sample(self, y, sa, sb):
        y = np.asarray(y, dtype=float)
        sa = np.asarray(sa, dtype=float)
        sb = np.asarray(sb, dtype=float)
        d = np.minimum(sa, sb)
        out = np.empty(y.shape)
        ins = d > 0.0
        out[ins] = self.inside(d[ins])
        if (~ins).any():
            out[~ins] = self.exterior.values(y[~ins], -d[~ins])
        return out

    def breakpoints(self, pt):
        if self.domain.kind != "interval":
            return []
        c = self.domain.center
        if self.smoothing <= 0.0:
            zc = abs(c - pt.x)
            return [(zc, 10)] if zc > 0.0 else []
        out = []
        for edge in (c - self.smoothing, c + self.smoothing):
            z = abs(edge - pt.x)
            # only u'' jumps at the cap edge; offsets at rounding level are noise
            if z > 1e-8 * self.smoothing:
                out.append((z, 4))
        return out

    def boundary_exponent(self):
        e = [e for c, e in self.terms if c != 0.0 and e < 0.0]
        return min(e) if e else None

    def _top_offset(self, y: np.ndarray) -> np.ndarray:
        """``H - smoothed distance`` as a function of the offset from the centre."""
        ay = np.abs(y)
        delta = self.smoothing
        if delta <= 0.0:
            return ay
        return np.where(ay < delta, 0.5 * (y * y / delta + delta), ay)

    def near_delta(self, pt, z):
        """Second difference from exact distance increments, so it keeps
        relative precision for ``z`` far below the distance scale."""
        z = np.asarray(z, dtype=float)
        d0 = pt.d
        if self.domain.kind == "interval":
            y0 = 0.5 * (pt.da - pt.db)
            g0 = self._top_offset(np.array([y0]))[0]
            if self.smoothing > 0.0 and abs(y0) < self.smoothing:
                d0 = 0.5 * self.domain.diameter - g0
            incs = []
            for sg in (1.0, -1.0):
                y1 = y0 + sg * z
                lin = (np.abs(y1) >= self.smoothing) & (np.sign(y1) == np.sign(y0)) \
                    & (abs(y0) >= self.smoothing)
                both_cap = (np.abs(y1) < self.smoothing) & (abs(y0) < self.smoothing)
                D = g0 - self._top_offset(y1)
                D = np.where(lin, -sg * z * np.sign(y0), D)
                if self.smoothing > 0.0:
                    D = np.where(both_cap, -sg * z * (2.0 * y0 + sg * z) / (2.0 * self.smoothing), D)
                incs.append(D)
        else:
            incs = [z, -z]
        out = np.zeros(z.shape)
        for c, e in self.terms:
            if c == 0.0:
                continue
            for D in incs:
                out = out + c * d0 ** e * np.expm1(e * np.log1p(D / d0))
        return out


@dataclass(frozen=True, eq=False)
class GridFunction(Field):
    """Nodal values on a grid inside the domain plus an exterior rule.

    Between nodes the function is the cubic spline through the nodes and the
    boundary values of the exterior rule.  With ``local_model="quadratic"``
    evaluations at a node replace the spline within two local spacings by
    the three-point quadratic model, so the singular part of the integral
    only sees the discrete second difference.
    """

    domain: DomainGeometry
    nodes: np.ndarray
    values: np.ndarray
    exterior: ExteriorData = field(default_factory=ExteriorData.zero)
    local_model: str = "quadratic"

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if nodes.ndim != 1 or nodes.shape != values.shape:
            raise DomainError("nodes and values must be matching 1-d arrays")
        if nodes.size and (np.any(np.diff(nodes) <= 0.0)):
            raise DomainError("nodes must be strictly increasing")
        if nodes.size and not np.all(self.domain.contains(nodes)):
            raise DomainError("nodes must lie strictly inside the domain")
        if self.local_model not in ("quadratic", "spline"):
            raise DomainError(f"unknown local model {self.local_model!r}")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        knots, vals = [nodes], [values]
        for end, pos in (("a", 0), ("b", 1)):
            edge = self.domain.a if end == "a" else self.domain.b
            if not math.isfinite(edge):
                continue
            v = float(self.exterior.values(np.array([edge]), np.array([0.0]))[0])
            if math.isfinite(v):
                if pos == 0:
                    knots.insert(0, np.array([edge]))
                    vals.insert(0, np.array([v]))
                else:
                    knots.append(np.array([edge]))
                    vals.append(np.array([v]))
        kx = np.concatenate(knots)
        kv = np.concatenate(vals)
        object.__setattr__(self, "_knots", kx)
        k = min(3, kx.size - 1)
        object.__setattr__(self, "_spline", make_interp_spline(kx, kv, k=k) if k >= 1 else None)

    @property
    def growth(self) -> float:
        return self.exterior.growth

    @property
    def oscillatory(self) -> bool:
        return self.exterior.tail == "oscillatory"

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.domain, self.nodes, values, self.exterior, self.local_model)

    def point(self, i: int) -> Point:
        dom = self.domain
        x = self.nodes[i]
        return Point(x, x - dom.a, dom.b - x)

    def sample(self, y, sa, sb):
        y = np.asarray(y, dtype=float)
        sa = np.asarray(sa, dtype=float)
        sb = np.asarray(sb, dtype=float)
        d = np.minimum(sa, sb)
        out = np.empty(y.shape)
        ins = d > 0.0
        if self._spline is None:
            out[ins] = self.values[0] if self.values.size else 0.0
        else:
            out[ins] = self._spline(y[ins])
        if (~ins).any():
            out[~ins] = self.exterior.values(y[~ins], -d[~ins])
        return out

    def value(self, pt):
        i = self._node_index(pt.x)
        if i is not None:
            return float(self.values[i])
        return super().value(pt)

    def _node_index(self, x: float) -> int | None:
        i = int(np.searchsorted(self.nodes, x))
        for j in (i - 1, i):
            if 0 <= j < self.nodes.size and abs(self.nodes[j] - x) <= 1e-14 * max(1.0, abs(x)):
                return j
        return None

    def breakpoints(self, pt):
        z = np.abs(self._knots - pt.x)
        z = z[z > 0.0]
        return [(float(v), 0) for v in np.unique(z)]

    def _spacings(self, pt: Point) -> tuple[float, float]:
        k = self._knots
        i = int(np.searchsorted(k, pt.x))
        lo = pt.x - k[i - 1] if i > 0 else pt.da
        j = i + 1 if i < k.size and k[i] == pt.x else i
        hi = k[j] - pt.x if j < k.size else pt.db
        return lo, hi

    def local_scale(self, pt):
        hl, hr = self._spacings(pt)
        if self.local_model == "quadratic" and self._node_index(pt.x) is not None:
            return 2.0 * min(hl, hr)
        return min(hl, hr)

    def second_difference(self, i: int) -> float:
        """Three-point second derivative at node ``i`` on the knot set."""
        k = self._knots
        x = self.nodes[i]
        j = int(np.searchsorted(k, x))
        if j == 0 or j == k.size - 1:
            return float(self._spline(x, 2))
        xl, xr = k[j - 1], k[j + 1]
        hl, hr = x - xl, xr - x
        ul, ur = float(self._spline(xl)), float(self._spline(xr))
        u0 = float(self.values[i])
        return 2.0 * (hl * ur - (hl + hr) * u0 + hr * ul) / (hl * hr * (hl + hr))

    def near_delta(self, pt, z):
        i = self._node_index(pt.x)
        if self.local_model == "quadratic" and i is not None:
            return self.second_difference(i) * np.asarray(z, dtype=float) ** 2
        return self._delta(pt, z)

"""Principal-value evaluation of linear, extremal and inf-sup nonlocal
operators.

Every operator is reduced to the one-sided integral

    int_0^inf  R(delta(z), z) z^{-1-2s} dz,    delta(z) = u(x+z) + u(x-z) - 2u(x),

where ``R`` is ``a(z) * delta`` for a linear kernel and
``Gamma * delta_+ - gamma * delta_-`` (or the reverse) for the extremal
operators.  The integral is split at ``r0`` and ``R``:

* near field ``[0, r0]``: ``delta / z^2`` is smooth, Gauss-Jacobi with weight
  ``z^{1-2s}``;
* far field ``[r0, R]``: Gauss-Kronrod panels graded toward every point where
  ``delta`` is not smooth (domain ends, kinks, grid knots), with the
  power-law substitution at integrable boundary singularities;
* tail ``[R, inf)``: the substitution ``v = (R/z)^{2s}`` maps it onto
  ``(0, 1]`` with unit weight; oscillatory data is integrated over doubling
  panels instead and the remainder bounded crudely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import DomainError
from .fields import CallableField, Field, GridFunction, Point
from .kernels import Kernel, KernelError, OperatorSpec, combine_infsup
from .quadrature import HalfSegment, integrate, weighted_power_rule

__all__ = [
    "AdmissibilityError", "QuadratureError", "EvalResult", "GridFunction",
    "eval_linear_pv", "eval_extremal", "eval_infsup", "eval_operator",
    "apply_on_grid", "as_field",
]

BOUNDARY_LEVELS = 25
TAIL_LEVELS = 20
OSCILLATORY_DOUBLINGS = 12


class AdmissibilityError(DomainError):
    """The function is not integrable against the kernel tail."""


class QuadratureError(RuntimeError):
    """The requested tolerance could not be reached."""

    def __init__(self, msg: str, node: int | None = None):
        super().__init__(msg if node is None else f"node {node}: {msg}")
        self.node = node


@dataclass(frozen=True)
class EvalResult:
    value: float
    quad_error: float
    near_field: float
    far_field: float
    tail: float
    active: tuple[int, int] | None = None

    @classmethod
    def from_parts(cls, near: float, far: float, tail: float, err: float,
                   active=None) -> "EvalResult":
        return cls(near + far + tail, err, near, far, tail, active)

    def scaled(self, c: float) -> "EvalResult":
        return EvalResult.from_parts(c * self.near_field, c * self.far_field,
                                     c * self.tail, abs(c) * self.quad_error, self.active)


Response = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _linear_response(k: Kernel) -> Response:
    if k.is_constant:
        a = float(k.multiplier)
        return lambda delta, z: a * delta
    return lambda delta, z: k.a(z) * delta


def _extremal_response(sign: str, lower: float, upper: float) -> Response:
    hi, lo = (upper, lower) if sign == "+" else (lower, upper)
    return lambda delta, z: hi * np.maximum(delta, 0.0) - lo * np.maximum(-delta, 0.0)


def as_field(u, dom=None) -> Field:
    if isinstance(u, Field):
        return u
    if callable(u):
        return CallableField(u, domain=dom)
    raise TypeError(f"cannot evaluate an operator on {type(u).__name__}")


def _as_point(x, u: Field) -> Point:
    if isinstance(x, Point):
        return x
    return Point.of(float(x), u.domain)


# ---------------------------------------------------------------------------
# core integral

@dataclass
class _Layout:
    r0: float
    R: float
    segs: list[HalfSegment]
    codes: np.ndarray


def _layout(u: Field, pt: Point) -> _Layout:
    anchors: dict[float, list] = {}

    def add(z, levels, code=0, sing_in=None):
        if not (math.isfinite(z) and z > 0.0):
            return
        for key in anchors:
            if abs(key - z) <= 1e-15 * z:
                rec = anchors[key]
                rec[0] = max(rec[0], levels)
                rec[1] |= code
                if sing_in is not None:
                    rec[2] = sing_in if rec[2] is None else min(rec[2], sing_in)
                return
        anchors[z] = [levels, code, sing_in]

    e_in = u.boundary_exponent()
    dom = u.domain
    if dom is not None:
        add(pt.db, BOUNDARY_LEVELS, 1, e_in)
        add(pt.da, BOUNDARY_LEVELS, 2, e_in)
    for z, lev in u.breakpoints(pt):
        add(z, lev)

    smooth = [z for z, rec in anchors.items() if rec[0] > 0 or rec[1]]
    r0 = u.local_scale(pt)
    if smooth:
        r0 = min(r0, 0.5 * min(smooth))
    if not math.isfinite(r0):
        r0 = 0.5 * pt.d if math.isfinite(pt.d) else 0.25
    finite = [z for z in anchors]
    if dom is None:
        R = 40.0 * max(r0, 0.25 * (getattr(u, "scale", 0.25)))
    elif dom.kind == "interval":
        R = max(10.0 * dom.diameter, 2.0 * max(finite, default=0.0))
    else:
        R = 10.0 * max([pt.da] + finite)

    keys = sorted(z for z in anchors if r0 < z < R)
    pts = [(r0, 0, 0, None)] + [(z, *anchors[z]) for z in keys] + [(R, 0, 0, None)]
    segs, codes = [], []
    for (z1, l1, c1, _), (z2, l2, c2, e2) in zip(pts[:-1], pts[1:]):
        m = 0.5 * (z2 - z1)
        if m <= 0.0:
            continue
        # region beyond a boundary anchor is exterior data; inside carries
        # the field's boundary singularity
        segs.append(HalfSegment(z1, 1, m, l1, None))
        codes.append(c1)
        segs.append(HalfSegment(z2, -1, m, l2, e2 if c2 else None))
        codes.append(c2)
    return _Layout(r0, R, segs, np.asarray(codes, dtype=np.int64))


def _integrate_delta(u: Field, pt: Point, s: float, responses: list[Response],
                     tol: float) -> list[EvalResult]:
    """One result per response, sharing the panel layout."""
    if u.growth >= 2.0 * s:
        raise AdmissibilityError(f"growth exponent {u.growth} is not integrable "
                                 f"against |z|^(-1-2s) with 2s={2 * s}")
    lay = _layout(u, pt)
    u0 = u.value(pt)
    if not math.isfinite(u0):
        raise DomainError(f"field is not finite at x={pt.x}")
    beta = 1.0 - 2.0 * s
    codes_arr = lay.codes
    dirs = np.array([sg.dir for sg in lay.segs], float)

    def delta_far(z, w, seg):
        code = codes_arr[seg]
        dr = dirs[seg]
        sb_plus = np.where(code & 1, -dr * w, pt.db - z)
        sa_minus = np.where(code & 2, -dr * w, pt.da - z)
        up = u.sample(pt.x + z, pt.da + z, sb_plus)
        um = u.sample(pt.x - z, sa_minus, pt.db + z)
        return up + um - 2.0 * u0

    def delta_tail(z):
        up = u.sample(pt.x + z, pt.da + z, pt.db - z)
        um = u.sample(pt.x - z, pt.da - z, pt.db + z)
        return up + um - 2.0 * u0

    out = []
    tol3 = tol / 3.0
    for resp in responses:
        near, e_near = weighted_power_rule(
            lambda z: resp(u.near_delta(pt, z) / z ** 2, z), lay.r0, beta)

        def far_fn(z, w, seg, resp=resp):
            return resp(delta_far(z, w, seg), z) * z ** (-1.0 - 2.0 * s)

        far, e_far = integrate(far_fn, lay.segs, tol=tol3)
        tail, e_tail = _tail(u, resp, delta_tail, lay.R, s, tol3)
        err = e_near + e_far + e_tail
        scale = abs(near) + abs(far) + abs(tail)
        if err > 1e3 * max(tol, 1e-11 * scale):
            raise QuadratureError(f"error estimate {err:.3g} far above tolerance {tol:.3g} "
                                  f"at x={pt.x}")
        out.append(EvalResult.from_parts(near, far, tail, err))
    return out


def _tail(u: Field, resp: Response, delta: Callable, R: float, s: float,
          tol: float) -> tuple[float, float]:
    if u.oscillatory:
        segs = []
        z = R
        for _ in range(OSCILLATORY_DOUBLINGS):
            segs.append(HalfSegment(z, 1, z, 0, None))
            z *= 2.0
        fn = lambda zz, w, seg: resp(delta(zz), zz) * zz ** (-1.0 - 2.0 * s)
        val, err = integrate(fn, segs, tol=tol, max_rounds=60)
        # beyond the last panel only |delta| <= 4 sup|u| is known
        probe = np.abs(delta(z * np.array([1.0, 1.5, 2.0, 3.0])))
        bound = 2.0 * float(probe.max()) * z ** (-2.0 * s) / (2.0 * s)
        return val, err + bound
    pref = R ** (-2.0 * s) / (2.0 * s)
    g = u.growth
    sing = -g / (2.0 * s) if g > 0.0 else None

    def fn(v, w, seg):
        zz = R * np.maximum(v, 1e-300) ** (-0.5 / s)
        return resp(delta(zz), zz)

    val, err = integrate(fn, [HalfSegment(0.0, 1, 1.0, TAIL_LEVELS, sing)], tol=tol / pref)
    return pref * val, pref * err


# ---------------------------------------------------------------------------
# public evaluators

def eval_linear_pv(K: Kernel, u, x, tol: float = 1e-8) -> EvalResult:
    """``PV int (u(x+z) - u(x)) K(z) dz``."""
    f = as_field(u)
    pt = _as_point(x, f)
    return _integrate_delta(f, pt, K.s, [_linear_response(K)], tol)[0]


def eval_extremal(sign: str, s: float, lower: float, upper: float, u, x,
                  tol: float = 1e-8) -> EvalResult:
    """``M^+`` (``sign="+"``) or ``M^-`` over kernels with multipliers in
    ``[lower, upper]``."""
    if sign not in ("+", "-"):
        raise ValueError("sign must be '+' or '-'")
    if not 0.0 < lower <= upper:
        raise KernelError("need 0 < lower <= upper")
    f = as_field(u)
    pt = _as_point(x, f)
    return _integrate_delta(f, pt, s, [_extremal_response(sign, lower, upper)], tol)[0]


def eval_infsup(family, u, x, tol: float = 1e-8, kind: str = "infsup") -> EvalResult:
    """``inf_i sup_j L_ij u(x)``; ``kind="supinf"`` gives ``sup_i inf_j``.
    Ties go to the lowest index."""
    fam = [list(row) for row in family]
    if not fam or any(not row for row in fam):
        raise KernelError("inf-sup family must be non-empty")
    f = as_field(u)
    pt = _as_point(x, f)
    flat = [k for row in fam for k in row]
    res = _integrate_delta(f, pt, flat[0].s, [_linear_response(k) for k in flat], tol)
    width = max(len(row) for row in fam)
    table = np.full((len(fam), width), -np.inf if kind == "infsup" else np.inf)
    pos = 0
    index = {}
    for i, row in enumerate(fam):
        for j in range(len(row)):
            table[i, j] = res[pos].value
            index[(i, j)] = pos
            pos += 1
    value, (i, j) = combine_infsup(table, kind)
    best = res[index[(i, j)]]
    err = max(r.quad_error for r in res)
    return EvalResult(best.value, err, best.near_field, best.far_field, best.tail, (i, j))


def eval_operator(op: OperatorSpec, u, x, tol: float = 1e-8) -> EvalResult:
    if op.kind == "linear":
        return eval_linear_pv(op.kernel, u, x, tol)
    if op.kind == "pucci_plus":
        return eval_extremal("+", op.s, op.lower, op.upper, u, x, tol)
    if op.kind == "pucci_minus":
        return eval_extremal("-", op.s, op.lower, op.upper, u, x, tol)
    return eval_infsup(op.family, u, x, tol, kind=op.kind)


def apply_on_grid(op: OperatorSpec, u: GridFunction, tol: float = 1e-8) -> GridFunction:
    """Operator values at every node of ``u``, as a grid function with zero
    exterior."""
    vals = np.empty(u.nodes.size)
    for i in range(u.nodes.size):
        try:
            vals[i] = eval_operator(op, u, u.point(i), tol).value
        except (QuadratureError, DomainError) as err:
            raise QuadratureError(str(err), node=i) from err
    return GridFunction(u.domain, u.nodes, vals)

"""The boundary constant ``c(tau)`` and the barrier amplitudes derived from it.

``c(tau)`` is the value at ``x = 1`` of the operator applied to ``(x)_+^tau``
on the half-line, i.e. ``PV int [(1+z)_+^tau - 1] K(z) dz`` for a
homogeneous kernel.  It vanishes at ``s - 1`` and ``s``, is negative between
them, positive outside and diverges at ``-1`` and ``2s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import bisect

from .core import DomainError, DomainGeometry
from .fields import DistanceField, Point
from .fracop import EvalResult, eval_extremal, eval_operator
from .kernels import Kernel, OperatorSpec, unit_kernel

_HALF_LINE = DomainGeometry.half_line()
_AT_ONE = Point(1.0, 1.0, math.inf)


class CaseMismatchError(ValueError):
    """A constant has the wrong sign for the requested construction."""


def _profile(s: float, tau: float) -> DistanceField:
    if not -1.0 < tau < 2.0 * s:
        raise DomainError(f"tau={tau} outside (-1, 2s) = (-1, {2 * s})")
    return DistanceField.power(_HALF_LINE, tau)


def c_kernel(s: float, tau: float, K: Kernel | None = None, tol: float = 1e-10) -> EvalResult:
    """``c_K(tau)``; ``K`` defaults to the unit kernel."""
    K = unit_kernel(s) if K is None else K
    if abs(K.s - s) > 1e-15:
        raise DomainError("kernel order differs from s")
    return eval_operator(OperatorSpec.linear(K), _profile(s, tau), _AT_ONE, tol)


def c_extremal(s: float, tau: float, lower: float, upper: float, sign: str = "+",
               tol: float = 1e-10) -> EvalResult:
    """``c^+`` (``sign="+"``) or ``c^-`` for the extremal operators."""
    return eval_extremal(sign, s, lower, upper, _profile(s, tau), _AT_ONE, tol)


def c_operator(op: OperatorSpec, tau: float, tol: float = 1e-10) -> EvalResult:
    return eval_operator(op, _profile(op.s, tau), _AT_ONE, tol)


def c_tilde(s: float, tau: float, op: OperatorSpec | None = None, tol: float = 1e-10) -> EvalResult:
    """Constant of the reflected operator ``u -> -I(-u)``."""
    op = OperatorSpec.linear(unit_kernel(s)) if op is None else op
    res = eval_operator(op, -_profile(s, tau), _AT_ONE, tol)
    return res.scaled(-1.0)


@dataclass(frozen=True)
class CurveSample:
    s: float
    tau_nodes: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    operator: OperatorSpec

    def zeros(self, tol: float = 1e-8) -> list[float]:
        """Sign changes on the grid, refined by bisection."""
        out = []
        v = self.values
        for i in np.nonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0)[0]:
            lo, hi = self.tau_nodes[i], self.tau_nodes[i + 1]
            out.append(bisect(lambda t: c_operator(self.operator, t).value, lo, hi, xtol=tol))
        return out


def default_tau_grid(s: float, n: int = 200) -> np.ndarray:
    return np.linspace(-0.95, 2.0 * s - 0.05, n)


def c_curve(s: float, op: OperatorSpec | None = None, tau: np.ndarray | None = None,
            tol: float = 1e-10) -> CurveSample:
    op = OperatorSpec.linear(unit_kernel(s)) if op is None else op
    tau = default_tau_grid(s) if tau is None else np.asarray(tau, dtype=float)
    res = [c_operator(op, t, tol) for t in tau]
    return CurveSample(s, tau, np.array([r.value for r in res]),
                       np.array([r.quad_error for r in res]), op)


def find_zero(s: float, lo: float, hi: float, op: OperatorSpec | None = None,
              xtol: float = 1e-8) -> float:
    """Zero of ``c`` bracketed by ``[lo, hi]``."""
    op = OperatorSpec.linear(unit_kernel(s)) if op is None else op
    f = lambda t: c_operator(op, t).value
    if f(lo) * f(hi) > 0:
        raise ValueError(f"no sign change of c on [{lo}, {hi}]")
    return bisect(f, lo, hi, xtol=xtol)


def spherical_weight(a, s: float, N: int) -> float:
    """``int_{S^{N-1}} |theta_N|^{2s} a(theta) dsigma``.

    ``a`` maps unit vectors (rows of an array) to multipliers.  ``N = 1``
    uses counting measure on ``{-1, +1}``; ``N = 2`` integrates over the
    angle; higher ``N`` reduce to one angle when ``a`` is constant.
    """
    if N < 1:
        raise DomainError("dimension must be >= 1")
    if N == 1:
        return float(np.sum(a(np.array([[-1.0], [1.0]]))))
    if N == 2:
        f = lambda th: abs(math.sin(th)) ** (2 * s) * float(
            a(np.array([[math.cos(th), math.sin(th)]]))[0])
        val, _ = quad(f, 0.0, 2.0 * math.pi, points=[0.5 * math.pi, math.pi, 1.5 * math.pi],
                      limit=200, epsabs=1e-13, epsrel=1e-12)
        return val
    # constant multiplier: integrate |cos phi|^{2s} against the (N-2)-sphere slices
    probe = np.eye(N)
    vals = np.asarray(a(probe), dtype=float)
    if not np.allclose(vals, vals[0]):
        raise NotImplementedError("non-constant multipliers are supported for N <= 2")
    area = 2.0 * math.pi ** ((N - 1) / 2.0) / math.gamma((N - 1) / 2.0)
    f = lambda ph: abs(math.cos(ph)) ** (2 * s) * math.sin(ph) ** (N - 2)
    val, _ = quad(f, 0.0, math.pi, points=[0.5 * math.pi], epsabs=1e-13, epsrel=1e-12)
    return float(vals[0]) * area * val


@dataclass(frozen=True)
class ScaleConstants:
    C1_bar: float | None = None
    T_bar: float | None = None
    T_star: float | None = None


def c1_bar(s: float, p: float, t: float, c_plus_gamma: float) -> float:
    """``|t (s-1)|^p / |c^+(gamma)|``; needs ``c^+(gamma) < 0``."""
    if not c_plus_gamma < 0.0:
        raise CaseMismatchError(f"family barrier needs c+(gamma) < 0, got {c_plus_gamma}")
    return abs(t * (s - 1.0)) ** p / abs(c_plus_gamma)


def t_bar(beta: float, p: float, c_beta: float) -> float:
    """Positive root of ``c(beta) T = T^p |beta|^p``."""
    if not c_beta > 0.0:
        raise CaseMismatchError(f"positive scale barrier needs c(beta) > 0, got {c_beta}")
    return (c_beta / abs(beta) ** p) ** (1.0 / (p - 1.0))


def t_star(beta: float, p: float, c_tilde_beta: float) -> float:
    """Positive root of ``T c~(beta) + T^p |beta|^p = 0``."""
    if not c_tilde_beta < 0.0:
        raise CaseMismatchError(f"negative scale barrier needs c~(beta) < 0, got {c_tilde_beta}")
    return (-c_tilde_beta / abs(beta) ** p) ** (1.0 / (p - 1.0))


def scale_constants(s: float, p: float, t: float | None = None, gamma: float | None = None,
                    op: OperatorSpec | None = None) -> ScaleConstants:
    """Every amplitude that applies to ``(s, p)``, computed from ``op``.

    ``C1_bar`` needs ``t`` and ``gamma``; ``T_bar`` applies for
    ``p1 < p < p2`` and ``T_star`` for ``p2 < p < 2s``.
    """
    from .core import beta_exponent

    op = OperatorSpec.linear(unit_kernel(s)) if op is None else op
    c1 = tb = ts = None
    if t is not None and gamma is not None:
        lo, hi = op.bounds
        cp = c_extremal(s, gamma, lo, hi, "+").value
        c1 = c1_bar(s, p, t, cp)
    if 1.0 < p < 2.0 * s:
        ex = beta_exponent(s, p)
        if ex.band == "positive_scale":
            tb = t_bar(ex.beta, p, c_operator(op, ex.beta).value)
        elif ex.band == "negative_scale":
            ts = t_star(ex.beta, p, c_tilde(s, ex.beta, op).value)
    return ScaleConstants(c1, tb, ts)

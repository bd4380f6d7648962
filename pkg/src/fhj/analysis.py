"""Boundary blow-up rates of computed solutions and family verdicts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .core import DomainError, DomainGeometry
from .fields import GridFunction

MIN_POINTS = 6


class RateFitError(ValueError):
    """The data cannot support a boundary-rate fit."""


@dataclass(frozen=True)
class RateFit:
    """``u ~ coefficient * d^exponent`` on ``window``.

    ``correction`` is ``(B, theta)`` when the fit carried a lower-order
    factor ``1 + B d^theta``, else ``None``.
    """

    exponent: float
    coefficient: float
    r_squared: float
    window: tuple[float, float]
    n_points: int
    correction: tuple[float, float] | None = None

    def __post_init__(self):
        lo, hi = self.window
        if not 0.0 < lo < hi:
            raise RateFitError(f"bad window {self.window}")
        if self.n_points < MIN_POINTS:
            raise RateFitError(f"{self.n_points} points, need at least {MIN_POINTS}")


def default_window(u: GridFunction, solved_distance: float | None = None) -> tuple[float, float]:
    """``[max(5 h_min, 10 * solved_distance), 1e-2 * diam]``.

    ``solved_distance`` is the distance below which nodes held prescribed
    values (``1/n`` of the finest Perron level).
    """
    dom = u.domain
    d = np.sort(dom.distance(u.nodes))
    h_min = d[0] if d.size < 2 else min(d[0], float(np.min(np.diff(np.sort(u.nodes)))))
    lo = 5.0 * h_min
    if solved_distance is not None:
        lo = max(lo, 10.0 * solved_distance)
    return lo, 1e-2 * dom.diameter


def _r_squared(y: np.ndarray, resid: np.ndarray) -> float:
    ss = float(np.sum((y - y.mean()) ** 2))
    if ss <= 1e-24 * y.size:
        return 1.0 if float(np.sum(resid ** 2)) <= 1e-24 * y.size else 0.0
    return 1.0 - float(np.sum(resid ** 2)) / ss


def fit_power(d: np.ndarray, u: np.ndarray, window: tuple[float, float],
              correction: bool = True) -> RateFit:
    """Fit of ``log|u|`` against ``log d`` on ``window``.

    With ``correction`` the model also carries a factor ``1 + B d^theta``
    and is kept when it reduces the squared misfit by more than a factor
    of ten; pure powers are then fitted by the straight line exactly.
    """
    d = np.asarray(d, dtype=float)
    u = np.asarray(u, dtype=float)
    lo, hi = window
    sel = (d >= lo) & (d <= hi)
    n = int(sel.sum())
    if n < MIN_POINTS:
        raise RateFitError(f"{n} nodes in window {window}, need at least {MIN_POINTS}")
    ds, us = d[sel], u[sel]
    if np.any(us == 0.0) or np.any(np.sign(us) != np.sign(us[0])):
        raise RateFitError("u changes sign or vanishes inside the window; rate is ambiguous")
    sign = float(np.sign(us[0]))
    x, y = np.log(ds), np.log(np.abs(us))
    slope, icpt = np.polyfit(x, y, 1)
    lin_res = y - (icpt + slope * x)
    sse_lin = float(np.sum(lin_res ** 2))
    best = RateFit(float(slope), sign * math.exp(icpt), _r_squared(y, lin_res), (lo, hi), n)
    if not correction or n < 8 or sse_lin <= 1e-24 * n:
        return best
    scale = math.log(hi)

    def resid(q):
        a, e, b, th = q
        return a + e * x + np.log1p(np.clip(b * np.exp(th * (x - scale)), -1 + 1e-12, None)) - y

    try:
        sol = least_squares(resid, [icpt, slope, 0.0, 0.5],
                            bounds=([-np.inf, -np.inf, -0.99, 0.05], [np.inf, np.inf, 1e3, 2.0]),
                            x_scale=[1.0, 0.1, 0.1, 0.1])
    except (ValueError, np.linalg.LinAlgError):
        return best
    res = sol.fun
    if not sol.success or float(np.sum(res ** 2)) > 0.1 * sse_lin:
        return best
    a, e, b, th = sol.x
    return RateFit(float(e), sign * math.exp(a), _r_squared(y, res), (lo, hi), n,
                   (float(b * hi ** (-th)), float(th)))


def fit_boundary_rate(u: GridFunction, dom: DomainGeometry | None = None,
                      window: tuple[float, float] | None = None,
                      solved_distance: float | None = None, correction: bool = True) -> RateFit:
    dom = u.domain if dom is None else dom
    if window is None:
        window = default_window(u, solved_distance)
    return fit_power(dom.distance(u.nodes), u.values, window, correction)


@dataclass
class FamilyVerdict:
    ordered: bool
    fits: list[tuple[float, RateFit]]
    rates_ok: bool
    messages: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.ordered and self.rates_ok


def verify_family(solutions, s: float, window: tuple[float, float] | None = None,
                  solved_distance: float | None = None, exponent_tol: float = 0.03,
                  coefficient_rtol: float = 0.05) -> FamilyVerdict:
    """Strict ordering in ``t`` and ``u_t ~ t d^{s-1}`` for every member.

    ``solutions`` is a sequence of ``(t, GridFunction)`` on one grid.
    """
    members = sorted(((float(t), g) for t, g in solutions), key=lambda m: m[0])
    if not members:
        raise DomainError("empty family")
    ref = members[0][1]
    for _, g in members[1:]:
        if g.nodes.shape != ref.nodes.shape or not np.array_equal(g.nodes, ref.nodes):
            raise DomainError("family members live on different grids")
    msgs = []
    ordered = True
    for (t1, g1), (t2, g2) in zip(members, members[1:]):
        bad = np.nonzero(~(g1.values < g2.values))[0]
        if bad.size:
            ordered = False
            msgs.append(f"u_{t1:g} < u_{t2:g} fails at {bad.size} nodes, first x={g1.nodes[bad[0]]:.6g}")
    fits = []
    rates_ok = True
    for t, g in members:
        fit = fit_boundary_rate(g, window=window, solved_distance=solved_distance)
        fits.append((t, fit))
        de = abs(fit.exponent - (s - 1.0))
        dc = abs(fit.coefficient - t) / abs(t) if t != 0.0 else abs(fit.coefficient)
        if de > exponent_tol or dc > coefficient_rtol:
            rates_ok = False
            msgs.append(f"t={t:g}: exponent {fit.exponent:.4f} (want {s - 1:.4f}), "
                        f"coefficient {fit.coefficient:.4f}")
    return FamilyVerdict(ordered, fits, rates_ok, msgs)

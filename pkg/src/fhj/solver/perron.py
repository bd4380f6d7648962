"""Nested-domain construction of large solutions.

Level ``n`` solves the bounded problem on ``{d > 1/n}``.  Nodes closer to
the boundary are held at the truncated barrier: the barrier itself on
``{d > 1/(n+k+1)}`` and, in the collar below, the barrier capped by the
linear interpolant in ``d`` between the boundary datum and the barrier
value at the collar's edge.  For blow-up to ``+inf`` the subsolution is
truncated from above (``min``); for blow-down the supersolution is
truncated from below (``max``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..barriers import Barrier
from ..core import DomainError, ProblemSpec
from ..fields import GridFunction
from .discretize import Discretization, boundary_cell_loads
from .scheme import DiscreteProblem, SchemeState


class BracketError(RuntimeError):
    """An iterate left the barrier bracket."""

    def __init__(self, msg: str, node: int):
        super().__init__(msg)
        self.node = node


@dataclass
class PerronSchedule:
    """Truncation indices ``n`` (strictly increasing), the collar depths
    ``k(n)`` (filled in by the solve when ``None``) and the collar rule."""

    n_levels: list[float]
    k_of_n: list[float] | None = None
    interpolant: str = "linear"

    def __post_init__(self):
        n = np.asarray(self.n_levels, dtype=float)
        if n.size == 0 or np.any(n <= 0) or np.any(np.diff(n) <= 0):
            raise DomainError("truncation indices must be positive and strictly increasing")
        if self.interpolant != "linear":
            raise DomainError(f"unknown collar interpolant {self.interpolant!r}")
        if self.k_of_n is not None and len(self.k_of_n) != n.size:
            raise DomainError("k_of_n needs one entry per level")

    @classmethod
    def geometric(cls, n_first: float, n_last: float, per_decade: int = 2) -> "PerronSchedule":
        m = max(2, int(round(per_decade * math.log10(n_last / n_first))) + 1)
        return cls(list(np.geomspace(n_first, n_last, m)))

    @classmethod
    def for_grid(cls, disc: Discretization, nodes_inside: int = 5, per_decade: int = 2) -> "PerronSchedule":
        """Levels from ``10 / diam`` down to ``nodes_inside`` boundary
        spacings from the boundary."""
        d = np.sort(disc.distances)
        n_last = 1.0 / d[2 * nodes_inside]
        return cls.geometric(10.0 / disc.domain.diameter, n_last, per_decade)


def _power_mass(b: Barrier, r: float) -> float:
    """``int_0^r |b(d)| dd`` bounded termwise."""
    total = abs(b.shift) * r
    for c, e in b.terms:
        if e <= -1.0:
            return math.inf
        total += abs(c) * r ** (e + 1.0) / (e + 1.0)
    return total


def collar_depth(n: float, b: Barrier, spec: ProblemSpec, phi_bound: float) -> float:
    """Smallest ``k`` with the collar perturbation of the operator on
    ``{d > 1/n}`` below ``1 / (2n)``.

    The perturbation at a point at distance ``>= 1/n`` is bounded by the
    kernel at ``1/n - r`` times the mass of ``|barrier| + |phi|`` over the
    two collars of width ``r = 1/(n+k+1)``.
    """
    hi = max(K.bounds[1] for K in spec.operator.kernels)
    s = spec.s

    def excess(k: float) -> float:
        r = 1.0 / (n + k + 1.0)
        gap = 1.0 / n - r
        kern = hi * gap ** (-1.0 - 2.0 * s)
        return 2.0 * kern * (_power_mass(b, r) + phi_bound * r) - 0.5 / n

    if excess(1.0) <= 0.0:
        return 1.0
    lo, up = 1.0, 2.0
    while excess(up) > 0.0:
        lo, up = up, up * up
        if up > 1e300:
            return math.inf
    for _ in range(200):
        mid = math.sqrt(lo * up)
        if excess(mid) > 0.0:
            lo = mid
        else:
            up = mid
        if up / lo < 1.0 + 1e-6:
            break
    return math.ceil(up)


DISCRETE_INFLATION = 1.05
MAX_INFLATION = 1.6


def discrete_sign_gap(prob: DiscreteProblem, b: Barrier, region: np.ndarray) -> tuple[float, int]:
    """Worst signed residual of ``b`` on ``region`` (negative means the
    barrier fails as a discrete sub/supersolution) and its node."""
    disc = prob.disc
    extra = boundary_cell_loads(disc, b.terms, b.shift, 0.0)
    level = replace(prob, loads=[l + c for l, c in zip(prob.loads, extra)])
    v = b.values_at_distance(disc.distances)
    sgn = -1.0 if b.is_sub else 1.0
    floor = 1e3 * np.finfo(float).eps * level.magnitude(v)
    gap = (sgn * level.residual(v) + floor)[region]
    i = int(np.argmin(gap))
    return float(gap[i]), int(np.nonzero(region)[0][i])


def discrete_barrier(prob: DiscreteProblem, b: Barrier, region: np.ndarray) -> tuple[Barrier, float]:
    """``b`` with its leading amplitude scaled until it is a discrete
    sub/supersolution on ``region``; returns the barrier and the factor.

    The upwind gradient underestimates ``|Du|`` by a relative ``O(h/d)``
    on graded grids, which can outweigh a barrier whose leading terms
    cancel exactly.  Superbarriers grow outward, subbarriers inward.
    """
    (c, e), rest = b.terms[0], b.terms[1:]
    outward = b.is_sub == (c < 0.0)
    factor = 1.0
    while True:
        cand = replace(b, terms=((c * (factor if outward else 1.0 / factor), e),) + tuple(rest))
        gap, node = discrete_sign_gap(prob, cand, region)
        if gap >= 0.0:
            return cand, factor
        factor *= DISCRETE_INFLATION
        if factor > MAX_INFLATION:
            raise BracketError(f"{b.case_label} is not a discrete barrier at node {node}", node)


def truncated_values(b: Barrier, d: np.ndarray, n: float, k: float, phi: float) -> np.ndarray:
    """``U_{n,k}`` at distances ``d``."""
    d = np.asarray(d, dtype=float)
    r = 1.0 / (n + k + 1.0)
    bv = b.values_at_distance(d)
    edge = float(b.values_at_distance(np.array([r]))[0])
    cap = phi + (edge - phi) * d / r
    in_collar = d < r
    if b.sign > 0:
        return np.where(in_collar, np.minimum(cap, bv), bv)
    return np.where(in_collar, np.maximum(cap, bv), bv)


@dataclass
class LevelRecord:
    n: float
    k: float
    free_nodes: int
    iterations: int
    residual_norm: float
    contacts: tuple[int, int]
    cauchy: float | None
    at_rounding_floor: bool


def perron_solve(spec: ProblemSpec, sub: Barrier, sup: Barrier, schedule: PerronSchedule | None = None,
                 tol: float = 1e-9, grid: Discretization | None = None, max_iter: int = 100,
                 compact: float = 0.2, keep_levels: bool = False, on_level=None) -> SchemeState:
    """Finest-level solution of the nested-domain construction.

    ``compact`` is the distance defining the compact set on which the
    Cauchy-in-``n`` estimate is reported.  ``on_level(record, u, r)`` is
    called after every level with the level residual (``nan`` off the
    solved region).
    """
    if not sub.is_sub or sup.is_sub:
        raise DomainError("need a subsolution and a supersolution, in that order")
    if sub.sign != sup.sign:
        raise DomainError("barriers blow up in opposite directions")
    disc = Discretization.build(spec.operator, spec.domain) if grid is None else grid
    schedule = PerronSchedule.for_grid(disc) if schedule is None else schedule
    prob = DiscreteProblem.of(spec, disc)
    d = disc.distances
    finest = d > 1.0 / schedule.n_levels[-1]
    sub, sub_factor = discrete_barrier(prob, sub, finest)
    sup, sup_factor = discrete_barrier(prob, sup, finest)
    lower = sub.values_at_distance(d)
    upper = sup.values_at_distance(d)
    bad = np.nonzero(lower > upper)[0]
    if bad.size:
        raise BracketError(f"barriers are not ordered at node {bad[0]}", int(bad[0]))
    trunc = sub if sub.sign > 0 else sup
    phi = 0.5 * (prob.phi_a + prob.phi_b)
    phi_bound = max(abs(prob.phi_a), abs(prob.phi_b))
    ks = []
    records: list[LevelRecord] = []
    levels = []
    u = trunc.values_at_distance(d).copy()
    prev = prev_free = None
    for idx, n in enumerate(schedule.n_levels):
        free = d > 1.0 / n
        if not free.any():
            raise DomainError(f"level n={n} leaves no free nodes")
        if schedule.k_of_n is not None:
            k = float(schedule.k_of_n[idx])
        else:
            k = collar_depth(n, trunc, spec, phi_bound)
        ks.append(k)
        ghost = truncated_values(trunc, d, n, k, phi)
        level = prob
        if 1.0 / (n + k + 1.0) < d.min():
            extra = boundary_cell_loads(disc, trunc.terms, trunc.shift, phi)
            level = replace(prob, loads=[l + c for l, c in zip(prob.loads, extra)])
        u = np.where(free, u, ghost)
        if prev is not None:
            # nodes freed at this level start from the truncated barrier
            newly = free & ~prev_free
            u[newly] = ghost[newly]
        out = level.solve(u, free, lower, upper, tol, max_iter, "newton")
        u = out["u"]
        viol = np.nonzero(free & ((u < lower - 1e-12 * np.abs(lower)) | (u > upper + 1e-12 * np.abs(upper))))[0]
        if viol.size:
            raise BracketError(f"level n={n}: bracket violated at node {viol[0]}", int(viol[0]))
        cauchy = None
        on_compact = d > compact
        if prev is not None and on_compact.any():
            cauchy = float(np.max(np.abs(u - prev)[on_compact]))
        records.append(LevelRecord(float(n), k, int(free.sum()), out["iterations"], out["residual_norm"],
                                   out["contacts"], cauchy, out["at_rounding_floor"]))
        if keep_levels:
            levels.append(u.copy())
        if on_level is not None:
            on_level(records[-1], u.copy(), np.where(free, level.residual(u), np.nan))
        prev = u.copy()
        prev_free = free
    schedule.k_of_n = ks
    gf = GridFunction(disc.domain, disc.nodes, u, spec.exterior)
    info = dict(levels=records, schedule=schedule, free=free, solved_distance=1.0 / schedule.n_levels[-1],
                level_values=levels, grid=disc,
                inflation=(sub_factor, sup_factor), barriers=(sub, sup))
    return SchemeState(gf, records[-1].residual_norm, sum(r.iterations for r in records),
                       (lower, upper), True, [r.residual_norm for r in records],
                       records[-1].contacts, records[-1].at_rounding_floor, info)

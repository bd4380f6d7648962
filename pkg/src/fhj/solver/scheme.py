"""Monotone scheme ``-I_h u + g(D-u, D+u) + lam u = f`` and its solvers.

``g`` is the Godunov flux of ``|q|^p``.  The default solver is a
semismooth Newton (policy) iteration with backtracking; an explicit
pseudo-time iteration under the row-sum step bound is kept for small
grids.  Optional obstacles ``lower <= u <= upper`` enter through
``max(min(R, u - lower), u - upper)``, which keeps every accepted iterate
inside the bracket.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ..core import DomainError, ProblemSpec
from ..fields import GridFunction
from ..fracop import eval_operator
from .discretize import Discretization, exterior_load

ROUNDING_FACTOR = 1e3


class ConvergenceError(RuntimeError):
    """A nonlinear solve stopped before reaching its tolerance."""

    def __init__(self, msg: str, history: list[float]):
        super().__init__(msg)
        self.history = history


@dataclass
class SchemeState:
    grid: GridFunction
    residual_norm: float
    iterations: int
    brackets: tuple[np.ndarray, np.ndarray] | None = None
    converged: bool = True
    history: list[float] = field(default_factory=list)
    contacts: tuple[int, int] = (0, 0)
    at_rounding_floor: bool = False
    info: dict = field(default_factory=dict)

    @property
    def values(self) -> np.ndarray:
        return self.grid.values


def godunov(dm: np.ndarray, dp: np.ndarray, p: float) -> np.ndarray:
    """``max(max(a, 0)^p, (-min(b, 0))^p)``."""
    return np.maximum(np.maximum(dm, 0.0) ** p, np.maximum(-dp, 0.0) ** p)


@dataclass
class DiscreteProblem:
    """A discretised problem with some nodes held at given values.

    ``free`` selects the unknowns; the remaining nodes keep ``fixed``.
    ``loads[k]`` is the exterior load of kernel ``k`` including the
    boundary-knot terms.
    """

    disc: Discretization
    p: float
    lam: float
    f: np.ndarray
    phi_a: float
    phi_b: float
    loads: list[np.ndarray]

    @classmethod
    def of(cls, spec: ProblemSpec, disc: Discretization, tol: float = 1e-9) -> "DiscreteProblem":
        dom = disc.domain
        x = disc.nodes
        f = spec.source.values(x, disc.distances)
        phi_a = float(spec.exterior(np.array([dom.a]), dom)[0])
        phi_b = float(spec.exterior(np.array([dom.b]), dom)[0])
        loads = []
        for r in disc.rows:
            E = exterior_load(r.kernel, dom, spec.exterior, tol)
            loads.append(E + r.wa * phi_a + r.wb * phi_b)
        return cls(disc, spec.p, spec.lam, f, phi_a, phi_b, loads)

    # -- operator pieces ---------------------------------------------------

    def operator(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``I_h u`` and the index of the kernel active at each node."""
        vals = np.array([r.A @ u + e for r, e in zip(self.disc.rows, self.loads)])
        ni, nj = self.disc.shape
        if ni * nj == 1:
            return vals[0], np.zeros(u.size, dtype=int)
        v = vals.reshape(ni, nj, -1)
        kind = self.disc.operator.kind
        if kind == "infsup":
            j = np.argmax(v, axis=1)
            inner = np.take_along_axis(v, j[:, None, :], axis=1)[:, 0, :]
            i = np.argmin(inner, axis=0)
        else:
            j = np.argmin(v, axis=1)
            inner = np.take_along_axis(v, j[:, None, :], axis=1)[:, 0, :]
            i = np.argmax(inner, axis=0)
        jj = j[i, np.arange(u.size)]
        return inner[i, np.arange(u.size)], i * nj + jj

    def gradients(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        U = np.concatenate([[self.phi_a], u, [self.phi_b]])
        return (u - U[:-2]) / self.disc.hl, (U[2:] - u) / self.disc.hr

    def residual(self, u: np.ndarray) -> np.ndarray:
        Iu, _ = self.operator(u)
        dm, dp = self.gradients(u)
        return -Iu + godunov(dm, dp, self.p) + self.lam * u - self.f

    def magnitude(self, u: np.ndarray) -> np.ndarray:
        """Size of the terms summed in each residual entry; sets the
        rounding floor."""
        out = np.zeros(u.size)
        au = np.abs(u)
        for r, e in zip(self.disc.rows, self.loads):
            out = np.maximum(out, np.abs(r.A) @ au + np.abs(e))
        dm, dp = self.gradients(u)
        return out + godunov(dm, dp, self.p) + abs(self.lam) * au + np.abs(self.f)

    def jacobian(self, u: np.ndarray, free: np.ndarray) -> np.ndarray:
        _, pol = self.operator(u)
        n = u.size
        J = np.empty((n, n))
        if len(self.disc.rows) == 1:
            J[:] = -self.disc.rows[0].A
        else:
            for k, r in enumerate(self.disc.rows):
                sel = pol == k
                J[sel] = -r.A[sel]
        J[np.arange(n), np.arange(n)] += self.lam
        dm, dp = self.gradients(u)
        pm = np.maximum(dm, 0.0)
        pp = np.maximum(-dp, 0.0)
        left = (pm > 0.0) & (pm >= pp)
        right = (pp > 0.0) & ~left
        p = self.p
        idx = np.arange(n)
        cm = np.where(left, p * np.where(left, pm, 1.0) ** (p - 1.0) / self.disc.hl, 0.0)
        cp = np.where(right, p * np.where(right, pp, 1.0) ** (p - 1.0) / self.disc.hr, 0.0)
        J[idx, idx] += cm + cp
        J[idx[1:], idx[:-1]] -= cm[1:]
        J[idx[:-1], idx[1:]] -= cp[:-1]
        return J[np.ix_(free, free)]

    # -- solvers -------------------------------------------------------------

    def _merit(self, u, free, lower, upper, obstacle=True):
        R = self.residual(u)[free]
        F = R
        if obstacle and lower is not None:
            F = np.minimum(F, u[free] - lower[free])
        if obstacle and upper is not None:
            F = np.maximum(F, u[free] - upper[free])
        return F, R

    def solve(self, u0: np.ndarray, free: np.ndarray | None = None,
              lower: np.ndarray | None = None, upper: np.ndarray | None = None,
              tol: float = 1e-9, max_iter: int = 100, method: str = "newton",
              raise_on_failure: bool = True) -> dict:
        u = np.array(u0, dtype=float)
        free = np.ones(u.size, dtype=bool) if free is None else np.asarray(free, bool)
        if lower is not None and upper is not None and np.any(lower[free] > upper[free]):
            raise DomainError("obstacles are not ordered")
        if lower is not None:
            u[free] = np.maximum(u[free], lower[free])
        if upper is not None:
            u[free] = np.minimum(u[free], upper[free])
        step = self._newton if method == "newton" else self._pseudo_time
        if method not in ("newton", "pseudo_time"):
            raise DomainError(f"unknown method {method!r}")
        return step(u, free, lower, upper, tol, max_iter, raise_on_failure)

    @staticmethod
    def _project(v, free, lower, upper):
        if lower is not None:
            v = np.maximum(v, lower[free])
        if upper is not None:
            v = np.minimum(v, upper[free])
        return v

    def _done(self, F, u, free, tol):
        floor = ROUNDING_FACTOR * np.finfo(float).eps * self.magnitude(u)[free]
        small = np.abs(F) <= np.maximum(tol, floor)
        return bool(np.all(small)), bool(np.max(np.abs(F), initial=0.0) > tol)

    def _newton(self, u, free, lower, upper, tol, max_iter, raise_on_failure):
        bracketed = lower is not None or upper is not None
        # comparison keeps the discrete solution inside the bracket, so the
        # plain residual is tried first with clipping as a safeguard
        u, it, history, ok, floor = self._newton_loop(u, free, lower, upper, tol, max_iter,
                                                      obstacle=False)
        if not ok and bracketed:
            u, it2, h2, ok, floor = self._newton_loop(u, free, lower, upper, tol, max_iter,
                                                      obstacle=True)
            it += it2
            history += h2
            u = u.copy()
            u[free] = self._project(u[free], free, lower, upper)
        if ok:
            return self._result(u, free, lower, upper, it, history, True, floor)
        return self._fail(u, free, lower, upper, it, history, raise_on_failure)

    def _newton_loop(self, u, free, lower, upper, tol, max_iter, obstacle):
        history = []
        F, _ = self._merit(u, free, lower, upper, obstacle)
        it = 0
        while True:
            history.append(float(np.max(np.abs(F), initial=0.0)))
            done, floor = self._done(F, u, free, tol)
            if done:
                return u, it, history, True, floor
            if it >= max_iter:
                return u, it, history, False, False
            it += 1
            J = self.jacobian(u, free)
            uf = u[free]
            if obstacle:
                R = self.residual(u)[free]
                m = R if lower is None else np.minimum(R, uf - lower[free])
                rows = np.ones(uf.size, dtype=bool) if lower is None else R <= uf - lower[free]
                if upper is not None:
                    rows &= ~(uf - upper[free] > m)
                J[~rows] = 0.0
                J[~rows, ~rows] = 1.0
            try:
                delta = scipy.linalg.solve(J, -F, check_finite=False)
            except (scipy.linalg.LinAlgError, ValueError):
                delta = scipy.linalg.lstsq(J, -F)[0]
            alpha = 1.0
            base = float(np.linalg.norm(F))
            best = None
            for _ in range(40):
                trial = u.copy()
                v = uf + alpha * delta
                trial[free] = v if obstacle else self._project(v, free, lower, upper)
                Ft, _ = self._merit(trial, free, lower, upper, obstacle)
                nt = float(np.linalg.norm(Ft))
                if best is None or nt < best[0]:
                    best = (nt, trial, Ft)
                if nt <= (1.0 - 1e-4 * alpha) * base:
                    break
                alpha *= 0.5
            if best[0] >= base:
                return u, it, history, False, False
            u, F = best[1], best[2]

    def step_bound(self, u: np.ndarray) -> float:
        """Largest explicit step keeping the update monotone."""
        diag = np.max([-np.diag(r.A) for r in self.disc.rows], axis=0)
        dm, dp = self.gradients(u)
        p = self.p
        slope = np.maximum(np.abs(dm), np.abs(dp)) + 1.0
        h = np.minimum(self.disc.hl, self.disc.hr)
        gh = p * slope ** max(p - 1.0, 0.0) * 2.0 / h
        return float(1.0 / np.max(diag + gh + max(self.lam, 0.0)))

    def _pseudo_time(self, u, free, lower, upper, tol, max_iter, raise_on_failure):
        history = []
        it = 0
        while True:
            F, R = self._merit(u, free, lower, upper)
            history.append(float(np.max(np.abs(F), initial=0.0)))
            done, floor = self._done(F, u, free, tol)
            if done:
                return self._result(u, free, lower, upper, it, history, True, floor)
            if it >= max_iter:
                return self._fail(u, free, lower, upper, it, history, raise_on_failure)
            it += 1
            dt = 0.9 * self.step_bound(u)
            new = u[free] - dt * R
            if lower is not None:
                new = np.maximum(new, lower[free])
            if upper is not None:
                new = np.minimum(new, upper[free])
            u = u.copy()
            u[free] = new

    def _result(self, u, free, lower, upper, it, history, ok, floor):
        lo = int(np.sum(np.isclose(u[free], lower[free], rtol=0, atol=1e-12))) if lower is not None else 0
        hi = int(np.sum(np.isclose(u[free], upper[free], rtol=0, atol=1e-12))) if upper is not None else 0
        return dict(u=u, iterations=it, history=history, converged=ok,
                    residual_norm=history[-1], contacts=(lo, hi), at_rounding_floor=floor)

    def _fail(self, u, free, lower, upper, it, history, raise_on_failure):
        if raise_on_failure:
            raise ConvergenceError(
                f"no convergence after {it} iterations; residual history {history[-5:]}", history)
        return self._result(u, free, lower, upper, it, history, False, False)


def _grid_function(disc: Discretization, spec: ProblemSpec, u: np.ndarray) -> GridFunction:
    return GridFunction(disc.domain, disc.nodes, u, spec.exterior)


def solve_bounded(spec: ProblemSpec, dirichlet: dict | None = None, grid: Discretization | None = None,
                  tol: float = 1e-9, max_iter: int = 100, method: str = "newton",
                  u0: np.ndarray | None = None, brackets=None) -> SchemeState:
    """Solve the Dirichlet problem on ``spec.domain``'s grid.

    ``dirichlet`` optionally maps a boolean node mask to values held fixed
    (nodes treated as exterior); data outside the domain comes from
    ``spec.exterior``.  ``brackets`` is an optional pair of node arrays.
    """
    disc = Discretization.build(spec.operator, spec.domain) if grid is None else grid
    prob = DiscreteProblem.of(spec, disc)
    n = disc.n
    u = np.zeros(n) if u0 is None else np.array(u0, dtype=float)
    free = np.ones(n, dtype=bool)
    if dirichlet is not None:
        mask = np.asarray(dirichlet["mask"], bool)
        u[mask] = np.asarray(dirichlet["values"], float)[mask] \
            if np.size(dirichlet["values"]) == n else dirichlet["values"]
        free = ~mask
    lower, upper = (None, None) if brackets is None else brackets
    out = prob.solve(u, free, lower, upper, tol, max_iter, method)
    return SchemeState(_grid_function(disc, spec, out["u"]), out["residual_norm"], out["iterations"],
                       brackets, out["converged"], out["history"], out["contacts"],
                       out["at_rounding_floor"], {"free": free, "backend_rows": disc.n})


def residual(u: GridFunction, spec: ProblemSpec, region: np.ndarray | None = None,
             mode: str = "continuous", grid: Discretization | None = None,
             tol: float = 1e-8) -> tuple[np.ndarray, float]:
    """Pointwise residual at the nodes of ``u`` and its sup over ``region``.

    ``"continuous"`` evaluates the operator by adaptive quadrature on the
    interpolant and uses centred differences for ``u'``; ``"discrete"``
    uses the assembled scheme.
    """
    n = u.nodes.size
    region = np.ones(n, dtype=bool) if region is None else np.asarray(region, bool)
    if mode == "discrete":
        disc = Discretization.build(spec.operator, spec.domain) if grid is None else grid
        if disc.n != n:
            raise DomainError("grid and function sizes differ")
        r = DiscreteProblem.of(spec, disc).residual(u.values)
    elif mode == "continuous":
        dom = spec.domain
        d = dom.distance(u.nodes)
        f = spec.source.values(u.nodes, d)
        r = np.full(n, np.nan)
        for i in np.nonzero(region)[0]:
            pt = u.point(i)
            Iu = eval_operator(spec.operator, u, pt, tol).value
            r[i] = -Iu + abs(_centred_slope(u, i)) ** spec.p + spec.lam * u.values[i] - f[i]
    else:
        raise DomainError(f"unknown residual mode {mode!r}")
    sup = float(np.max(np.abs(r[region]), initial=0.0))
    return r, sup


def _centred_slope(u: GridFunction, i: int) -> float:
    k = u._knots
    x = u.nodes[i]
    j = int(np.searchsorted(k, x))
    xl, xr = k[j - 1], k[j + 1]
    hl, hr = x - xl, xr - x
    ul = u.values[i - 1] if i > 0 else float(u._spline(xl))
    ur = u.values[i + 1] if i + 1 < u.nodes.size else float(u._spline(xr))
    u0 = u.values[i]
    return (hl * hl * (ur - u0) + hr * hr * (u0 - ul)) / (hl * hr * (hl + hr))

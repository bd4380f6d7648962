"""Dense product-integration discretisation of linear nonlocal operators.

Knots are ``a``, the interior nodes and ``b``.  For the row of node ``x_i``:

* the two cells touching ``x_i`` use the three-point quadratic model
  ``D1 z + D2 z^2 / 2`` integrated exactly against the kernel;
* every other cell integrates the P1 interpolant exactly (Gauss rules in
  ``log rho``) plus a curvature correction ``-kappa * u''`` with ``u''``
  from neighbouring three-point differences;
* the exterior contributes ``E_i - m_i u_i`` with ``m_i`` the kernel mass
  outside the domain.

Rows whose correction would make an off-diagonal weight negative are
reassembled without it, so every assembled operator is monotone.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ..core import DomainError, DomainGeometry, ExteriorData
from ..fields import DistanceField, Point
from ..fracop import eval_linear_pv
from ..kernels import Kernel, OperatorSpec
from ..quadrature import gauss_jacobi
from . import _assemble_py

if os.environ.get("FHJ_PURE_PYTHON"):
    _far_field = _assemble_py.far_field
    BACKEND = "python"
else:
    try:
        from ._assemble import far_field as _far_field
        BACKEND = "cython"
    except ImportError:
        _far_field = _assemble_py.far_field
        BACKEND = "python"

# cell width in log(rho) selecting the 4-, 8- or 16-point rule
THIN_CELL = 0.02
THICK_CELL = 0.25


def _gauss01(m: int) -> tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (t + 1.0), 0.5 * w


_G4 = _gauss01(4)
_G8 = _gauss01(8)
_G16 = _gauss01(16)


@dataclass(frozen=True)
class Knots:
    """Knot offsets from both ends, accurate on their own side."""

    DA: np.ndarray
    DB: np.ndarray
    side: np.ndarray
    hgap: np.ndarray

    @classmethod
    def of(cls, dom: DomainGeometry) -> "Knots":
        da, db = dom.node_boundary_distances()
        L = dom.diameter
        DA = np.concatenate([[0.0], da, [L]])
        DB = np.concatenate([[L], db, [0.0]])
        side = (DA > DB).astype(np.int8)
        hgap = np.where(side[1:] == 1, DB[:-1] - DB[1:], DA[1:] - DA[:-1])
        if np.any(hgap <= 0.0):
            raise DomainError("grid nodes are not strictly increasing")
        return cls(DA, DB, side, hgap)

    @property
    def n(self) -> int:
        return self.DA.size - 2


def curvature_stencils(hgap: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per cell, the start knot and four weights of ``u''`` averaged from the
    three-point differences at the cell ends; ``-1`` marks cells without one.

    A difference at knot ``m`` is used only when both neighbours are
    interior nodes, so no stencil reaches the boundary knots.
    """
    ncell = hgap.size
    nk = ncell + 1
    cs = np.full(ncell, -1, dtype=np.int64)
    cc = np.zeros((ncell, 4))
    for c in range(1, ncell - 1):
        ends = [m for m in (c, c + 1) if 2 <= m <= nk - 3]
        if not ends:
            continue
        start = c - 1
        wt = 1.0 / len(ends)
        for m in ends:
            hl, hr = hgap[m - 1], hgap[m]
            j = m - 1 - start
            cc[c, j] += wt * 2.0 / (hl * (hl + hr))
            cc[c, j + 1] -= wt * 2.0 / (hl * hr)
            cc[c, j + 2] += wt * 2.0 / (hr * (hl + hr))
        cs[c] = start
    if cs.size and cs.max() + 3 > nk - 1:
        raise AssertionError("curvature stencil leaves the knot range")
    return cs, cc


def _near_moments(K: Kernel, hl: np.ndarray, hr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``PV int_{-hl}^{hr} z K`` and ``int_{-hl}^{hr} z^2 K``."""
    s = K.s
    if K.is_constant:
        a = float(K.multiplier)
        A1 = a * (hr ** (1 - 2 * s) - hl ** (1 - 2 * s)) / (1 - 2 * s)
        A2 = a * (hr ** (2 - 2 * s) + hl ** (2 - 2 * s)) / (2 - 2 * s)
        return A1, A2
    x, w = gauss_jacobi(24, 1.0 - 2.0 * s)
    A2 = np.array([h ** (2 - 2 * s) * np.sum(w * K.a(h * x)) for h in hl]) \
        + np.array([h ** (2 - 2 * s) * np.sum(w * K.a(h * x)) for h in hr])
    t, wt = _G16
    A1 = np.empty(hl.size)
    for i, (lo, hi) in enumerate(zip(hl, hr)):
        a_, b_ = min(lo, hi), max(lo, hi)
        L = np.log(b_ / a_)
        rho = a_ * np.exp(L * t)
        val = np.sum(wt * L * K.a(rho) * rho ** (1 - 2 * s))
        A1[i] = val if hi >= lo else -val
    return A1, A2


@dataclass
class LinearRows:
    """``I_h u = A u + wa * u(a) + wb * u(b) + E`` for one kernel.

    ``A`` already carries ``-m_i`` on its diagonal.
    """

    kernel: Kernel
    A: np.ndarray
    wa: np.ndarray
    wb: np.ndarray
    mass: np.ndarray
    uncorrected_rows: int


def assemble_kernel(K: Kernel, knots: Knots, curvature: bool = True,
                    far_field=None) -> LinearRows:
    far_field = _far_field if far_field is None else far_field
    if not K.is_constant and far_field is not _assemble_py.far_field:
        far_field = _assemble_py.far_field
    n = knots.n
    nk = n + 2
    rows = np.arange(1, n + 1, dtype=np.int64)
    cs, cc = curvature_stencils(knots.hgap)
    a = float(K.multiplier) if K.is_constant else K.a

    def build(sel: np.ndarray, curv: bool) -> np.ndarray:
        W = np.zeros((sel.size, nk))
        flags = np.full(sel.size, 1 if curv else 0, dtype=np.int8)
        far_field(knots.DA, knots.DB, knots.side, knots.hgap, K.s, a, cs, cc,
                  sel, flags, *_G4, *_G8, *_G16, THIN_CELL, THICK_CELL, W)
        hl, hr = knots.hgap[sel - 1], knots.hgap[sel]
        A1, A2 = _near_moments(K, hl, hr)
        r = np.arange(sel.size)
        W[r, sel - 1] += -A1 * hr / (hl * (hl + hr)) + A2 / (hl * (hl + hr))
        W[r, sel] += A1 * (hr - hl) / (hl * hr) - A2 / (hl * hr)
        W[r, sel + 1] += A1 * hl / (hr * (hl + hr)) + A2 / (hr * (hl + hr))
        return W

    W = build(rows, curvature)
    off = W.copy()
    off[np.arange(n), rows] = 0.0
    bad = np.nonzero(np.any(off < 0.0, axis=1))[0]
    if bad.size:
        W[bad] = build(rows[bad], False)
        off = W.copy()
        off[np.arange(n), rows] = 0.0
        if np.any(off < 0.0):
            raise DomainError("grid too irregular for a monotone discretisation")
    mass = np.array([K.mass_beyond(x) + K.mass_beyond(y)
                     for x, y in zip(knots.DA[1:-1], knots.DB[1:-1])])
    A = W[:, 1:-1].copy()
    A[np.arange(n), np.arange(n)] -= mass
    return LinearRows(K, A, W[:, 0].copy(), W[:, -1].copy(), mass, int(bad.size))


def exterior_load(K: Kernel, dom: DomainGeometry, exterior: ExteriorData,
                  tol: float = 1e-9) -> np.ndarray:
    """``int_{complement} phi(y) K(x_i - y) dy`` at every node."""
    if exterior.is_zero:
        return np.zeros(dom.n)
    fld = DistanceField(dom, (), 0.0, exterior)
    x = dom.nodes()
    da, db = dom.node_boundary_distances()
    return np.array([eval_linear_pv(K, fld, Point(xi, ai, bi), tol).value
                     for xi, ai, bi in zip(x, da, db)])


@dataclass
class Discretization:
    """Assembled rows for every kernel of an operator on a fixed grid."""

    domain: DomainGeometry
    operator: OperatorSpec
    knots: Knots
    rows: list[LinearRows]
    shape: tuple[int, int]

    @classmethod
    def build(cls, op: OperatorSpec, dom: DomainGeometry, curvature: bool = True,
              far_field=None) -> "Discretization":
        if op.kind not in ("linear", "infsup", "supinf"):
            raise NotImplementedError(
                "the discrete scheme supports linear operators and inf-sup families")
        if dom.kind != "interval":
            raise DomainError("the discrete scheme needs a bounded interval")
        knots = Knots.of(dom)
        if op.kind == "linear":
            shape = (1, 1)
            kernels = [op.kernel]
        else:
            fam = op.family
            shape = (len(fam), len(fam[0]))
            kernels = [k for row in fam for k in row]
        rows = [assemble_kernel(K, knots, curvature, far_field) for K in kernels]
        return cls(dom, op, knots, rows, shape)

    @property
    def n(self) -> int:
        return self.knots.n

    @property
    def nodes(self) -> np.ndarray:
        return self.domain.nodes()

    @property
    def distances(self) -> np.ndarray:
        return np.minimum(self.knots.DA[1:-1], self.knots.DB[1:-1])

    @property
    def hl(self) -> np.ndarray:
        return self.knots.hgap[:-1]

    @property
    def hr(self) -> np.ndarray:
        return self.knots.hgap[1:]

    def min_mass(self) -> np.ndarray:
        return np.min([r.mass for r in self.rows], axis=0)


def _cell_weights(rho0: np.ndarray, h: float, a, s: float) -> tuple[np.ndarray, np.ndarray]:
    """P1 weights of one far cell, with the rule the assembly picks."""
    L = np.log1p(h / rho0)
    hh = np.full(rho0.size, h)
    wn, wf = np.zeros(rho0.size), np.zeros(rho0.size)
    for m, (t, w) in ((L < THIN_CELL, _G4), ((L >= THIN_CELL) & (L < THICK_CELL), _G8),
                      (L >= THICK_CELL, _G16)):
        if m.any():
            wn[m], wf[m], _ = _assemble_py._rule(rho0[m], hh[m], L[m], t, w, a, s)
    return wn, wf


def boundary_cell_loads(disc: Discretization, terms, const: float = 0.0, phi: float = 0.0,
                        m: int = 24) -> list[np.ndarray]:
    """Per kernel, the load that replaces the P1 integral over the two
    boundary cells by the exact integral of ``sum c d^e + const``.

    Needed when nodes next to the boundary hold a singular profile: the
    first cell's chord misses a mass of order ``d_min^(1+e)``, which the
    kernel amplifies at every node.  Nodes adjacent to a boundary cell get
    no correction.
    """
    kn = disc.knots
    n = kn.n
    out = []
    for rows in disc.rows:
        K = rows.kernel
        s = K.s
        corr = np.zeros(n)
        for side in ("a", "b"):
            if side == "a":
                h0 = kn.hgap[0]
                dist = kn.DA[1:-1]
                sel = np.arange(1, n)
            else:
                h0 = kn.hgap[-1]
                dist = kn.DB[1:-1]
                sel = np.arange(0, n - 1)
            rho0 = dist[sel] - h0
            exact = np.zeros(sel.size)
            for c, e in list(terms) + [(const, 0.0)]:
                if c == 0.0:
                    continue
                t, w = gauss_jacobi(m, e)
                y = h0 * t
                rho = dist[sel, None] - y[None, :]
                exact += c * h0 ** (1.0 + e) * np.sum(w * K(rho), axis=1)
            node_val = const + sum(c * h0 ** e for c, e in terms)
            wn, wf = _cell_weights(rho0, h0, float(K.multiplier) if K.is_constant else K.a, s)
            corr[sel] += exact - wn * node_val - wf * phi
        out.append(corr)
    return out

"""Splitting non-zero exterior data off into the source term.

With ``phi~`` equal to ``phi`` outside the domain and zero inside,
``I(v + phi~) - I v`` lies between ``M^- phi~`` and ``M^+ phi~``.  Both
bounds are evaluated at the grid nodes here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import DomainError, DomainGeometry, ExteriorData
from ..fields import DistanceField, GridFunction, Point
from ..fracop import QuadratureError, eval_extremal
from ..kernels import OperatorSpec
from .discretize import Discretization


@dataclass(frozen=True)
class ExteriorShift:
    """``M^- phi~`` and ``M^+ phi~`` at the nodes.  ``flags`` marks nodes
    where the quadrature failed; their values are ``nan``."""

    lower: GridFunction
    upper: GridFunction
    flags: np.ndarray

    @property
    def ok(self) -> bool:
        return not self.flags.any()


def reduce_exterior_data(phi: ExteriorData, op: OperatorSpec, dom: DomainGeometry,
                         grid: Discretization | np.ndarray | None = None,
                         tol: float = 1e-10) -> ExteriorShift:
    if isinstance(grid, Discretization):
        x = grid.nodes
    elif grid is None:
        x = dom.nodes()
    else:
        x = np.asarray(grid, dtype=float)
    if not np.all(dom.contains(x)):
        raise DomainError("evaluation nodes must lie inside the domain")
    n = x.size
    lo, hi = np.zeros(n), np.zeros(n)
    flags = np.zeros(n, dtype=bool)
    if not phi.is_zero:
        gl, gu = op.bounds
        fld = DistanceField(dom, (), 0.0, phi)
        for i, xi in enumerate(x):
            pt = Point.of(float(xi), dom)
            try:
                lo[i] = eval_extremal("-", op.s, gl, gu, fld, pt, tol).value
                hi[i] = eval_extremal("+", op.s, gl, gu, fld, pt, tol).value
            except QuadratureError:
                flags[i] = True
                lo[i] = hi[i] = np.nan
    return ExteriorShift(GridFunction(dom, x, lo), GridFunction(dom, x, hi), flags)

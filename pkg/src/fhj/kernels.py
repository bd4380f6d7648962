"""Symmetric jump kernels and the operator specifications built from them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import gamma


class KernelError(ValueError):
    """Raised for kernels outside the ellipticity class."""


def fractional_laplacian_constant(s: float, dim: int = 1) -> float:
    """Normalising constant making ``C * PV int (u(x+z)-u(x))/|z|^(N+2s)``
    equal to ``-(-Delta)^s u``."""
    return 4.0 ** s * gamma(dim / 2.0 + s) / (math.pi ** (dim / 2.0) * abs(gamma(-s)))


@dataclass(frozen=True)
class Kernel:
    """``K(z) = a(|z|) |z|^{-(1+2s)}`` on the real line.

    ``multiplier`` is either a constant or a vectorised callable of ``|z|``.
    Only ``|z|`` is ever passed, which makes the kernel even by construction.
    """

    s: float
    multiplier: float | Callable[[np.ndarray], np.ndarray] = 1.0
    lower: float | None = None
    upper: float | None = None

    def __post_init__(self):
        if not 0.0 < self.s < 1.0:
            raise KernelError(f"order s={self.s} outside (0, 1)")
        lo, hi = self.bounds
        if not 0.0 < lo <= hi < math.inf:
            raise KernelError(f"invalid ellipticity bounds ({lo}, {hi})")
        if not self.is_constant:
            r = np.logspace(-8, 8, 401)
            a = np.asarray(self.multiplier(r), dtype=float)
            slack = 1e-12 * hi
            if np.any(a < lo - slack) or np.any(a > hi + slack) or not np.all(np.isfinite(a)):
                raise KernelError("kernel multiplier leaves the ellipticity band")

    @property
    def is_constant(self) -> bool:
        return not callable(self.multiplier)

    @property
    def bounds(self) -> tuple[float, float]:
        if self.is_constant:
            a = float(self.multiplier)
            lo = a if self.lower is None else self.lower
            hi = a if self.upper is None else self.upper
            return lo, hi
        if self.lower is None or self.upper is None:
            raise KernelError("variable multipliers need explicit bounds")
        return float(self.lower), float(self.upper)

    @property
    def homogeneous(self) -> bool:
        # in one dimension an even homogeneous kernel has a constant multiplier
        return self.is_constant

    def a(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.is_constant:
            return np.full(r.shape, float(self.multiplier))
        return np.asarray(self.multiplier(r), dtype=float)

    def __call__(self, z: np.ndarray) -> np.ndarray:
        r = np.abs(np.asarray(z, dtype=float))
        return self.a(r) * r ** (-1.0 - 2.0 * self.s)

    def rescaled(self, rho: float) -> "Kernel":
        """``K^rho(z) = rho^{1+2s} K(rho z)``."""
        if self.is_constant:
            return self
        f = self.multiplier
        return Kernel(self.s, lambda r, f=f, rho=rho: f(rho * np.asarray(r)),
                      self.lower, self.upper)

    def scaled(self, c: float) -> "Kernel":
        if c <= 0:
            raise KernelError("kernel scale must be positive")
        lo, hi = self.bounds
        if self.is_constant:
            return Kernel(self.s, c * float(self.multiplier))
        f = self.multiplier
        return Kernel(self.s, lambda r, f=f, c=c: c * f(r), c * lo, c * hi)

    def mass_beyond(self, r: float) -> float:
        """``int_r^inf K(z) dz`` (one side)."""
        if self.is_constant:
            return float(self.multiplier) * r ** (-2.0 * self.s) / (2.0 * self.s)
        from scipy.integrate import quad
        s = self.s
        # v = (r/z)^{2s}
        val, _ = quad(lambda v: float(self.a(np.array([r * v ** (-0.5 / s)]))[0]),
                      0.0, 1.0, limit=200)
        return val * r ** (-2.0 * s) / (2.0 * s)


def unit_kernel(s: float) -> Kernel:
    return Kernel(s, 1.0)


def physical_kernel(s: float) -> Kernel:
    """Kernel of ``-(-Delta)^s`` with the Fourier-symbol normalisation."""
    return Kernel(s, fractional_laplacian_constant(s))


@dataclass(frozen=True)
class OperatorSpec:
    """A nonlocal operator of inf-sup type.

    kind is one of ``linear``, ``pucci_plus``, ``pucci_minus``, ``infsup``.
    For ``infsup`` the family is indexed ``family[i][j]`` and the operator is
    ``inf_i sup_j L_ij``; ``supinf`` is its reflection ``sup_i inf_j L_ij``.
    """

    kind: str
    s: float
    kernel: Kernel | None = None
    lower: float | None = None
    upper: float | None = None
    family: tuple[tuple[Kernel, ...], ...] = field(default=())

    def __post_init__(self):
        if self.kind == "linear":
            if self.kernel is None:
                raise KernelError("linear operator needs a kernel")
        elif self.kind in ("pucci_plus", "pucci_minus"):
            if self.lower is None or self.upper is None or not 0 < self.lower <= self.upper:
                raise KernelError("extremal operator needs 0 < lower <= upper")
        elif self.kind in ("infsup", "supinf"):
            if not self.family or any(len(row) == 0 for row in self.family):
                raise KernelError("inf-sup family must be non-empty")
            for row in self.family:
                for k in row:
                    if abs(k.s - self.s) > 1e-15:
                        raise KernelError("family kernels must share the order s")
        else:
            raise KernelError(f"unknown operator kind {self.kind!r}")

    @classmethod
    def linear(cls, kernel: Kernel) -> "OperatorSpec":
        return cls("linear", kernel.s, kernel=kernel)

    @classmethod
    def pucci(cls, sign: str, s: float, lower: float, upper: float) -> "OperatorSpec":
        kind = {"+": "pucci_plus", "-": "pucci_minus"}[sign]
        return cls(kind, s, lower=lower, upper=upper)

    @classmethod
    def infsup(cls, family: Sequence[Sequence[Kernel]]) -> "OperatorSpec":
        fam = tuple(tuple(row) for row in family)
        if not fam or not fam[0]:
            raise KernelError("inf-sup family must be non-empty")
        return cls("infsup", fam[0][0].s, family=fam)

    @property
    def kernels(self) -> list[Kernel]:
        """Every linear kernel the operator is built from (extremal
        operators contribute their two bounding kernels)."""
        if self.kind == "linear":
            return [self.kernel]
        if self.kind in ("infsup", "supinf"):
            return [k for row in self.family for k in row]
        return [Kernel(self.s, self.lower), Kernel(self.s, self.upper)]

    @property
    def bounds(self) -> tuple[float, float]:
        if self.kind in ("pucci_plus", "pucci_minus"):
            return float(self.lower), float(self.upper)
        b = [k.bounds for k in self.kernels]
        return min(lo for lo, _ in b), max(hi for _, hi in b)

    @property
    def homogeneous(self) -> bool:
        if self.kind in ("pucci_plus", "pucci_minus"):
            return True
        return all(k.homogeneous for k in self.kernels)

    def reflected(self) -> "OperatorSpec":
        """The operator ``u -> -I(-u)``."""
        if self.kind == "linear":
            return self
        swap = {"pucci_plus": "pucci_minus", "pucci_minus": "pucci_plus",
                "infsup": "supinf", "supinf": "infsup"}
        return OperatorSpec(swap[self.kind], self.s, kernel=self.kernel,
                            lower=self.lower, upper=self.upper, family=self.family)


def combine_infsup(values: np.ndarray, kind: str = "infsup") -> tuple[float, tuple[int, int]]:
    """inf over rows of sup over columns of a value table; lowest index wins
    ties.  Returns the value and the active ``(i, j)``."""
    values = np.asarray(values, dtype=float)
    if kind == "infsup":
        j_best = np.argmax(values, axis=1)
        row_vals = values[np.arange(values.shape[0]), j_best]
        i = int(np.argmin(row_vals))
    else:
        j_best = np.argmin(values, axis=1)
        row_vals = values[np.arange(values.shape[0]), j_best]
        i = int(np.argmax(row_vals))
    return float(row_vals[i]), (i, int(j_best[i]))

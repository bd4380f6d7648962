"""Vectorised Gauss-Kronrod panel quadrature on geometrically graded panels.

Integrals are organised in *half-segments*: an interval of length ``length``
attached to an anchor point ``z0`` and walked in direction ``dir`` (``+1`` or
``-1``), so that ``z = z0 + dir * w`` with ``w`` in ``[0, length]``.  The
integrand always receives ``w`` next to ``z``; callers that need the distance
to the anchor (for example the distance to a domain boundary where the
integrand blows up) read it from ``w`` instead of forming ``z0 - z`` and
losing every significant digit.

Panels are graded geometrically toward the anchor.  When the anchor carries
an integrable power singularity ``w**e`` with ``-1 < e < 0``, the innermost
panel is integrated in the variable ``v = w**(1 + e)``, which turns the
leading singular term into a constant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import roots_jacobi

# QUADPACK qk15 abscissae and weights
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:7], [0.0], _XGK[6::-1]])
W_KRONROD = np.concatenate([_WGK[:7], [_WGK[7]], _WGK[6::-1]])
W_GAUSS = np.zeros(15)
W_GAUSS[[1, 3, 5]] = _WG[:3]
W_GAUSS[7] = _WG[3]
W_GAUSS[[9, 11, 13]] = _WG[2::-1]

GRADING_RATIO = 0.25
W_FLOOR = 1e-280
REL_FLOOR = 1e-14
MAX_PANELS = 20000


@dataclass(frozen=True)
class HalfSegment:
    """``z = z0 + dir * w`` for ``w`` in ``[0, length]``.

    ``levels`` geometric panels are laid toward the anchor.  ``sing`` is the
    exponent of the anchor singularity (``None`` when the integrand is
    bounded there).
    """

    z0: float
    dir: int
    length: float
    levels: int = 0
    sing: float | None = None


@dataclass
class _Panels:
    seg: np.ndarray      # owning half-segment index
    lo: np.ndarray       # panel bounds in the integration variable t
    hi: np.ndarray
    subst: np.ndarray    # True when t = w**(1+e)


def _initial_panels(segs: Sequence[HalfSegment]) -> _Panels:
    seg, lo, hi, subst = [], [], [], []
    for k, sg in enumerate(segs):
        if sg.length <= 0.0:
            continue
        edges = sg.length * GRADING_RATIO ** np.arange(sg.levels + 1)
        for j in range(sg.levels):
            seg.append(k)
            lo.append(edges[j + 1])
            hi.append(edges[j])
            subst.append(False)
        inner = edges[-1]
        seg.append(k)
        lo.append(0.0)
        if sg.sing is not None and -1.0 < sg.sing < 0.0:
            hi.append(inner ** (1.0 + sg.sing))
            subst.append(True)
        else:
            hi.append(inner)
            subst.append(False)
    return _Panels(np.asarray(seg, dtype=np.intp), np.asarray(lo, float),
                   np.asarray(hi, float), np.asarray(subst, bool))


def _panel_sums(fn, segs_arr, panels: _Panels):
    z0, dirs, sing = segs_arr
    half = 0.5 * (panels.hi - panels.lo)
    mid = 0.5 * (panels.hi + panels.lo)
    t = mid[:, None] + half[:, None] * NODES[None, :]
    jac = np.broadcast_to(half[:, None], t.shape).copy()
    w = t.copy()
    if panels.subst.any():
        rows = panels.subst
        e = sing[panels.seg[rows]][:, None]
        q = 1.0 / (1.0 + e)
        tt = t[rows]
        ww = tt ** q
        # dw = q t**(q-1) dt
        jj = jac[rows] * q * tt ** (q - 1.0)
        # below W_FLOOR the integrand is its leading power w**e, whose
        # product with the jacobian is constant in t
        tiny = ww < W_FLOOR
        if tiny.any():
            ee = np.broadcast_to(e, tt.shape)[tiny]
            jj[tiny] = jac[rows][tiny] * np.broadcast_to(q, tt.shape)[tiny] * W_FLOOR ** (-ee)
            ww[tiny] = W_FLOOR
        w[rows] = ww
        jac[rows] = jj
    sidx = np.broadcast_to(panels.seg[:, None], t.shape)
    zz0 = z0[sidx]
    dd = dirs[sidx]
    z = zz0 + dd * w
    vals = fn(z.ravel(), w.ravel(), sidx.ravel()).reshape(t.shape)
    vals = vals * jac
    kron = vals @ W_KRONROD
    gauss = vals @ W_GAUSS
    return kron, np.abs(kron - gauss)


def integrate(fn: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
              segs: Sequence[HalfSegment], tol: float = 1e-10,
              max_rounds: int = 40) -> tuple[float, float]:
    """Integrate ``fn(z, w, seg_index)`` over the union of half-segments.

    Returns ``(value, error_estimate)``.  Panels whose Gauss/Kronrod
    discrepancy is large are bisected until the summed estimate drops below
    ``tol`` or ``max_rounds`` is exhausted.
    """
    if not segs:
        return 0.0, 0.0
    segs_arr = (np.array([s.z0 for s in segs], float),
                np.array([s.dir for s in segs], float),
                np.array([np.nan if s.sing is None else s.sing for s in segs], float))
    panels = _initial_panels(segs)
    if panels.lo.size == 0:
        return 0.0, 0.0
    val, err = _panel_sums(fn, segs_arr, panels)
    done_val = 0.0
    done_err = 0.0
    for _ in range(max_rounds):
        total_err = done_err + err.sum()
        # relative floor: roundoff in the panel sums is not reducible
        floor = REL_FLOOR * (abs(done_val) + np.abs(val).sum())
        if total_err <= max(tol, floor) or val.size > MAX_PANELS:
            break
        # bisect the panels carrying most of the error
        cut = max(tol / (4.0 * max(val.size, 1)), 1e-300)
        bad = err > cut
        if not bad.any():
            break
        done_val += val[~bad].sum()
        done_err += err[~bad].sum()
        p = panels
        m = 0.5 * (p.lo[bad] + p.hi[bad])
        panels = _Panels(np.concatenate([p.seg[bad], p.seg[bad]]),
                         np.concatenate([p.lo[bad], m]),
                         np.concatenate([m, p.hi[bad]]),
                         np.concatenate([p.subst[bad], p.subst[bad]]))
        val, err = _panel_sums(fn, segs_arr, panels)
    return float(done_val + val.sum()), float(done_err + err.sum())


_JACOBI_CACHE: dict[tuple[int, float], tuple[np.ndarray, np.ndarray]] = {}


def gauss_jacobi(m: int, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights on [0, 1] for the weight ``t**beta``."""
    key = (m, round(beta, 15))
    if key not in _JACOBI_CACHE:
        x, w = roots_jacobi(m, 0.0, beta)
        # (1+x)**beta on [-1,1] -> t**beta on [0,1]
        t = 0.5 * (x + 1.0)
        _JACOBI_CACHE[key] = (t, w * 0.5 ** (1.0 + beta))
    return _JACOBI_CACHE[key]


def weighted_power_rule(fn: Callable[[np.ndarray], np.ndarray], r0: float,
                        beta: float, m: int = 24) -> tuple[float, float]:
    """``int_0^r0 fn(z) z**beta dz`` for smooth ``fn``; returns value, error."""
    t_hi, w_hi = gauss_jacobi(m, beta)
    t_lo, w_lo = gauss_jacobi(m // 2, beta)
    scale = r0 ** (1.0 + beta)
    z = np.concatenate([t_hi, t_lo]) * r0
    f = fn(z)
    hi = scale * float(f[:m] @ w_hi)
    lo = scale * float(f[m:] @ w_lo)
    return hi, abs(hi - lo)

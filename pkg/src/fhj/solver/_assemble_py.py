"""NumPy version of the far-field assembly; same arguments as the compiled
kernel, plus support for a variable multiplier ``a(rho)``."""

import numpy as np

_BLOCK = 32


def _rule(rho0, h, L, t, w, a, s):
    rho = rho0[..., None] * np.exp(L[..., None] * t)
    tau = rho0[..., None] * np.expm1(L[..., None] * t)
    av = a(rho) if callable(a) else a
    g = w * L[..., None] * av * rho ** (-2.0 * s)
    hh = h[..., None]
    wn = np.sum(g * (hh - tau), axis=-1) / h
    wf = np.sum(g * tau, axis=-1) / h
    kap = np.sum(g * 0.5 * tau * (hh - tau), axis=-1)
    return wn, wf, kap


def far_field(DA, DB, side, hgap, s, a, cs, cc, rows, use_curv, t4, w4, t8, w8, t16, w16,
              thin, thick, W):
    ncell = hgap.size
    cells = np.arange(ncell)
    for r0 in range(0, rows.size, _BLOCK):
        blk = rows[r0:r0 + _BLOCK]
        I = blk[:, None]
        right = cells[None, :] > I
        near = np.where(right, cells, cells + 1)
        far = np.where(right, cells + 1, cells)
        both_b = (side[I] == 1) & (side[near] == 1)
        rho0 = np.where(both_b, np.abs(DB[I] - DB[near]), np.abs(DA[I] - DA[near]))
        adj = (cells[None, :] == I - 1) | (cells[None, :] == I)
        rho0 = np.where(adj, 1.0, rho0)
        h = np.broadcast_to(hgap, rho0.shape)
        L = np.log1p(h / rho0)
        wn, wf, kap = (np.zeros(rho0.shape) for _ in range(3))
        for m, (t, w) in (((L < thin) & ~adj, (t4, w4)), ((L >= thin) & (L < thick) & ~adj, (t8, w8)),
                          ((L >= thick) & ~adj, (t16, w16))):
            if m.any():
                wn[m], wf[m], kap[m] = _rule(rho0[m], h[m], L[m], t, w, a, s)
        rr = np.broadcast_to(np.arange(blk.size)[:, None] + r0, rho0.shape)
        np.add.at(W, (rr, near), wn)
        np.add.at(W, (rr, far), wf)
        np.add.at(W, (rr[:, 0], blk), -np.sum(wn + wf, axis=1))
        ok = cs >= 0
        curv = use_curv[r0:r0 + _BLOCK].astype(bool)
        if ok.any() and curv.any():
            k = kap[:, ok] * curv[:, None]
            for j in range(4):
                cols = np.broadcast_to(cs[ok] + j, k.shape)
                np.add.at(W, (rr[:, ok], cols), -k * cc[ok, j])
    return W

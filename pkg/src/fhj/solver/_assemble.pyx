# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Far-field product-integration weights for homogeneous kernels."""

from libc.math cimport exp, expm1, log1p, pow, fabs

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline double _dist(const double[:] DA, const double[:] DB, const cnp.int8_t[:] side,
                         Py_ssize_t i, Py_ssize_t k) noexcept nogil:
    if side[i] == 1 and side[k] == 1:
        return fabs(DB[i] - DB[k])
    return fabs(DA[i] - DA[k])


def far_field(const double[:] DA, const double[:] DB, const cnp.int8_t[:] side,
              const double[:] hgap, double s, double a,
              const cnp.int64_t[:] cs, const double[:, :] cc,
              const cnp.int64_t[:] rows, const cnp.int8_t[:] use_curv,
              const double[:] t4, const double[:] w4,
              const double[:] t8, const double[:] w8,
              const double[:] t16, const double[:] w16,
              double thin, double thick, double[:, :] W):
    cdef Py_ssize_t ncell = hgap.shape[0]
    cdef Py_ssize_t r, I, c, near, far, q, j, nq
    cdef double rho0, h, L, lt, tau, g, wn, wf, kap, scale
    cdef const double[:] tq
    cdef const double[:] wq
    cdef double m2s = -2.0 * s
    with nogil:
        for r in range(rows.shape[0]):
            I = rows[r]
            for c in range(ncell):
                if c == I - 1 or c == I:
                    continue
                if c > I:
                    near = c
                    far = c + 1
                else:
                    near = c + 1
                    far = c
                rho0 = _dist(DA, DB, side, I, near)
                h = hgap[c]
                L = log1p(h / rho0)
                if L < thin:
                    tq = t4
                    wq = w4
                elif L < thick:
                    tq = t8
                    wq = w8
                else:
                    tq = t16
                    wq = w16
                nq = tq.shape[0]
                wn = 0.0
                wf = 0.0
                kap = 0.0
                scale = L * a * pow(rho0, m2s)
                for q in range(nq):
                    lt = L * tq[q]
                    tau = rho0 * expm1(lt)
                    g = wq[q] * scale * exp(m2s * lt)
                    wn += g * (h - tau)
                    wf += g * tau
                    kap += g * 0.5 * tau * (h - tau)
                wn /= h
                wf /= h
                W[r, near] += wn
                W[r, far] += wf
                W[r, I] -= wn + wf
                if use_curv[r] and cs[c] >= 0:
                    for j in range(4):
                        W[r, cs[c] + j] -= kap * cc[c, j]

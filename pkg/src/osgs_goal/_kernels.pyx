# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled element kernels. Same contract as ``_kernels_py``."""
import numpy as np
cimport cython
from cython.parallel cimport prange, parallel
from libc.stdlib cimport malloc, free


cdef inline int _jac(const double[:, :, ::1] coords, const double[:, :, ::1] dN,
                     Py_ssize_t e, Py_ssize_t q, int nen, int dim,
                     double* g, double* detJ) noexcept nogil:
    """Physical gradients of all shape functions at one point into g[a*dim + i]."""
    cdef double j00 = 0.0, j01 = 0.0, j10 = 0.0, j11 = 0.0, det
    cdef Py_ssize_t a
    if dim == 1:
        for a in range(nen):
            j00 += coords[e, a, 0] * dN[q, a, 0]
        detJ[0] = j00
        if j00 <= 0.0:
            return 1
        for a in range(nen):
            g[a] = dN[q, a, 0] / j00
        return 0
    for a in range(nen):
        j00 += coords[e, a, 0] * dN[q, a, 0]
        j01 += coords[e, a, 0] * dN[q, a, 1]
        j10 += coords[e, a, 1] * dN[q, a, 0]
        j11 += coords[e, a, 1] * dN[q, a, 1]
    det = j00 * j11 - j01 * j10
    detJ[0] = det
    if det <= 0.0:
        return 1
    for a in range(nen):
        # grad = J^{-T} dN_ref
        g[2 * a] = (j11 * dN[q, a, 0] - j10 * dN[q, a, 1]) / det
        g[2 * a + 1] = (-j01 * dN[q, a, 0] + j00 * dN[q, a, 1]) / det
    return 0


def element_matrices(coords, N, dN, w, adv, src, tau, double k, double s, double sign, int threads=1):
    cdef const double[:, :, ::1] X = np.ascontiguousarray(coords, dtype=np.float64)
    cdef const double[:, ::1] Nv = np.ascontiguousarray(N, dtype=np.float64)
    cdef const double[:, :, ::1] dNv = np.ascontiguousarray(dN, dtype=np.float64)
    cdef const double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[:, :, ::1] A = np.ascontiguousarray(adv, dtype=np.float64)
    cdef const double[:, ::1] S = np.ascontiguousarray(src, dtype=np.float64)
    cdef const double[::1] T = np.ascontiguousarray(tau, dtype=np.float64)
    cdef Py_ssize_t nel = X.shape[0], nen = X.shape[1], dim = X.shape[2], nq = wv.shape[0]
    if nen > 4 or dim > 2:
        raise ValueError("kernel supports at most 4 nodes and 2 dimensions")
    Ka = np.zeros((nel, nen, nen))
    Pa = np.zeros((nel, nen, nen))
    Da = np.zeros((nel, nen, nen))
    Ma = np.zeros((nel, nen, nen))
    Fta = np.zeros((nel, nen))
    Fa = np.zeros((nel, nen))
    cdef double[:, :, ::1] K = Ka, P = Pa, D = Da, M = Ma
    cdef double[:, ::1] Ft = Fta, F = Fa
    cdef Py_ssize_t e, q, a, b, i
    cdef double* g
    cdef double* lop
    cdef double* ladj
    cdef double det, wd, twd, agrad, gg
    cdef int bad = 0
    # per-thread scratch: C arrays declared at function scope would be shared
    with nogil, parallel(num_threads=threads):
        g = <double*> malloc(16 * sizeof(double))
        lop = g + 8
        ladj = g + 12
        for e in prange(nel, schedule="static"):
            for q in range(nq):
                if _jac(X, dNv, e, q, nen, dim, g, &det):
                    bad += 1
                    break
                wd = wv[q] * det
                twd = wd * T[e]
                for a in range(nen):
                    agrad = 0.0
                    for i in range(dim):
                        agrad = agrad + A[e, q, i] * g[a * dim + i]
                    lop[a] = sign * agrad + s * Nv[q, a]
                    ladj[a] = -sign * agrad + s * Nv[q, a]
                for a in range(nen):
                    F[e, a] += wd * S[e, q] * Nv[q, a]
                    Ft[e, a] += wd * S[e, q] * Nv[q, a] - twd * S[e, q] * ladj[a]
                    for b in range(nen):
                        gg = 0.0
                        for i in range(dim):
                            gg = gg + g[a * dim + i] * g[b * dim + i]
                        K[e, a, b] += wd * (k * gg + Nv[q, a] * lop[b]) - twd * ladj[a] * lop[b]
                        P[e, a, b] += twd * ladj[a] * Nv[q, b]
                        D[e, a, b] += wd * Nv[q, a] * lop[b]
                        M[e, a, b] += wd * Nv[q, a] * Nv[q, b]
        free(g)
    if bad:
        raise ValueError("non-positive Jacobian determinant")
    return Ka, Pa, Da, Ma, Fta, Fa


def element_estimators(coords, N, dN, w, adv, f, q, tau, double s, u, xi, z, xi_d, int threads=1):
    cdef const double[:, :, ::1] X = np.ascontiguousarray(coords, dtype=np.float64)
    cdef const double[:, ::1] Nv = np.ascontiguousarray(N, dtype=np.float64)
    cdef const double[:, :, ::1] dNv = np.ascontiguousarray(dN, dtype=np.float64)
    cdef const double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[:, :, ::1] A = np.ascontiguousarray(adv, dtype=np.float64)
    cdef const double[:, ::1] Fv = np.ascontiguousarray(f, dtype=np.float64)
    cdef const double[:, ::1] Qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef const double[::1] T = np.ascontiguousarray(tau, dtype=np.float64)
    cdef const double[:, ::1] U = np.ascontiguousarray(u, dtype=np.float64)
    cdef const double[:, ::1] XI = np.ascontiguousarray(xi, dtype=np.float64)
    cdef const double[:, ::1] Z = np.ascontiguousarray(z, dtype=np.float64)
    cdef const double[:, ::1] XID = np.ascontiguousarray(xi_d, dtype=np.float64)
    cdef Py_ssize_t nel = X.shape[0], nen = X.shape[1], dim = X.shape[2], nq = wv.shape[0]
    if nen > 4 or dim > 2:
        raise ValueError("kernel supports at most 4 nodes and 2 dimensions")
    e1a = np.zeros(nel)
    e2a = np.zeros(nel)
    cdef double[::1] E1 = e1a, E2 = e2a
    cdef Py_ssize_t e, qp, a, i
    cdef double* g
    cdef double det, wd, uh, zh, xih, xidh, agu, agz, gu, gz, R, PR, Lz, PRs, s1, s2
    cdef int bad = 0
    with nogil, parallel(num_threads=threads):
        g = <double*> malloc(8 * sizeof(double))
        for e in prange(nel, schedule="static"):
            s1 = 0.0
            s2 = 0.0
            for qp in range(nq):
                if _jac(X, dNv, e, qp, nen, dim, g, &det):
                    bad += 1
                    break
                wd = wv[qp] * det
                uh = 0.0
                zh = 0.0
                xih = 0.0
                xidh = 0.0
                agu = 0.0
                agz = 0.0
                for a in range(nen):
                    uh = uh + Nv[qp, a] * U[e, a]
                    zh = zh + Nv[qp, a] * Z[e, a]
                    xih = xih + Nv[qp, a] * XI[e, a]
                    xidh = xidh + Nv[qp, a] * XID[e, a]
                for i in range(dim):
                    gu = 0.0
                    gz = 0.0
                    for a in range(nen):
                        gu = gu + g[a * dim + i] * U[e, a]
                        gz = gz + g[a * dim + i] * Z[e, a]
                    agu = agu + A[e, qp, i] * gu
                    agz = agz + A[e, qp, i] * gz
                R = Fv[e, qp] - (agu + s * uh)
                PR = R - xih
                Lz = -agz + s * zh
                PRs = (Qv[e, qp] - Lz) - xidh
                s1 = s1 + wd * Qv[e, qp] * PR
                s2 = s2 + wd * (PRs * R + Lz * PR)
            E1[e] = T[e] * s1
            E2[e] = T[e] * s2
        free(g)
    if bad:
        raise ValueError("non-positive Jacobian determinant")
    return e1a, e2a

# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the reference kernels (see reference.py for contracts).

sweep_classic mirrors the reference scalar formulas operation-for-operation
so both backends produce bit-identical event times.
"""

import numpy as np

cimport cython
cimport numpy as cnp

BACKEND_NAME = "cython"


def sweep_classic(rho1, rho2, state0, times, values):
    cdef double[::1] r1 = np.ascontiguousarray(rho1, dtype=np.float64)
    cdef double[::1] r2 = np.ascontiguousarray(rho2, dtype=np.float64)
    cdef cnp.int64_t[::1] st = np.ascontiguousarray(state0, dtype=np.int64).copy()
    cdef double[::1] ts = np.ascontiguousarray(times, dtype=np.float64)
    cdef double[::1] vs = np.ascontiguousarray(values, dtype=np.float64)

    cdef Py_ssize_t m = r1.shape[0]
    cdef Py_ssize_t n_seg = ts.shape[0] - 1
    cdef Py_ssize_t j, k
    cdef cnp.int64_t s
    cdef double t_cur, t0, t1, v0, v1, a, d, pa, slope, m_a, s_star

    ev_t = []
    ev_m = []
    ev_s = []
    for j in range(m):
        s = st[j]
        t_cur = ts[0]
        for k in range(n_seg):
            t0 = ts[k]
            t1 = ts[k + 1]
            v0 = vs[k]
            v1 = vs[k + 1]
            a = t_cur if t_cur > t0 else t0
            if t1 <= a:
                continue
            d = (v1 - v0) / (t1 - t0)
            pa = (v1 - v0) / (t1 - t0) * (a - t0) + v0
            if s == 0:
                slope = d
                m_a = pa - r1[j]
            else:
                slope = -d
                m_a = r2[j] - pa
            if slope <= 0.0:
                continue
            s_star = a if m_a >= 0.0 else a - m_a / slope
            if (a < s_star <= t1) or (s_star == a and s_star > t_cur):
                s = 1 - s
                ev_t.append(s_star)
                ev_m.append(j)
                ev_s.append(s)
                t_cur = s_star
        st[j] = s

    state = np.asarray(st)
    if ev_t:
        order = np.lexsort((np.asarray(ev_m), np.asarray(ev_t)))
        return (np.asarray(ev_t)[order], np.asarray(ev_m, dtype=np.int64)[order],
                np.asarray(ev_s, dtype=np.int64)[order], state)
    return (np.empty(0), np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64), state)


def rk4_matrix_chain(mats, h, y0):
    cdef double[:, :, ::1] M = np.ascontiguousarray(mats, dtype=np.float64)
    y_arr = np.array(y0, dtype=np.float64, copy=True, order="C")
    cdef double[:, ::1] y = y_arr
    cdef Py_ssize_t n_steps = (M.shape[0] - 1) // 2
    cdef Py_ssize_t d = M.shape[1]
    cdef Py_ssize_t i, r, c
    cdef double hh = h
    cdef double half = 0.5 * hh

    k1 = np.empty((d, d))
    k2 = np.empty((d, d))
    k3 = np.empty((d, d))
    k4 = np.empty((d, d))
    tmp = np.empty((d, d))
    cdef double[:, ::1] K1 = k1, K2 = k2, K3 = k3, K4 = k4, T = tmp

    for i in range(n_steps):
        _matmul(M[2 * i], y, K1, d)
        _axpy(y, K1, half, T, d)
        _matmul(M[2 * i + 1], T, K2, d)
        _axpy(y, K2, half, T, d)
        _matmul(M[2 * i + 1], T, K3, d)
        _axpy(y, K3, hh, T, d)
        _matmul(M[2 * i + 2], T, K4, d)
        for r in range(d):
            for c in range(d):
                y[r, c] = y[r, c] + (hh / 6.0) * (
                    K1[r, c] + 2.0 * K2[r, c] + 2.0 * K3[r, c] + K4[r, c])
    return y_arr


cdef inline void _matmul(const double[:, :] A, const double[:, :] B,
                         double[:, ::1] out, Py_ssize_t d) noexcept:
    cdef Py_ssize_t r, c, q
    cdef double acc
    for r in range(d):
        for c in range(d):
            acc = 0.0
            for q in range(d):
                acc += A[r, q] * B[q, c]
            out[r, c] = acc


cdef inline void _axpy(const double[:, :] Y, const double[:, :] K, double coef,
                       double[:, ::1] out, Py_ssize_t d) noexcept:
    cdef Py_ssize_t r, c
    for r in range(d):
        for c in range(d):
            out[r, c] = Y[r, c] + coef * K[r, c]

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: plane-wave correlation sums and Fock ladder assembly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, sqrt

cnp.import_array()


def plane_wave_sum(weights, omega, pvecs, points):
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const double[::1] om = np.ascontiguousarray(omega, dtype=np.float64)
    cdef const double[:, ::1] pv = np.ascontiguousarray(pvecs, dtype=np.float64)
    cdef const double[:, ::1] xs = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
    cdef Py_ssize_t npts = w.shape[0], nx = xs.shape[0], s = pv.shape[1]
    cdef Py_ssize_t i, k, a
    cdef double theta, re, im
    out = np.empty(nx, dtype=np.complex128)
    cdef double complex[::1] res = out
    for i in range(nx):
        re = 0.0
        im = 0.0
        for k in range(npts):
            theta = om[k] * xs[i, 0]
            for a in range(s):
                theta -= pv[k, a] * xs[i, a + 1]
            re += w[k] * cos(theta)
            im += w[k] * sin(theta)
        res[i] = re + 1j * im
    return out


cdef inline long long _rank(const long long[:, ::1] occ, Py_ssize_t row, Py_ssize_t lowered_mode,
                            long long nmax, const long long[:, ::1] table) nogil:
    cdef Py_ssize_t modes = occ.shape[1], i
    cdef long long rank = 0, rem = nmax, v, u
    for i in range(modes):
        v = occ[row, i]
        if i == lowered_mode:
            v -= 1
        for u in range(v):
            rank += table[modes - i - 1, rem - u]
        rem -= v
    return rank


def ladder_entries(occ, Py_ssize_t mode, long long nmax, table):
    cdef const long long[:, ::1] oc = np.ascontiguousarray(occ, dtype=np.int64)
    cdef const long long[:, ::1] tb = np.ascontiguousarray(table, dtype=np.int64)
    cdef Py_ssize_t n = oc.shape[0], j, cnt = 0
    for j in range(n):
        if oc[j, mode] > 0:
            cnt += 1
    rows = np.empty(cnt, dtype=np.int64)
    cols = np.empty(cnt, dtype=np.int64)
    vals = np.empty(cnt, dtype=np.float64)
    cdef long long[::1] r = rows, c = cols
    cdef double[::1] v = vals
    cnt = 0
    for j in range(n):
        if oc[j, mode] > 0:
            r[cnt] = _rank(oc, j, mode, nmax, tb)
            c[cnt] = j
            v[cnt] = sqrt(<double>oc[j, mode])
            cnt += 1
    return rows, cols, vals

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled iteration kernels; see ``_kernels_py`` for the reference."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, ceil

cnp.import_array()


def plain_iterate(const double[::1] s, const long long[::1] owner, const double[::1] sign,
                  const long long[::1] rev, const long long[::1] deg, z0, double c,
                  double theta, Py_ssize_t t_max):
    cdef Py_ssize_t n = s.shape[0]
    cdef Py_ssize_t ne = owner.shape[0]
    cdef Py_ssize_t t, e, i, r
    cdef double[::1] z = np.array(z0, dtype=np.float64)
    cdef double[::1] znew = np.empty(ne)
    cdef double[::1] acc = np.empty(n)
    cdef double[::1] x = np.empty(n)
    cdef double[::1] denom = np.empty(n)
    x_traj_arr = np.empty((t_max, n))
    cdef double[:, ::1] x_traj = x_traj_arr
    for i in range(n):
        denom[i] = 1.0 + c * deg[i]
    for t in range(t_max):
        for i in range(n):
            acc[i] = 0.0
        for e in range(ne):
            acc[owner[e]] += sign[e] * z[e]
        for i in range(n):
            x[i] = (s[i] - acc[i]) / denom[i]
            x_traj[t, i] = x[i]
        for e in range(ne):
            r = rev[e]
            znew[e] = theta * z[e] + (1.0 - theta) * (z[r] + 2.0 * c * sign[r] * x[owner[r]])
        z, znew = znew, z
    return x_traj_arr, np.asarray(z)


def adqsp_iterate(const double[::1] s, const long long[::1] owner, const double[::1] sign,
                  const long long[::1] rev, const long long[::1] deg, z0, double c,
                  double theta, const double[::1] widths, long long half,
                  const double[:, ::1] dither):
    cdef Py_ssize_t n = s.shape[0]
    cdef Py_ssize_t t_max = dither.shape[0]
    cdef Py_ssize_t ne = dither.shape[1]
    cdef Py_ssize_t t, e, i, r
    cdef double width, dz, d, y, a, q, zn
    cdef long long nsat
    cdef double[::1] zh = np.array(z0, dtype=np.float64)
    cdef double[::1] acc = np.empty(n)
    cdef double[::1] x = np.empty(n)
    cdef double[::1] denom = np.empty(n)
    cdef double[::1] q_row = np.empty(ne)
    x_traj_arr = np.empty((t_max, n))
    dzhat_arr = np.empty((t_max, ne))
    noise_arr = np.empty((t_max, ne))
    level_arr = np.empty((t_max, ne), dtype=np.int64)
    sat_arr = np.zeros(t_max, dtype=np.int64)
    cdef double[:, ::1] x_traj = x_traj_arr
    cdef double[:, ::1] dzhat = dzhat_arr
    cdef double[:, ::1] noise = noise_arr
    cdef long long[:, ::1] level = level_arr
    cdef long long[::1] sat = sat_arr
    for i in range(n):
        denom[i] = 1.0 + c * deg[i]
    for t in range(t_max):
        width = widths[t]
        for i in range(n):
            acc[i] = 0.0
        for e in range(ne):
            acc[owner[e]] += sign[e] * zh[e]
        for i in range(n):
            x[i] = (s[i] - acc[i]) / denom[i]
            x_traj[t, i] = x[i]
        nsat = 0
        for e in range(ne):
            r = rev[e]
            zn = theta * zh[e] + (1.0 - theta) * (zh[r] + 2.0 * c * sign[r] * x[owner[r]])
            dz = zn - zh[e]
            d = dither[t, e] * width
            y = (dz + d) / width
            if y >= 0.0:
                a = floor(y)
            else:
                a = ceil(y) - 1.0
            if a < -half:
                a = -half
                nsat += 1
            elif a > half - 1:
                a = half - 1
                nsat += 1
            q = width * (a + 0.5) - d
            q_row[e] = q
            dzhat[t, e] = q
            noise[t, e] = q - dz
            level[t, e] = <long long>a
        for e in range(ne):
            zh[e] = zh[e] + q_row[e]
        sat[t] = nsat
    return x_traj_arr, dzhat_arr, noise_arr, level_arr, sat_arr, np.asarray(zh)

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled phase-space kernels; same contract as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def vlasov_rhs(double[:, :, ::1] f, double[:, ::1] cwx, double[:, :, ::1] ara,
               double[::1] ex, double[::1] ey, double[::1] bz,
               double qm, double inv_h, double inv_2du):
    cdef Py_ssize_t nx = f.shape[0], nu = f.shape[1], nv = f.shape[2]
    cdef Py_ssize_t v, vp, vm, i, j, ip, im, jp, jm
    cdef double kx, ky, kb, fl_p, fl_m, jac, c
    out_arr = np.empty((nx, nu, nv))
    cdef double[:, :, ::1] out = out_arr
    for v in range(nx):
        vp = v + 1 if v + 1 < nx else 0
        vm = v - 1 if v > 0 else nx - 1
        kx = qm * inv_2du * ex[v]
        ky = qm * inv_2du * ey[v]
        kb = qm * bz[v]
        for i in range(nu):
            ip = i + 1 if i + 1 < nu else 0
            im = i - 1 if i > 0 else nu - 1
            for j in range(nv):
                jp = j + 1 if j + 1 < nv else 0
                jm = j - 1 if j > 0 else nv - 1
                c = cwx[i, j]
                fl_p = c * (f[v, i, j] + f[vp, i, j]) * 0.5
                fl_m = c * (f[vm, i, j] + f[v, i, j]) * 0.5
                jac = (ara[0, i, j] * f[v, ip, j] + ara[1, i, j] * f[v, im, j]
                       + ara[2, i, j] * f[v, i, jp] + ara[3, i, j] * f[v, i, jm]
                       + ara[4, i, j] * f[v, ip, jp] + ara[5, i, j] * f[v, im, jp]
                       + ara[6, i, j] * f[v, ip, jm] + ara[7, i, j] * f[v, im, jm])
                out[v, i, j] = (-(fl_p - fl_m) * inv_h
                                - (kx * (f[v, ip, j] - f[v, im, j]) + ky * (f[v, i, jp] - f[v, i, jm]))
                                + kb * jac)
    return out_arr


def moments(double[:, :, ::1] f, double[:, ::1] cwx, double[:, ::1] cwy):
    cdef Py_ssize_t nx = f.shape[0], nu = f.shape[1], nv = f.shape[2]
    cdef Py_ssize_t v, vp, i, j
    cdef double sn, sx, sy
    n_arr = np.empty(nx)
    jx_arr = np.empty(nx)
    jy_arr = np.empty(nx)
    cdef double[::1] n = n_arr, jx = jx_arr, jy = jy_arr
    for v in range(nx):
        vp = v + 1 if v + 1 < nx else 0
        sn = 0.0
        sx = 0.0
        sy = 0.0
        for i in range(nu):
            for j in range(nv):
                sn += f[v, i, j]
                sx += cwx[i, j] * (0.5 * (f[v, i, j] + f[vp, i, j]))
                sy += cwy[i, j] * f[v, i, j]
        n[v] = sn
        jx[v] = sx
        jy[v] = sy
    return n_arr, jx_arr, jy_arr

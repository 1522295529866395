# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport ceil, floor, sqrt

cnp.import_array()

cdef unsigned long long HASH_PRIME = 2654435761ULL


def grid_lookup(coords, long resolution, long long table_size):
    cdef double[:, ::1] c = np.ascontiguousarray(coords, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0]
    idx_arr = np.empty((n, 4), dtype=np.int64)
    w_arr = np.empty((n, 4), dtype=np.float64)
    cdef long long[:, ::1] idx = idx_arr
    cdef double[:, ::1] w = w_arr
    cdef bint dense = (resolution + 1) * (resolution + 1) <= table_size
    cdef Py_ssize_t p
    cdef int corner, dx, dy
    cdef double px, py, fx, fy, wx, wy
    cdef long long bx, by, vx, vy
    cdef unsigned long long h
    for p in range(n):
        px = c[p, 0] * resolution
        py = c[p, 1] * resolution
        bx = <long long>floor(px)
        by = <long long>floor(py)
        if bx > resolution - 1:
            bx = resolution - 1
        if by > resolution - 1:
            by = resolution - 1
        fx = px - bx
        fy = py - by
        for corner in range(4):
            dx = corner & 1
            dy = corner >> 1
            vx = bx + dx
            vy = by + dy
            if dense:
                idx[p, corner] = vx + vy * (resolution + 1)
            else:
                h = (<unsigned long long>vx) ^ ((<unsigned long long>vy) * HASH_PRIME)
                idx[p, corner] = <long long>(h % (<unsigned long long>table_size))
            wx = fx if dx else 1.0 - fx
            wy = fy if dy else 1.0 - fy
            w[p, corner] = wx * wy
    return idx_arr, w_arr


def poisson_disc(int height, int width, double r0, double alpha, order):
    cdef long long[::1] o = np.ascontiguousarray(order, dtype=np.int64)
    keep_arr = np.zeros((height, width), dtype=np.uint8)
    cdef unsigned char[:, ::1] keep = keep_arr
    cdef double ch = height / 2.0
    cdef double cw = width / 2.0
    cdef double rho, r, r2, a, b
    cdef Py_ssize_t n = o.shape[0]
    cdef Py_ssize_t q
    cdef long long flat
    cdef int i, j, wdw, i0, i1, j0, j1, ii, jj
    cdef bint ok
    for q in range(n):
        flat = o[q]
        i = <int>(flat // width)
        j = <int>(flat % width)
        a = (i - ch) / ch
        b = (j - cw) / cw
        rho = sqrt(a * a + b * b) / sqrt(2.0)
        r = r0 * (1.0 + alpha * rho)
        r2 = r * r
        wdw = <int>ceil(r)
        i0 = i - wdw if i - wdw > 0 else 0
        i1 = i + wdw + 1 if i + wdw + 1 < height else height
        j0 = j - wdw if j - wdw > 0 else 0
        j1 = j + wdw + 1 if j + wdw + 1 < width else width
        ok = True
        for ii in range(i0, i1):
            for jj in range(j0, j1):
                if keep[ii, jj] and (ii - i) * (ii - i) + (jj - j) * (jj - j) < r2:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            keep[i, j] = 1
    return keep_arr

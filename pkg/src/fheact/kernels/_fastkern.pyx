# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled slot kernels: fused rotate-multiply-accumulate and the
gate-domain quantization primitives."""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, floor

cnp.import_array()


def rot_mac(cnp.ndarray[cnp.float64_t, ndim=1] acc,
            cnp.ndarray[cnp.float64_t, ndim=1] src,
            long k,
            cnp.ndarray[cnp.float64_t, ndim=1] mask):
    """acc[j] += src[(j + k) % n] * mask[j], without temporaries."""
    cdef Py_ssize_t n = acc.shape[0]
    cdef Py_ssize_t j, s
    cdef double[::1] a = np.ascontiguousarray(acc)
    cdef double[::1] x = np.ascontiguousarray(src)
    cdef double[::1] m = np.ascontiguousarray(mask)
    k %= n
    if k < 0:
        k += n
    s = k
    for j in range(n):
        a[j] += x[s] * m[j]
        s += 1
        if s == n:
            s = 0
    return acc


def sparse_rot_mac(cnp.ndarray[cnp.float64_t, ndim=1] acc,
                   cnp.ndarray[cnp.float64_t, ndim=1] src,
                   long k,
                   cnp.ndarray[cnp.int64_t, ndim=1] idx,
                   cnp.ndarray[cnp.float64_t, ndim=1] val):
    """acc[idx[i]] += src[(idx[i] + k) % n] * val[i], in place."""
    cdef Py_ssize_t n = src.shape[0]
    cdef Py_ssize_t m = idx.shape[0]
    cdef double[::1] a = np.ascontiguousarray(acc)
    cdef double[::1] x = np.ascontiguousarray(src)
    cdef long long[::1] iv = np.ascontiguousarray(idx)
    cdef double[::1] vv = np.ascontiguousarray(val)
    cdef Py_ssize_t i
    cdef Py_ssize_t s
    k %= n
    if k < 0:
        k += n
    for i in range(m):
        s = iv[i] + k
        if s >= n:
            s -= n
        a[iv[i]] += x[s] * vv[i]
    return acc


def quantize_saturate(cnp.ndarray[cnp.float64_t, ndim=1] x,
                      double scale,
                      long long qmax):
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(n, dtype=np.int64)
    cdef double[::1] xv = np.ascontiguousarray(x)
    cdef long long[::1] ov = out
    cdef long long qmin = -(qmax + 1)
    cdef Py_ssize_t j
    cdef double v, r
    for j in range(n):
        v = xv[j] * scale
        r = floor(fabs(v) + 0.5)
        if v < 0:
            r = -r
        if r > <double> qmax:
            ov[j] = qmax
        elif r < <double> qmin:
            ov[j] = qmin
        else:
            ov[j] = <long long> r
    return out


def dequantize(cnp.ndarray[cnp.int64_t, ndim=1] q, double scale):
    cdef Py_ssize_t n = q.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef long long[::1] qv = np.ascontiguousarray(q)
    cdef double[::1] ov = out
    cdef Py_ssize_t j
    for j in range(n):
        ov[j] = qv[j] / scale
    return out


def compare_less(cnp.ndarray[cnp.int64_t, ndim=1] a,
                 cnp.ndarray[cnp.int64_t, ndim=1] b):
    cdef Py_ssize_t n = a.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(n, dtype=np.int64)
    cdef long long[::1] av = np.ascontiguousarray(a)
    cdef long long[::1] bv = np.ascontiguousarray(b)
    cdef long long[::1] ov = out
    cdef Py_ssize_t j
    for j in range(n):
        ov[j] = 1 if av[j] < bv[j] else 0
    return out

# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled warping kernels: the DTW and soft-DTW DP inner loops."""

from libc.math cimport INFINITY, exp, fmin, log

import numpy as np


cdef inline double _min3(double a, double b, double c) nogil:
    return fmin(fmin(a, b), c)


cdef inline double _softmin3(double a, double b, double c, double gamma) nogil:
    cdef double lo = _min3(a, b, c)
    if lo == INFINITY:
        return INFINITY
    cdef double z = (exp(-(a - lo) / gamma)
                     + exp(-(b - lo) / gamma)
                     + exp(-(c - lo) / gamma))
    return lo - gamma * log(z)


def dtw_sqcost(double[::1] x, double[::1] y, int window=0):
    """Accumulated squared-cost DTW total over the optimal warping path.

    Symmetric step pattern, boundary to boundary.  ``window > 0`` applies a
    Sakoe-Chiba band of that half-width; returns +inf when the band admits
    no path.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = y.shape[0]
    acc_arr = np.full((n + 1, m + 1), INFINITY)
    cdef double[:, ::1] acc = acc_arr
    cdef Py_ssize_t i, j, jlo, jhi
    cdef double d
    acc[0, 0] = 0.0
    with nogil:
        for i in range(1, n + 1):
            jlo = 1
            jhi = m
            if window > 0:
                if i - window > jlo:
                    jlo = i - window
                if i + window < jhi:
                    jhi = i + window
            for j in range(jlo, jhi + 1):
                d = x[i - 1] - y[j - 1]
                acc[i, j] = d * d + _min3(acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1])
    return float(acc[n, m])


def sdtw_value(double[::1] x, double[::1] y, double gamma):
    """Soft-DTW value: DTW recurrence with a log-sum-exp soft-min of
    temperature ``gamma``; squared local cost, no final square root."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = y.shape[0]
    acc_arr = np.full((n + 1, m + 1), INFINITY)
    cdef double[:, ::1] acc = acc_arr
    cdef Py_ssize_t i, j
    cdef double d
    acc[0, 0] = 0.0
    with nogil:
        for i in range(1, n + 1):
            for j in range(1, m + 1):
                d = x[i - 1] - y[j - 1]
                acc[i, j] = d * d + _softmin3(
                    acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1], gamma)
    return float(acc[n, m])

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Mirrors ``_pykernels`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, M_PI

cnp.import_array()


def fwht(a):
    a = np.array(a, copy=True)
    if a.dtype == np.int64:
        _fwht_i64(a)
    elif a.dtype == np.float64:
        _fwht_f64(a)
    else:
        raise TypeError("compiled fwht handles int64 and float64 only")
    return a


cdef void _fwht_i64(cnp.int64_t[::1] a) noexcept nogil:
    cdef Py_ssize_t n = a.shape[0], h = 1, i, j
    cdef cnp.int64_t x, y
    while h < n:
        i = 0
        while i < n:
            for j in range(i, i + h):
                x = a[j]
                y = a[j + h]
                a[j] = x + y
                a[j + h] = x - y
            i += 2 * h
        h *= 2


cdef void _fwht_f64(double[::1] a) noexcept nogil:
    cdef Py_ssize_t n = a.shape[0], h = 1, i, j
    cdef double x, y
    while h < n:
        i = 0
        while i < n:
            for j in range(i, i + h):
                x = a[j]
                y = a[j + h]
                a[j] = x + y
                a[j + h] = x - y
            i += 2 * h
        h *= 2


def dyadic_fourier(freqs, cells, weights, int K):
    cdef cnp.int64_t[::1] f = np.ascontiguousarray(freqs, dtype=np.int64)
    cdef cnp.int64_t[::1] c = np.ascontiguousarray(cells, dtype=np.int64)
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    out = np.empty(f.shape[0], dtype=np.complex128)
    cdef double complex[::1] o = out
    cdef cnp.int64_t mask = (<cnp.int64_t>1 << K) - 1
    cdef double scale = 2.0 * M_PI / <double>(mask + 1)
    cdef Py_ssize_t a, b
    cdef cnp.int64_t fr, ph
    cdef double re, im, ang
    with nogil:
        for a in range(f.shape[0]):
            fr = f[a] & mask
            re = 0.0
            im = 0.0
            for b in range(c.shape[0]):
                ph = (fr * c[b]) & mask
                ang = ph * scale
                re = re + w[b] * cos(ang)
                im = im - w[b] * sin(ang)
            o[a] = re + 1j * im
    return out


def jump_energy(cnp.int64_t j0, cnp.int64_t j1, cnp.int64_t q, pos, coef):
    cdef cnp.int64_t[::1] p = np.ascontiguousarray(np.asarray(pos, dtype=np.int64) % q)
    cdef double[::1] cf = np.ascontiguousarray(coef, dtype=np.float64)
    cdef double scale = 2.0 * M_PI / <double>q
    cdef double total = 0.0, re, im, ang, jf
    cdef cnp.int64_t j, r, ph
    cdef Py_ssize_t i
    with nogil:
        for j in range(j0, j1 + 1):
            r = j % q
            re = 0.0
            im = 0.0
            for i in range(p.shape[0]):
                ph = (r * p[i]) % q
                ang = ph * scale
                re = re + cf[i] * cos(ang)
                im = im + cf[i] * sin(ang)
            jf = <double>j
            total += (re * re + im * im) / (jf * jf)
    return total / (4.0 * M_PI * M_PI)

# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled binomial series accumulation for small dense complex matrices."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()


cdef inline double _cabs2(double complex z) nogil:
    return z.real * z.real + z.imag * z.imag


def binomial_series(cnp.ndarray x_in, double t, double eps, double tail_factor,
                    int min_terms, int kmax):
    """Sum ``binom(t, k) (-x)^k`` over k until the tail estimate drops below eps.

    Returns ``(total, terms, last_term_norm)``; the norm is Frobenius, an
    upper bound for the operator norm.
    """
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="c"] x = np.ascontiguousarray(x_in, dtype=np.complex128)
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="c"] total = np.eye(n, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="c"] power = np.eye(n, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="c"] scratch = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] xv = x
    cdef double complex[:, ::1] tv = total
    cdef double complex[:, ::1] pv = power
    cdef double complex[:, ::1] sv = scratch
    cdef Py_ssize_t i, j, l
    cdef int k = 0
    cdef double coeff = 1.0
    cdef double frob = 0.0
    cdef double last = 0.0
    cdef double complex acc
    with nogil:
        while k < kmax:
            k += 1
            # power <- power @ (-x)
            for i in range(n):
                for j in range(n):
                    acc = 0
                    for l in range(n):
                        acc = acc - pv[i, l] * xv[l, j]
                    sv[i, j] = acc
            frob = 0.0
            for i in range(n):
                for j in range(n):
                    pv[i, j] = sv[i, j]
                    frob += _cabs2(sv[i, j])
            frob = sqrt(frob)
            coeff = coeff * (t - k + 1) / k
            for i in range(n):
                for j in range(n):
                    tv[i, j] = tv[i, j] + coeff * pv[i, j]
            last = fabs(coeff) * frob
            if frob == 0.0:
                break
            if k >= min_terms and last * tail_factor < eps:
                break
    return total, k, last

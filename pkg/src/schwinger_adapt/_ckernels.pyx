# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled statevector kernels.

Terms arrive with the ``i**y_count`` phase folded into ``coeffs`` and sorted by
``xs`` so that runs of equal X masks share one gather pass.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()

ctypedef unsigned long long u64

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


cdef inline double _sign(u64 b) noexcept nogil:
    return -1.0 if (__builtin_popcountll(b) & 1) else 1.0


def apply_terms(const double complex[::1] psi, const u64[::1] xs, const u64[::1] zs,
                const double complex[::1] coeffs, double complex[::1] out):
    """out += sum_k coeffs[k] * P_k psi."""
    cdef Py_ssize_t dim = psi.shape[0], nt = xs.shape[0]
    cdef Py_ssize_t g0 = 0, g1, k
    cdef u64 b, x
    cdef double complex d
    with nogil:
        while g0 < nt:
            x = xs[g0]
            g1 = g0
            while g1 < nt and xs[g1] == x:
                g1 += 1
            for b in range(<u64>dim):
                d = 0
                for k in range(g0, g1):
                    d = d + coeffs[k] * _sign(b & zs[k])
                out[b ^ x] = out[b ^ x] + d * psi[b]
            g0 = g1


def overlap_terms(const double complex[::1] phi, const double complex[::1] psi,
                  const u64[::1] xs, const u64[::1] zs, const double complex[::1] coeffs):
    """sum_k coeffs[k] * <phi| P_k |psi>."""
    cdef Py_ssize_t dim = psi.shape[0], nt = xs.shape[0]
    cdef Py_ssize_t g0 = 0, g1, k
    cdef u64 b, x
    cdef double complex d, f, acc = 0
    with nogil:
        while g0 < nt:
            x = xs[g0]
            g1 = g0
            while g1 < nt and xs[g1] == x:
                g1 += 1
            for b in range(<u64>dim):
                d = 0
                for k in range(g0, g1):
                    d = d + coeffs[k] * _sign(b & zs[k])
                f = phi[b ^ x]
                acc = acc + (f.real - 1j * f.imag) * d * psi[b]
            g0 = g1
    return complex(acc)


def rotate_string(double complex[::1] psi, u64 x, u64 z, double complex phase, double angle):
    """In place: psi <- exp(-i angle P) psi for the Hermitian string P = phase X^x Z^z."""
    cdef Py_ssize_t dim = psi.shape[0]
    cdef double c = cos(angle), s = sin(angle)
    cdef double complex ms = -1j * s * phase
    cdef double complex a0, a1
    cdef u64 b, b2, hi
    with nogil:
        if x == 0:
            for b in range(<u64>dim):
                psi[b] = psi[b] * (c + ms * _sign(b & z))
        else:
            # pair each b with b ^ x once, keyed on the highest bit of x
            hi = 1
            while (hi << 1) <= x:
                hi <<= 1
            for b in range(<u64>dim):
                if b & hi:
                    continue
                b2 = b ^ x
                a0 = psi[b]
                a1 = psi[b2]
                psi[b] = c * a0 + ms * _sign(b2 & z) * a1
                psi[b2] = c * a1 + ms * _sign(b & z) * a0


def diagonal(int n, const u64[::1] zs, const double complex[::1] coeffs):
    """Diagonal of sum_k coeffs[k] * Z^{z_k} over the 2**n basis."""
    cdef Py_ssize_t dim = 1 << n, nt = zs.shape[0], k
    cdef u64 b
    cdef double complex d
    out = np.empty(dim, dtype=np.complex128)
    cdef double complex[::1] o = out
    with nogil:
        for b in range(<u64>dim):
            d = 0
            for k in range(nt):
                d = d + coeffs[k] * _sign(b & zs[k])
            o[b] = d
    return out

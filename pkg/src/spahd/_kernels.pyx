# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels.

Mirror of spahd._kernels_py; see that module for the formula notes.  The two
must produce the same values to rounding, which tests/test_kernels.py checks.
"""

from libc.math cimport atan2, cos, exp, log1p, sin

cdef extern from "complex.h" nogil:
    double complex ctanh(double complex)
    double creal(double complex)


def corr_integrand_fill(double[:, ::1] nodes, double[::1] weights,
                        double[:, ::1] m1, double[::1] v2,
                        double tanh_a, double sech_a, double n_factor,
                        double complex[::1] out):
    cdef Py_ssize_t nn = nodes.shape[0]
    cdef Py_ssize_t d = nodes.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double q, beta, acc, sb, cb, x2, re, im, mag, phase, tj
    with nogil:
        for i in range(nn):
            q = 0.0
            beta = 0.0
            for j in range(d):
                tj = nodes[i, j]
                beta += v2[j] * tj
                acc = 0.0
                for k in range(d):
                    acc += m1[j, k] * nodes[i, k]
                q += tj * acc
            sb = sin(beta)
            cb = cos(beta)
            x2 = sb * sech_a
            x2 = x2 * x2
            if x2 >= 1.0:
                out[i] = 0.0
                continue
            re = -0.5 * q + 0.5 * log1p(-x2)
            im = -tanh_a * beta + atan2(tanh_a * sb, cb)
            mag = exp(n_factor * re)
            phase = n_factor * im
            out[i] = weights[i] * (mag * cos(phase) + 1j * (mag * sin(phase)))
    return out


def c34_kernel_grids(double[::1] alpha, double[::1] beta,
                     double[::1] out3, double[::1] out4):
    cdef Py_ssize_t n = alpha.shape[0]
    cdef Py_ssize_t i
    cdef double complex t, s2
    cdef double k3, k4
    with nogil:
        for i in range(n):
            t = ctanh(alpha[i] + 1j * beta[i])
            s2 = 1.0 - t * t
            k3 = 2.0 * creal(s2 * t)
            k4 = 2.0 * creal(s2 * (1.0 - 3.0 * s2))
            out3[i] = k3 if k3 >= 0.0 else -k3
            out4[i] = k4 if k4 >= 0.0 else -k4
    return out3, out4

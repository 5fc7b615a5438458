"""NumPy implementations of the hot kernels.

Drop-in fallback for the compiled module `spahd._kernels`; both expose the
same functions with identical semantics, and `spahd._core` picks one at
import time.  Keep the formulas in the two files in lockstep.
"""

import numpy as np

BACKEND = "python"


def corr_integrand_fill(nodes, weights, m1, v2, tanh_a, sech_a, n_factor, out):
    """Weighted correction-integral integrand at a batch of quadrature nodes.

    For a node t the integrand is exp(n * (re + i*im)) with

        re = -0.5 * t'M1t + 0.5 * log(1 - (sin(beta) * sech_a)^2)
        im = -tanh_a * beta + atan2(tanh_a * sin(beta), cos(beta))

    where beta = <v2, t>.  M1 is the imaginary-direction covariance in the
    Hessian-whitened coordinates and v2 the whitened mixture direction; the
    phase term uses the principal argument of cosh, whose 2*pi (and sign-flip
    pi) jumps are absorbed exactly by exp for integer n.  A magnitude of zero
    (node on a zero of cosh) yields exactly 0.

    Writes weights * integrand into ``out`` (complex128, same length).
    """
    q = np.einsum("ij,jk,ik->i", nodes, m1, nodes)
    beta = nodes @ v2
    sb = np.sin(beta)
    cb = np.cos(beta)
    x2 = np.square(sb * sech_a)
    with np.errstate(divide="ignore"):
        re = -0.5 * q + 0.5 * np.log1p(-np.minimum(x2, 1.0))
    im = -tanh_a * beta + np.arctan2(tanh_a * sb, cb)
    mag = np.exp(n_factor * re)
    phase = n_factor * im
    out[:] = weights * (mag * np.cos(phase) + 1j * (mag * np.sin(phase)))
    return out


def c34_kernel_grids(alpha, beta, out3, out4):
    """Third/fourth derivative kernel magnitudes on paired (alpha, beta) arrays.

    k3 = |2 Re[sech^2(w) tanh(w)]|, k4 = |2 Re[sech^2(w) (1 - 3 sech^2(w))]|
    with w = alpha + i*beta, computed through tanh alone (sech^2 = 1 - tanh^2)
    so large |alpha| stays finite.
    """
    w = alpha + 1j * beta
    t = np.tanh(w)
    s2 = 1.0 - t * t
    out3[:] = np.abs(2.0 * np.real(s2 * t))
    out4[:] = np.abs(2.0 * np.real(s2 * (1.0 - 3.0 * s2)))
    return out3, out4

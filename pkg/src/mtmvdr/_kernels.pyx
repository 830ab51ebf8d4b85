# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Same contracts as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, floor, M_PI, fabs

cnp.import_array()


def outer_sum(const double complex[:, :, ::1] z):
    """Sum over frames of z z^H for every frequency: (T, F, D) -> (F, D, D)."""
    cdef Py_ssize_t T = z.shape[0], F = z.shape[1], D = z.shape[2]
    cdef Py_ssize_t t, f, a, b
    cdef double ar, ai, br, bi
    cdef const double[:, :, ::1] zr = np.asarray(z).view(np.float64)
    out = np.zeros((F, D, D), dtype=np.complex128)
    cdef double[:, :, ::1] acc = out.view(np.float64)
    with nogil:
        for t in range(T):
            for f in range(F):
                for a in range(D):
                    ar = zr[t, f, 2 * a]
                    ai = zr[t, f, 2 * a + 1]
                    if ar == 0 and ai == 0:
                        continue
                    for b in range(a, D):
                        br = zr[t, f, 2 * b]
                        bi = zr[t, f, 2 * b + 1]
                        acc[f, a, 2 * b] += ar * br + ai * bi
                        acc[f, a, 2 * b + 1] += ai * br - ar * bi
        for f in range(F):
            for a in range(D):
                for b in range(a + 1, D):
                    acc[f, b, 2 * a] = acc[f, a, 2 * b]
                    acc[f, b, 2 * a + 1] = -acc[f, a, 2 * b + 1]
    return out


def add_pulses(double[::1] out, const double[::1] delays, const double[::1] gains, int half_width):
    """Add unit-DC-gain Hann-windowed sinc pulses at fractional ``delays`` (in samples)."""
    cdef Py_ssize_t n_img = delays.shape[0], n_out = out.shape[0]
    cdef Py_ssize_t i, k, n0, idx, taps = 2 * half_width + 1
    cdef double c, x, s, wsum, W = half_width + 1.0
    cdef double[::1] ker = np.empty(taps)
    with nogil:
        for i in range(n_img):
            c = delays[i]
            n0 = <Py_ssize_t>floor(c)
            wsum = 0.0
            for k in range(taps):
                x = (n0 - half_width + k) - c
                if fabs(x) < 1e-12:
                    s = 1.0
                else:
                    s = sin(M_PI * x) / (M_PI * x)
                s = s * 0.5 * (1.0 + cos(M_PI * x / W))
                ker[k] = s
                wsum = wsum + s
            for k in range(taps):
                idx = n0 - half_width + k
                if 0 <= idx < n_out:
                    out[idx] += gains[i] * ker[k] / wsum

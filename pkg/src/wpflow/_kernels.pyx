# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled stencil kernels.

All kernels take a C-contiguous ``(nx, ny)`` float64 array; one-dimensional
fields are passed with ``ny == 1``, for which the reflected ghost makes the
y-contribution vanish. ``ihx2`` and ``ihy2`` are the inverse squared
spacings. Sums are accumulated in a fixed loop order.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline void _lap(const double[:, ::1] w, double[:, ::1] out,
                      double ihx2, double ihy2) noexcept nogil:
    cdef Py_ssize_t nx = w.shape[0], ny = w.shape[1]
    cdef Py_ssize_t i, j, im, ip, jm, jp
    cdef double c
    for i in range(nx):
        im = i - 1 if i > 0 else 0
        ip = i + 1 if i < nx - 1 else nx - 1
        for j in range(ny):
            jm = j - 1 if j > 0 else 0
            jp = j + 1 if j < ny - 1 else ny - 1
            c = w[i, j]
            out[i, j] = ((w[im, j] - c) + (w[ip, j] - c)) * ihx2 \
                + ((w[i, jm] - c) + (w[i, jp] - c)) * ihy2


def laplacian(const double[:, ::1] w, double ihx2, double ihy2):
    out = np.empty((w.shape[0], w.shape[1]), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        _lap(w, o, ihx2, ihy2)
    return out


def chemical_potential(const double[:, ::1] w, double ihx2, double ihy2, double a):
    out = np.empty((w.shape[0], w.shape[1]), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j
    cdef double r
    with nogil:
        _lap(w, o, ihx2, ihy2)
        for i in range(w.shape[0]):
            for j in range(w.shape[1]):
                r = w[i, j]
                o[i, j] = -o[i, j] + a * (r * r * r - r)
    return out


def area_sum(const double[:, ::1] w, double ihx2, double ihy2, double a):
    """Sum over nodes of ``-w*lap(w)/2 + W(w)`` (multiply by cell volume)."""
    lap = np.empty((w.shape[0], w.shape[1]), dtype=np.float64)
    cdef double[:, ::1] l = lap
    cdef Py_ssize_t i, j
    cdef double r, q, grad_part = 0.0, pot_part = 0.0
    with nogil:
        _lap(w, l, ihx2, ihy2)
        for i in range(w.shape[0]):
            for j in range(w.shape[1]):
                r = w[i, j]
                q = r * r - 1.0
                grad_part -= r * l[i, j]
                pot_part += q * q
    return 0.5 * grad_part + 0.25 * a * pot_part


def energy_grad(const double[:, ::1] w, double ihx2, double ihy2, double a):
    """Return ``(sum mu**2 / 2, mu, grad)`` with ``grad = -lap(mu) + W''(w) mu``."""
    mu_arr = np.empty((w.shape[0], w.shape[1]), dtype=np.float64)
    grad_arr = np.empty((w.shape[0], w.shape[1]), dtype=np.float64)
    cdef double[:, ::1] mu = mu_arr
    cdef double[:, ::1] g = grad_arr
    cdef Py_ssize_t i, j
    cdef double r, m, acc = 0.0
    with nogil:
        _lap(w, mu, ihx2, ihy2)
        for i in range(w.shape[0]):
            for j in range(w.shape[1]):
                r = w[i, j]
                m = -mu[i, j] + a * (r * r * r - r)
                mu[i, j] = m
                acc += m * m
        _lap(mu, g, ihx2, ihy2)
        for i in range(w.shape[0]):
            for j in range(w.shape[1]):
                r = w[i, j]
                g[i, j] = -g[i, j] + a * (3.0 * r * r - 1.0) * mu[i, j]
    return 0.5 * acc, mu_arr, grad_arr

# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled reflectivity kernels, the hot path behind the layer simulator.

``reflection_amplitude`` fuses the wavevector computation and the Parratt
recursion into one pass per grid point, with no intermediate arrays;
``parratt_amplitude`` runs the recursion alone on precomputed wavevectors.
Arithmetic matches the numpy fallback in ``_parratt_py`` to rounding.
"""

import numpy as np

cimport cython


cdef extern from "complex.h" nogil:
    double complex cexp(double complex)
    double complex csqrt(double complex)
    double cimag(double complex)


def reflection_amplitude(n_media, sin2theta, k0, thickness):
    """Stack reflection amplitude from optical constants.

    Same contract as ``_parratt_py.reflection_amplitude``: ``n_media`` is
    (nmedia,) or (npts, nmedia), ``sin2theta`` is (npts,).
    """
    n_arr = np.ascontiguousarray(n_media, dtype=np.complex128)
    sin2 = np.ascontiguousarray(sin2theta, dtype=np.float64)
    d_arr = np.ascontiguousarray(thickness, dtype=np.float64)
    if sin2.ndim != 1:
        raise ValueError("sin2theta must be 1-d")
    if n_arr.ndim not in (1, 2):
        raise ValueError("n_media must be 1-d or 2-d")
    nmedia = n_arr.shape[0] if n_arr.ndim == 1 else n_arr.shape[1]
    if d_arr.shape[0] != nmedia:
        raise ValueError("thickness length must match the number of media")
    if nmedia < 2:
        raise ValueError("need at least vacuum and a substrate")
    out = np.empty(sin2.shape[0], dtype=np.complex128)
    scratch = np.empty(nmedia, dtype=np.complex128)
    if n_arr.ndim == 1:
        _fused_const_n(n_arr, sin2, float(k0), d_arr, scratch, out)
    else:
        if n_arr.shape[0] != sin2.shape[0]:
            raise ValueError("n_media rows must match sin2theta length")
        _fused_var_n(n_arr, sin2, float(k0), d_arr, scratch, out)
    return out


def parratt_amplitude(kz, thickness):
    """Parratt recursion on precomputed wavevectors (npts, nmedia)."""
    kz_arr = np.ascontiguousarray(kz, dtype=np.complex128)
    d_arr = np.ascontiguousarray(thickness, dtype=np.float64)
    if kz_arr.ndim != 2:
        raise ValueError("kz must be 2-d (npts, nmedia)")
    if d_arr.shape[0] != kz_arr.shape[1]:
        raise ValueError("thickness length must match the number of media")
    if kz_arr.shape[1] < 2:
        raise ValueError("need at least vacuum and a substrate")
    out = np.empty(kz_arr.shape[0], dtype=np.complex128)
    _recurse(kz_arr, d_arr, out)
    return out


cdef inline double complex _branch_kz(double complex n, double sin2, double k0) noexcept nogil:
    # (n^2 - 1) + sin^2(theta): keeps grazing-incidence cancellation benign
    cdef double complex value = k0 * csqrt((n * n - 1.0) + sin2)
    if cimag(value) < 0.0:
        return -value
    return value


cdef inline double complex _recurse_row(const double complex* kz_row,
                                        const double* d,
                                        Py_ssize_t nmedia) noexcept nogil:
    cdef Py_ssize_t m
    cdef double complex r = 0.0, r_f, rp
    for m in range(nmedia - 2, -1, -1):
        r_f = (kz_row[m] - kz_row[m + 1]) / (kz_row[m] + kz_row[m + 1])
        if m == nmedia - 2:
            r = r_f
        else:
            # exp(2j*kz*d) with Im(kz) >= 0 cannot overflow
            rp = r * cexp(2j * kz_row[m + 1] * d[m + 1])
            r = (r_f + rp) / (1.0 + r_f * rp)
    return r


@cython.boundscheck(False)
@cython.wraparound(False)
cdef void _fused_const_n(const double complex[::1] n,
                         const double[::1] sin2,
                         double k0,
                         const double[::1] d,
                         double complex[::1] kz_row,
                         double complex[::1] out) noexcept nogil:
    cdef Py_ssize_t npts = sin2.shape[0]
    cdef Py_ssize_t nmedia = n.shape[0]
    cdef Py_ssize_t i, m
    for i in range(npts):
        for m in range(nmedia):
            kz_row[m] = _branch_kz(n[m], sin2[i], k0)
        out[i] = _recurse_row(&kz_row[0], &d[0], nmedia)


@cython.boundscheck(False)
@cython.wraparound(False)
cdef void _fused_var_n(const double complex[:, ::1] n,
                       const double[::1] sin2,
                       double k0,
                       const double[::1] d,
                       double complex[::1] kz_row,
                       double complex[::1] out) noexcept nogil:
    cdef Py_ssize_t npts = sin2.shape[0]
    cdef Py_ssize_t nmedia = n.shape[1]
    cdef Py_ssize_t i, m
    for i in range(npts):
        for m in range(nmedia):
            kz_row[m] = _branch_kz(n[i, m], sin2[i], k0)
        out[i] = _recurse_row(&kz_row[0], &d[0], nmedia)


@cython.boundscheck(False)
@cython.wraparound(False)
cdef void _recurse(const double complex[:, ::1] kz,
                   const double[::1] d,
                   double complex[::1] out) noexcept nogil:
    cdef Py_ssize_t npts = kz.shape[0]
    cdef Py_ssize_t nmedia = kz.shape[1]
    cdef Py_ssize_t i
    for i in range(npts):
        out[i] = _recurse_row(&kz[i, 0], &d[0], nmedia)

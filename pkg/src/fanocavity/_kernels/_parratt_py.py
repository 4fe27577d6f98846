"""Pure-numpy reflectivity kernels, the fallback backend.

Same contracts as the compiled kernels: ``reflection_amplitude`` goes from
optical constants to amplitudes, ``parratt_amplitude`` runs the recursion on
precomputed wavevectors.
"""

import numpy as np


def kz_grid(n_media, sin2theta, k0):
    """Normal wavevectors k0*sqrt(n^2 - cos^2 theta), branch Im >= 0.

    The argument is evaluated as (n^2 - 1) + sin^2 theta, which keeps the
    grazing-incidence cancellation out of the near-unity terms (and makes
    vacuum exact).  ``n_media`` is (nmedia,) or (npts, nmedia);
    ``sin2theta`` is (npts,).  Returns shape (npts, nmedia).
    """
    n_media = np.asarray(n_media, dtype=np.complex128)
    sin2theta = np.asarray(sin2theta, dtype=np.float64)
    if n_media.ndim == 1:
        arg = (n_media[np.newaxis, :] ** 2 - 1.0) + sin2theta[:, np.newaxis]
    else:
        arg = (n_media ** 2 - 1.0) + sin2theta[:, np.newaxis]
    value = k0 * np.sqrt(arg)
    return np.where(value.imag < 0.0, -value, value)


def reflection_amplitude(n_media, sin2theta, k0, thickness):
    """Stack reflection amplitude from optical constants.

    Parameters
    ----------
    n_media : complex ndarray, (nmedia,) or (npts, nmedia)
        Refractive index per medium, vacuum first, substrate last; the 2-d
        form carries per-point (energy-dependent) indices.
    sin2theta : float ndarray, (npts,)
        sin^2 of the grazing angle per grid point.
    k0 : float
        Vacuum wavenumber (1/nm).
    thickness : float ndarray, (nmedia,)
        Layer thicknesses (nm); the semi-infinite ends are ignored.
    """
    return parratt_amplitude(kz_grid(n_media, sin2theta, k0), thickness)


def parratt_amplitude(kz, thickness):
    """Parratt recursion over interfaces, vectorised over grid points.

    ``kz`` has shape (npts, nmedia) with Im(kz) >= 0; returns (npts,)
    amplitudes with |r| <= 1 for passive media.
    """
    kz = np.ascontiguousarray(kz, dtype=np.complex128)
    thickness = np.ascontiguousarray(thickness, dtype=np.float64)
    npts, nmedia = kz.shape
    if thickness.shape != (nmedia,):
        raise ValueError("thickness length must match the number of media")
    if nmedia < 2:
        raise ValueError("need at least vacuum and a substrate")

    r = np.zeros(npts, dtype=np.complex128)
    for m in range(nmedia - 2, -1, -1):
        r_f = (kz[:, m] - kz[:, m + 1]) / (kz[:, m] + kz[:, m + 1])
        if m == nmedia - 2:
            r = r_f
        else:
            rp = r * np.exp(2j * kz[:, m + 1] * thickness[m + 1])
            r = (r_f + rp) / (1.0 + r_f * rp)
    return r

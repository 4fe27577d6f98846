"""Dynamical reflectivity of the physical layer stack.

This is the numerical oracle for the closed-form cavity model: a transfer
matrix (Parratt recursion) over the full multilayer, with the resonant
layer's refractive index carrying a Lorentzian nuclear susceptibility on top
of its electronic response.  The recursion itself lives in ``_kernels``
(compiled when available).

Energy scans are parameterised by the probe detuning ``domega`` in units of
the natural width gamma; electronic constants are evaluated at the nuclear
transition energy (their variation over a few hundred gamma is ~1e-10).
"""

import math

import numpy as np

from .. import _kernels
from ..errors import DomainError, InputError

#: hc in keV*nm.
HC_KEV_NM = 1.23984193

#: Default scan grids: the rocking scan resolves the ~0.1 mrad cavity mode,
#: the energy scan the ~100 gamma superradiant line.
DEFAULT_ROCKING_GRID = (2.0e-3, 2.7e-3, 2001)
DEFAULT_ENERGY_GRID = (-200.0, 200.0, 4001)


def wavenumber(omega_kev):
    """Vacuum wavenumber k0 in 1/nm."""
    return 2.0 * math.pi * omega_kev / HC_KEV_NM


def kz(theta, n, k0):
    """Normal wavevector k0 * sqrt(n^2 - cos^2 theta), branch with Im >= 0."""
    if not 0.0 < theta < math.pi / 2:
        raise DomainError(f"theta must be a grazing angle in (0, pi/2), got {theta}")
    value = k0 * np.sqrt(np.asarray(n, dtype=complex) ** 2 - math.cos(theta) ** 2)
    return np.where(value.imag < 0.0, -value, value)


def _media_indices(stack, domega=None, abundance=None):
    """Refractive index per medium; (npts, nmedia) if an energy grid is given."""
    base = np.array(
        [1.0 + 0.0j]
        + [layer.material.refractive_index for layer in stack.layers]
        + [stack.substrate.refractive_index],
        dtype=np.complex128,
    )
    if not np.all(np.isfinite(base)):
        raise InputError("optical constants must be finite")
    if domega is None:
        return base
    domega = np.asarray(domega, dtype=float)
    n = np.tile(base, (domega.size, 1))
    idx = stack.resonant_index
    # zero effective strength must reproduce the bare response bit-for-bit,
    # so the resonant column is only touched when the line is actually on
    if idx is not None and stack.layers[idx].nuclear.effective_strength(abundance) != 0.0:
        layer = stack.layers[idx]
        chi = layer.nuclear.susceptibility(domega, abundance)
        # n = sqrt(n_e^2 + chi_N); electronic part already in n_e
        n[:, idx + 1] = np.sqrt(base[idx + 1] ** 2 + chi)
    return n


def _amplitudes(stack, theta, n_media, k0, backend=None):
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if n_media.ndim == 2:
        if theta.size == 1:
            theta = np.full(n_media.shape[0], theta[0])
        elif theta.size != n_media.shape[0]:
            raise DomainError("angle grid does not match the energy grid")
    cos2 = np.cos(theta) ** 2
    thickness = np.asarray(stack.thicknesses(), dtype=float)
    return _kernels.reflection_amplitude(n_media, cos2, k0, thickness, backend=backend)


def parratt_reflectivity(stack, theta, domega=0.0, include_nuclear=True,
                         abundance=None, backend=None):
    """Complex reflection amplitude of ``stack`` at one angle.

    ``domega`` is the probe detuning in units of gamma and only matters when
    a resonant layer is present and ``include_nuclear`` is true.
    """
    if not 0.0 < theta < math.pi / 2:
        raise DomainError(f"theta must be a grazing angle in (0, pi/2), got {theta}")
    omega0 = _stack_omega0(stack)
    k0 = wavenumber(omega0)
    if include_nuclear and stack.resonant_index is not None:
        n_media = _media_indices(stack, np.array([float(domega)]), abundance)
        return complex(_amplitudes(stack, theta, n_media, k0, backend)[0])
    n_media = _media_indices(stack)
    return complex(_amplitudes(stack, np.array([theta]), n_media, k0, backend)[0])


def _stack_omega0(stack):
    idx = stack.resonant_index
    if idx is not None:
        return stack.layers[idx].nuclear.omega0
    from ..core_model import OMEGA0_KEV

    return OMEGA0_KEV


def rocking_scan(stack, theta_grid=None, backend=None):
    """Bare (electronic-only) |R|^2 versus grazing angle.

    Returns ``(theta_grid, r2)``; the default grid is 2.0 to 2.7 mrad with
    2001 points.
    """
    if theta_grid is None:
        lo, hi, n = DEFAULT_ROCKING_GRID
        theta_grid = np.linspace(lo, hi, n)
    theta_grid = np.asarray(theta_grid, dtype=float)
    if theta_grid.ndim != 1 or theta_grid.size == 0:
        raise DomainError("theta_grid must be a non-empty 1-d grid")
    if np.any(theta_grid <= 0.0) or np.any(theta_grid >= math.pi / 2):
        raise DomainError("theta_grid must lie in (0, pi/2)")
    k0 = wavenumber(_stack_omega0(stack))
    n_media = _media_indices(stack)
    amps = _amplitudes(stack, theta_grid, n_media, k0, backend)
    return theta_grid, np.abs(amps) ** 2


def energy_scan(stack, theta, domega_grid=None, abundance=None, backend=None):
    """|R|^2 versus probe detuning (units of gamma) at fixed angle.

    Requires a resonant layer; ``abundance`` overrides the stack's value.
    Zero abundance reproduces the bare-cavity level exactly.
    """
    if stack.resonant_index is None:
        raise InputError("energy scan requires a nuclear-resonant layer in the stack")
    if domega_grid is None:
        lo, hi, n = DEFAULT_ENERGY_GRID
        domega_grid = np.linspace(lo, hi, n)
    domega_grid = np.asarray(domega_grid, dtype=float)
    if domega_grid.ndim != 1 or domega_grid.size == 0:
        raise DomainError("domega_grid must be a non-empty 1-d grid")
    k0 = wavenumber(_stack_omega0(stack))
    n_media = _media_indices(stack, domega_grid, abundance)
    amps = _amplitudes(stack, theta, n_media, k0, backend)
    return domega_grid, np.abs(amps) ** 2

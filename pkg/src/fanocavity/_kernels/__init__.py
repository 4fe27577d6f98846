"""Reflectivity kernels: compiled Parratt recursion with a pure-numpy fallback.

The compiled extension is preferred when importable; set the environment
variable ``FANO_CAVITY_BACKEND`` to ``cython`` or ``python`` to force one.
"""

import os

from . import _parratt_py

_BACKENDS = {"python": _parratt_py}

try:
    from . import _parratt_cy
except ImportError:
    _parratt_cy = None
else:
    _BACKENDS["cython"] = _parratt_cy


def available_backends():
    """Names of usable kernel backends, preferred first."""
    return tuple(name for name in ("cython", "python") if name in _BACKENDS)


def default_backend():
    forced = os.environ.get("FANO_CAVITY_BACKEND")
    if forced:
        if forced not in _BACKENDS:
            raise RuntimeError(
                f"FANO_CAVITY_BACKEND={forced!r} is not available; "
                f"choices: {', '.join(available_backends())}"
            )
        return forced
    return available_backends()[0]


def get_backend(name=None):
    """Return the kernel module for ``name`` (default: best available)."""
    if name is None:
        name = default_backend()
    try:
        return _BACKENDS[name]
    except KeyError:
        raise RuntimeError(
            f"unknown backend {name!r}; choices: {', '.join(available_backends())}"
        ) from None


def reflection_amplitude(n_media, cos2theta, k0, thickness, backend=None):
    """Stack amplitude from optical constants via the selected kernel."""
    return get_backend(backend).reflection_amplitude(n_media, cos2theta, k0, thickness)


def parratt_amplitude(kz, thickness, backend=None):
    """Parratt recursion on precomputed wavevectors via the selected kernel."""
    return get_backend(backend).parratt_amplitude(kz, thickness)

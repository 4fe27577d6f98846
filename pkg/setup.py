"""Build script: compiles the Cython Parratt kernel when possible.

The package stays fully functional without the extension (a numpy fallback
is selected at import), so a failed compilation only costs speed.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/fanocavity/_kernels/_parratt_cy.pyx"],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    sys.stderr.write(f"warning: Cython kernel not built ({exc}); "
                     "the numpy fallback will be used\n")

setup(ext_modules=ext_modules)

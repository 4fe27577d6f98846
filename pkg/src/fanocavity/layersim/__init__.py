"""Transfer-matrix oracle for layered X-ray cavities."""

from .engine import (
    DEFAULT_ENERGY_GRID,
    DEFAULT_ROCKING_GRID,
    energy_scan,
    kz,
    parratt_reflectivity,
    rocking_scan,
    wavenumber,
)
from .materials import (
    DEFAULT_NUCLEAR_STRENGTH,
    Layer,
    LayerStack,
    Material,
    NuclearSusceptibility,
    VACUUM,
    default_materials,
    load_stack,
    parse_stack,
)

__all__ = [
    "DEFAULT_ENERGY_GRID",
    "DEFAULT_NUCLEAR_STRENGTH",
    "DEFAULT_ROCKING_GRID",
    "Layer",
    "LayerStack",
    "Material",
    "NuclearSusceptibility",
    "VACUUM",
    "default_materials",
    "energy_scan",
    "kz",
    "load_stack",
    "parratt_reflectivity",
    "parse_stack",
    "rocking_scan",
    "wavenumber",
]

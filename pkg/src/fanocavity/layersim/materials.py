"""Layer-stack description: materials, nuclear response, strict JSON loading.

Optical constants are inputs, not physics baked into the code: the shipped
table (``data/materials.json``) holds delta and beta at 14.4 keV computed
from bulk densities, and can be replaced wholesale via the
``FANO_CAVITY_MATERIALS`` environment variable or a ``materials`` block in
the stack file.
"""

import json
import math
import os
from dataclasses import dataclass
from importlib import resources
from typing import Optional

import numpy as np

from ..core_model import GAMMA_57FE, OMEGA0_KEV
from ..errors import InputError

#: Hard X-ray sanity bound on refractive decrements.
MAX_OPTICAL_CONSTANT = 1e-4

#: Peak resonant susceptibility of a fully enriched 57Fe layer
#: (n * sigma0 * f_LM / k0 for bulk iron), editable via the stack file.
DEFAULT_NUCLEAR_STRENGTH = 2.4e-4


@dataclass(frozen=True)
class Material:
    """Electronic optical constants, n = 1 - delta + i beta."""

    name: str
    delta: float
    beta: float

    def __post_init__(self):
        for field_name in ("delta", "beta"):
            value = getattr(self, field_name)
            if not math.isfinite(value) or value < 0.0:
                raise InputError(
                    f"{field_name} must be finite and non-negative, got {value!r}",
                    location=f"material {self.name!r}",
                )
            if value >= MAX_OPTICAL_CONSTANT:
                raise InputError(
                    f"{field_name}={value!r} is outside the hard X-ray regime "
                    f"(expected < {MAX_OPTICAL_CONSTANT})",
                    location=f"material {self.name!r}",
                )

    @property
    def refractive_index(self):
        return complex(1.0 - self.delta, self.beta)


VACUUM = Material("vacuum", 0.0, 0.0)


@dataclass(frozen=True)
class NuclearSusceptibility:
    """Single-line Lorentzian nuclear response of a resonant layer.

    ``strength`` is the peak susceptibility amplitude at 100% abundance; the
    effective amplitude is ``strength * abundance``, so zero of either one
    reproduces the bare electronic response exactly.
    """

    omega0: float = OMEGA0_KEV
    gamma: float = GAMMA_57FE
    strength: float = DEFAULT_NUCLEAR_STRENGTH
    abundance: float = 1.0

    def __post_init__(self):
        if self.omega0 <= 0.0 or not math.isfinite(self.omega0):
            raise InputError(f"omega0 must be positive, got {self.omega0!r}")
        if self.gamma <= 0.0 or not math.isfinite(self.gamma):
            raise InputError(f"gamma must be positive, got {self.gamma!r}")
        if self.strength < 0.0 or not math.isfinite(self.strength):
            raise InputError(f"strength must be non-negative, got {self.strength!r}")
        if not 0.0 <= self.abundance <= 1.0:
            raise InputError(f"abundance must be in [0, 1], got {self.abundance!r}")

    def effective_strength(self, abundance=None):
        return self.strength * (self.abundance if abundance is None else abundance)

    def susceptibility(self, domega, abundance=None):
        """chi_N = -s * (gamma/2) / (dw + i gamma/2) with dw in units of gamma."""
        return -self.effective_strength(abundance) / (2.0 * np.asarray(domega) + 1j)


@dataclass(frozen=True)
class Layer:
    """One slab: material, thickness in nm, optional nuclear resonance."""

    material: Material
    thickness: float
    nuclear: Optional[NuclearSusceptibility] = None

    def __post_init__(self):
        if not math.isfinite(self.thickness) or self.thickness <= 0.0:
            raise InputError(
                f"thickness must be positive, got {self.thickness!r}",
                location=f"layer {self.material.name!r}",
            )


@dataclass(frozen=True)
class LayerStack:
    """Ordered layers, vacuum above, semi-infinite substrate below."""

    layers: tuple
    substrate: Material

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        resonant = [i for i, layer in enumerate(self.layers) if layer.nuclear is not None]
        if len(resonant) > 1:
            raise InputError(
                f"at most one nuclear-resonant layer is supported, found {len(resonant)}"
            )

    @property
    def resonant_index(self):
        """Index of the nuclear-resonant layer, or None."""
        for i, layer in enumerate(self.layers):
            if layer.nuclear is not None:
                return i
        return None

    def thicknesses(self):
        """Per-medium thickness array (vacuum, layers..., substrate); ends are 0."""
        return [0.0] + [layer.thickness for layer in self.layers] + [0.0]


def _load_material_table(raw, location):
    if not isinstance(raw, dict):
        raise InputError("materials table must be an object", location=location)
    table = {}
    for name, entry in raw.items():
        loc = f"{location}.{name}"
        if not isinstance(entry, dict):
            raise InputError("material entry must be an object", location=loc)
        unknown = set(entry) - {"delta", "beta"}
        if unknown:
            raise InputError(f"unknown keys {sorted(unknown)}", location=loc)
        for key in ("delta", "beta"):
            if key not in entry:
                raise InputError(f"missing key {key!r}", location=loc)
            if not isinstance(entry[key], (int, float)) or isinstance(entry[key], bool):
                raise InputError(f"{key} must be a number", location=f"{loc}.{key}")
        table[name] = Material(name, float(entry["delta"]), float(entry["beta"]))
    return table


def default_materials():
    """Shipped material table, or the FANO_CAVITY_MATERIALS override."""
    override = os.environ.get("FANO_CAVITY_MATERIALS")
    if override:
        try:
            with open(override, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise InputError(f"cannot read material table: {exc}", location=override) from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"invalid JSON: {exc}", location=override) from exc
        return _load_material_table(raw, location=override)
    text = resources.files("fanocavity.data").joinpath("materials.json").read_text()
    return _load_material_table(json.loads(text), location="data/materials.json")


_STACK_KEYS = {"layers", "materials", "substrate", "nuclear"}
_LAYER_KEYS = {"material", "thickness_nm", "abundance"}
_NUCLEAR_KEYS = {"omega0_kev", "gamma_nev", "strength"}


def parse_stack(doc, location="stack"):
    """Build a LayerStack from a parsed stack document; unknown keys reject."""
    if not isinstance(doc, dict):
        raise InputError("stack description must be an object", location=location)
    unknown = set(doc) - _STACK_KEYS
    if unknown:
        raise InputError(f"unknown keys {sorted(unknown)}", location=location)
    if "layers" not in doc:
        raise InputError("missing key 'layers'", location=location)
    if not isinstance(doc["layers"], list) or not doc["layers"]:
        raise InputError("'layers' must be a non-empty list", location=f"{location}.layers")

    table = dict(default_materials())
    if "materials" in doc:
        table.update(_load_material_table(doc["materials"], f"{location}.materials"))

    nuclear_defaults = {"omega0_kev": OMEGA0_KEV, "gamma_nev": GAMMA_57FE * OMEGA0_KEV * 1e12,
                        "strength": DEFAULT_NUCLEAR_STRENGTH}
    if "nuclear" in doc:
        block = doc["nuclear"]
        loc = f"{location}.nuclear"
        if not isinstance(block, dict):
            raise InputError("'nuclear' must be an object", location=loc)
        unknown = set(block) - _NUCLEAR_KEYS
        if unknown:
            raise InputError(f"unknown keys {sorted(unknown)}", location=loc)
        for key, value in block.items():
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise InputError(f"{key} must be a number", location=f"{loc}.{key}")
            nuclear_defaults[key] = float(value)

    def lookup(name, loc):
        if name == "vacuum":
            return VACUUM
        if name not in table:
            raise InputError(f"material {name!r} not in table", location=loc)
        return table[name]

    layers = []
    for i, entry in enumerate(doc["layers"]):
        loc = f"{location}.layers[{i}]"
        if not isinstance(entry, dict):
            raise InputError("layer must be an object", location=loc)
        unknown = set(entry) - _LAYER_KEYS
        if unknown:
            raise InputError(f"unknown keys {sorted(unknown)}", location=loc)
        for key in ("material", "thickness_nm"):
            if key not in entry:
                raise InputError(f"missing key {key!r}", location=loc)
        if not isinstance(entry["material"], str):
            raise InputError("material must be a string", location=f"{loc}.material")
        thickness = entry["thickness_nm"]
        if not isinstance(thickness, (int, float)) or isinstance(thickness, bool):
            raise InputError("thickness_nm must be a number", location=f"{loc}.thickness_nm")
        material = lookup(entry["material"], f"{loc}.material")
        nuclear = None
        if "abundance" in entry:
            abundance = entry["abundance"]
            if not isinstance(abundance, (int, float)) or isinstance(abundance, bool):
                raise InputError("abundance must be a number", location=f"{loc}.abundance")
            if not 0.0 <= abundance <= 1.0:
                raise InputError("abundance must be in [0, 1]", location=f"{loc}.abundance")
            omega0 = nuclear_defaults["omega0_kev"]
            nuclear = NuclearSusceptibility(
                omega0=omega0,
                gamma=nuclear_defaults["gamma_nev"] * 1e-12 / omega0,
                strength=nuclear_defaults["strength"],
                abundance=float(abundance),
            )
        try:
            layers.append(Layer(material, float(thickness), nuclear))
        except InputError as exc:
            raise InputError(str(exc), location=loc) from exc

    substrate_name = doc.get("substrate", "Si")
    if not isinstance(substrate_name, str):
        raise InputError("substrate must be a material name", location=f"{location}.substrate")
    substrate = lookup(substrate_name, f"{location}.substrate")
    return LayerStack(tuple(layers), substrate)


def load_stack(path):
    """Load and validate a stack description file."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read stack file: {exc}", location=str(path)) from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON: {exc}", location=str(path)) from exc
    return parse_stack(doc, location=str(path))

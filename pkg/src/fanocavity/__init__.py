"""Fano resonances of Moessbauer nuclei in thin-film X-ray cavities.

Forward model, transfer-matrix oracle, least-squares parameter extraction
and complex-q trajectory mapping.
"""

__version__ = "0.1.0"

from .core_model import (
    CavityParams,
    DetuningState,
    FanoProfile,
    GAMMA_57FE,
    NuclearEnsemble,
    OMEGA0_KEV,
    cavity_detuning,
    classify_regime,
    collective_strength,
    complex_q,
    detuning_state,
    fano_lineshape,
    fano_profile,
    lamb_shift,
    q_offset,
    reflectivity_spectrum,
    relative_amplitude,
    relative_phase,
    single_atom_width,
)
from .errors import (
    DegenerateGeometryError,
    DomainError,
    FanoCavityError,
    FitError,
    InputError,
    SingularityError,
)
from .fitting import (
    BareCavityFit,
    CavityContext,
    FanoFit,
    OptimizerConfig,
    fit_bare_cavity,
    fit_fano,
    initial_guess_bare,
    least_squares_minimize,
)
from .layersim import (
    Layer,
    LayerStack,
    Material,
    NuclearSusceptibility,
    energy_scan,
    load_stack,
    parratt_reflectivity,
    rocking_scan,
)
from .trajectory import (
    ArcFit,
    LineFit,
    OracleSetup,
    QTrajectory,
    SweepSpec,
    fit_arc,
    fit_line,
    q_surface,
    sweep_abundance,
    sweep_angle,
)

__all__ = [name for name in dir() if not name.startswith("_")]

"""Closed-form model of a thin-film X-ray cavity driving a nuclear ensemble.

The cavity is characterised by its mode angle, decay rate ``kappa`` and
in-coupling rate ``kappa_r``; the embedded ensemble by its natural width,
coupling constant and effective number of resonant nuclei.  Everything a
Fano lineshape needs (complex asymmetry parameter q, collective strength,
superradiant width, Lamb shift, two-pathway amplitude and phase) is derived
here in closed form.

Unit conventions
----------------
Rates (kappa, kappa_r, gamma, g, widths, shifts, detunings) are dimensionless
fractions of the nuclear transition energy omega0.  Probe-energy grids are
detunings ``omega - omega0`` expressed in units of the natural width gamma;
keeping the grid as a detuning avoids the catastrophic cancellation that an
absolute 14.4 keV axis would suffer at the ~1e-13 relative scale of gamma.
Angles are radians unless a name says otherwise.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SingularityError

OMEGA0_KEV = 14.4
#: 57Fe natural linewidth (4.7 neV) as a fraction of omega0 = 14.4 keV.
GAMMA_57FE = 4.7e-9 / 14.4e3

#: Defaults giving N*Gamma_s ~ 1e2 gamma at 100% abundance on the first mode
#: of the Pt cavity (visibly superradiant lines).
DEFAULT_G = 5.6e-9
DEFAULT_N_REF = 1.0e4

OVERCRITICAL = "overcritical"
CRITICAL = "critical"
UNDERCRITICAL = "undercritical"

REGIME_TOL = 1e-9


def _require_finite(name, value):
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class CavityParams:
    """Bare-cavity physics: mode angle and coupling rates.

    ``kappa`` and ``kappa_r`` are in units of omega0; ``theta_mode`` is the
    grazing angle of the driven mode in radians.
    """

    theta_mode: float
    kappa: float
    kappa_r: float
    omega0: float = OMEGA0_KEV

    def __post_init__(self):
        for name in ("theta_mode", "kappa", "kappa_r", "omega0"):
            _require_finite(name, getattr(self, name))
        if not 0.0 < self.theta_mode < math.pi / 2:
            raise DomainError(f"theta_mode must be in (0, pi/2), got {self.theta_mode}")
        if self.kappa <= 0.0:
            raise DomainError(f"kappa must be positive, got {self.kappa}")
        if self.kappa_r <= 0.0:
            raise DomainError(f"kappa_r must be positive, got {self.kappa_r}")

    @property
    def regime(self):
        return classify_regime(self)


@dataclass(frozen=True)
class NuclearEnsemble:
    """Nuclear transition data and effective resonant number.

    ``n_ref`` is the effective nuclear number at 100% abundance; the working
    number is ``n_ref * abundance``.
    """

    gamma: float = GAMMA_57FE
    g: float = DEFAULT_G
    n_ref: float = DEFAULT_N_REF
    abundance: float = 1.0

    def __post_init__(self):
        for name in ("gamma", "g", "n_ref", "abundance"):
            _require_finite(name, getattr(self, name))
        if self.gamma <= 0.0:
            raise DomainError(f"gamma must be positive, got {self.gamma}")
        if self.g < 0.0:
            raise DomainError(f"g must be non-negative, got {self.g}")
        if self.n_ref <= 0.0:
            raise DomainError(f"n_ref must be positive, got {self.n_ref}")
        if not 0.0 <= self.abundance <= 1.0:
            raise DomainError(f"abundance must be in [0, 1], got {self.abundance}")

    @property
    def n_eff(self):
        return self.n_ref * self.abundance

    def with_abundance(self, abundance):
        return NuclearEnsemble(self.gamma, self.g, self.n_ref, abundance)


@dataclass(frozen=True)
class FanoProfile:
    """Derived lineshape quantities at one working point (theta, abundance).

    ``width`` (N*Gamma_s + gamma) and ``lamb_shift`` are in omega0 units.
    ``q = 1j + pi_strength * r_e * exp(1j * phi_e)`` holds identically.
    """

    q: complex
    pi_strength: float
    width: float
    lamb_shift: float
    r_e: float
    phi_e: float
    prefactor: float


@dataclass(frozen=True)
class DetuningState:
    """Kinematic state of one probe point: angle, cavity detuning, scaled energy.

    ``domega`` is the probe detuning omega - omega0 in units of gamma.
    """

    theta: float
    delta_c: float
    epsilon: float
    domega: float


def cavity_detuning(theta, cavity):
    """Cavity detuning Delta_c = (sin(theta_mode)/sin(theta) - 1), omega0 units.

    Negative above the mode angle, positive below, zero exactly on it.
    """
    try:
        theta = float(theta)
    except (TypeError, ValueError) as exc:
        raise DomainError(f"theta must be a real angle, got {theta!r}") from exc
    if not math.isfinite(theta) or theta <= 0.0:
        raise DomainError(f"theta must be a positive finite angle, got {theta!r}")
    if theta >= math.pi / 2:
        raise DomainError(f"theta must be a grazing angle below pi/2, got {theta}")
    if theta == cavity.theta_mode:
        return 0.0
    return math.sin(cavity.theta_mode) / math.sin(theta) - 1.0


def classify_regime(cavity, tol=REGIME_TOL):
    """Coupling regime from the sign of 2*kappa_r - kappa at relative tolerance."""
    if tol < 0.0:
        raise DomainError(f"tol must be non-negative, got {tol}")
    margin = 2.0 * cavity.kappa_r - cavity.kappa
    if margin > tol * cavity.kappa:
        return OVERCRITICAL
    if -margin > tol * cavity.kappa:
        return UNDERCRITICAL
    return CRITICAL


def single_atom_width(delta_c, cavity, ensemble):
    """Single-nucleus broadening Gamma_s = 2 g^2 / (kappa + Delta_c^2 / kappa)."""
    if cavity.kappa == 0.0:
        raise SingularityError("Gamma_s is singular at kappa = 0")
    return 2.0 * ensemble.g ** 2 / (cavity.kappa + delta_c ** 2 / cavity.kappa)


def collective_strength(ensemble, gamma_s):
    """Collective resonant strength Pi = N*Gamma_s / (N*Gamma_s + gamma), in [0, 1)."""
    if gamma_s < 0.0:
        raise DomainError(f"gamma_s must be non-negative, got {gamma_s}")
    n_gs = ensemble.n_eff * gamma_s
    return n_gs / (n_gs + ensemble.gamma)


def _at_critical_pole(delta_c, cavity, tol=REGIME_TOL):
    return delta_c == 0.0 and classify_regime(cavity, tol) == CRITICAL


def relative_amplitude(delta_c, cavity):
    """Two-pathway amplitude ratio r_E; even in Delta_c.

    Diverges at critical coupling with zero detuning; that exact point raises.
    """
    if _at_critical_pole(delta_c, cavity):
        raise SingularityError("r_E has a pole at 2*kappa_r = kappa, Delta_c = 0")
    k, kr = cavity.kappa, cavity.kappa_r
    num = k * k + delta_c * delta_c
    den = (2.0 * kr - k) ** 2 + delta_c * delta_c
    return (2.0 * kr / k) * math.sqrt(num / den)


def relative_phase(delta_c, cavity):
    """Two-pathway phase phi_E = arg(kappa - i Dc) + arg(2 kappa_r - kappa + i Dc) - pi/2.

    Wrapped to (-pi, pi].  On the mode (Delta_c = 0) this is exactly -pi/2 in the
    overcritical regime and +pi/2 in the undercritical one.
    """
    if _at_critical_pole(delta_c, cavity):
        raise SingularityError("phi_E is undefined at 2*kappa_r = kappa, Delta_c = 0")
    k, kr = cavity.kappa, cavity.kappa_r
    phi = math.atan2(-delta_c, k) + math.atan2(delta_c, 2.0 * kr - k) - math.pi / 2.0
    return wrap_angle(phi)


def wrap_angle(phi):
    """Wrap an angle to the principal interval (-pi, pi]."""
    wrapped = math.remainder(phi, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


def lamb_shift(delta_c, gamma_s, n_eff, cavity):
    """Collective Lamb shift -(N Gamma_s / 2)(Delta_c / kappa); odd in Delta_c."""
    return -(n_eff * gamma_s / 2.0) * (delta_c / cavity.kappa)


def complex_q(pi_strength, r_e, phi_e):
    """Asymmetry parameter q = i + Pi * r_E * exp(i phi_E)."""
    if not 0.0 <= pi_strength <= 1.0:
        raise DomainError(f"pi_strength must be in [0, 1], got {pi_strength}")
    if r_e < 0.0:
        raise DomainError(f"r_e must be non-negative, got {r_e}")
    return 1j + pi_strength * r_e * complex(math.cos(phi_e), math.sin(phi_e))


def q_offset(delta_c, cavity, pi_strength):
    """The displacement q - i = Pi * r_E * exp(i phi_E) in one complex product.

    Evaluating the product directly keeps critical-coupling scans stable where
    r_E alone grows without bound; only the exact pole (critical coupling and
    zero detuning, where q itself diverges) raises.
    """
    if _at_critical_pole(delta_c, cavity):
        raise SingularityError("q - i has a pole at 2*kappa_r = kappa, Delta_c = 0")
    k, kr = cavity.kappa, cavity.kappa_r
    return -1j * pi_strength * (2.0 * kr / k) * complex(k, -delta_c) / complex(2.0 * kr - k, -delta_c)


def prefactor(delta_c, cavity):
    """Off-resonant level |(1/r_E)(2 kappa_r/kappa)|^2, the bare-cavity reflectivity."""
    k, kr = cavity.kappa, cavity.kappa_r
    return ((2.0 * kr - k) ** 2 + delta_c ** 2) / (k * k + delta_c ** 2)


def fano_profile(theta, cavity, ensemble):
    """Assemble the full set of lineshape quantities at a working point."""
    dc = cavity_detuning(theta, cavity)
    gs = single_atom_width(dc, cavity, ensemble)
    pi_s = collective_strength(ensemble, gs)
    r_e = relative_amplitude(dc, cavity)
    phi_e = relative_phase(dc, cavity)
    return FanoProfile(
        q=complex_q(pi_s, r_e, phi_e),
        pi_strength=pi_s,
        width=ensemble.n_eff * gs + ensemble.gamma,
        lamb_shift=lamb_shift(dc, gs, ensemble.n_eff, cavity),
        r_e=r_e,
        phi_e=phi_e,
        prefactor=prefactor(dc, cavity),
    )


def detuning_state(theta, domega, cavity, ensemble):
    """Kinematics of a single probe point; ``domega`` in units of gamma."""
    dc = cavity_detuning(theta, cavity)
    gs = single_atom_width(dc, cavity, ensemble)
    width = ensemble.n_eff * gs + ensemble.gamma
    dls = lamb_shift(dc, gs, ensemble.n_eff, cavity)
    eps = 2.0 * (domega * ensemble.gamma + dls) / width
    return DetuningState(theta=theta, delta_c=dc, epsilon=eps, domega=domega)


def reflectivity_spectrum(domega, theta, cavity, ensemble):
    """Cavity reflectivity |R|^2 over a probe-detuning grid.

    Direct evaluation of the two-pathway interference form

        |R|^2 = |(1/r_E)(2 kR/k)|^2 *
                |1 + r_E e^{i phi_E} (N Gs / 2) / (dw + d_LS + i(N Gs + gamma)/2)|^2

    which agrees with ``prefactor * fano_lineshape`` to machine precision.

    Parameters
    ----------
    domega : array_like
        Probe detuning omega - omega0 in units of gamma, finite and strictly
        increasing.
    theta : float
        Grazing incidence angle, radians.
    """
    domega = np.asarray(domega, dtype=float)
    if domega.ndim != 1 or domega.size == 0:
        raise DomainError("domega must be a non-empty 1-d grid")
    if not np.all(np.isfinite(domega)):
        raise DomainError("domega grid must be finite")
    if domega.size > 1 and not np.all(np.diff(domega) > 0.0):
        raise DomainError("domega grid must be strictly increasing")

    dc = cavity_detuning(theta, cavity)
    gs = single_atom_width(dc, cavity, ensemble)
    n_gs = ensemble.n_eff * gs
    width = n_gs + ensemble.gamma
    dls = lamb_shift(dc, gs, ensemble.n_eff, cavity)
    r_e = relative_amplitude(dc, cavity)
    phi_e = relative_phase(dc, cavity)
    pref = prefactor(dc, cavity)

    x = domega * ensemble.gamma + dls
    pathway = r_e * np.exp(1j * phi_e) * (n_gs / 2.0) / (x + 0.5j * width)
    return pref * np.abs(1.0 + pathway) ** 2


def fano_lineshape(epsilon, q, prefactor):
    """Generalised Fano profile prefactor * |eps + q|^2 / (eps^2 + 1).

    For real q the minimum reaches zero at eps = -q; an imaginary part of q
    lifts the minimum by Im(q)^2 / (eps^2 + 1).
    """
    epsilon = np.asarray(epsilon, dtype=float)
    return prefactor * (np.abs(epsilon + q) ** 2) / (epsilon ** 2 + 1.0)

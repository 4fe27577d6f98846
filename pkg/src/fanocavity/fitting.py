"""Least-squares extraction of cavity and Fano parameters from scans.

Two fit families:

* bare cavity: ``|A(-e^{i phi} + 2 kR / (k + i Dc(theta)))|^2`` against a
  rocking curve, recovering (A, phi, theta_mode, kappa, kappa_r);
* Fano resonance: ``a * prefactor * |eps + q|^2 / (eps^2 + 1) + b`` against an
  energy scan, recovering (q, width, shift, a, b).

The minimizer is damped least squares (scipy trust-region reflective) with a
finite-difference Jacobian and an optional derivative-free restart on stall;
everything is deterministic for fixed inputs.

A single spectrum constrains Im(q) only through its square, so ``fit_fano``
returns the non-negative branch unless a cavity context supplies the sign.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import least_squares as _trf_least_squares
from scipy.optimize import minimize as _nm_minimize

from .core_model import (
    CavityParams,
    NuclearEnsemble,
    classify_regime,
    fano_profile,
)
from .errors import DomainError, FitError


@dataclass(frozen=True)
class OptimizerConfig:
    """Termination and strategy knobs for the damped least-squares engine."""

    max_iterations: int = 400
    x_tol: float = 1e-12
    f_tol: float = 1e-12
    g_tol: float = 1e-12
    guess_strategy: str = "auto"
    restart_on_stall: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be at least 1")
        for name in ("x_tol", "f_tol", "g_tol"):
            if getattr(self, name) <= 0.0:
                raise DomainError(f"{name} must be positive")


DEFAULT_CONFIG = OptimizerConfig()


@dataclass
class MinimizeResult:
    """Optimum plus diagnostics from ``least_squares_minimize``."""

    params: np.ndarray
    cost: float
    residual_rms: float
    n_iterations: int
    termination: str
    converged: bool
    message: str
    covariance: Optional[np.ndarray] = None


class _NonFiniteResidual(Exception):
    pass


class _GuardedModel:
    """Track the last finite evaluation so an aborted run can report it."""

    def __init__(self, model):
        self.model = model
        self.last_good = None

    def __call__(self, params):
        residual = np.asarray(self.model(params), dtype=float)
        if not np.all(np.isfinite(residual)):
            raise _NonFiniteResidual
        self.last_good = (np.array(params, dtype=float), residual)
        return residual


def least_squares_minimize(model, start, bounds=None, config=None, jac=None):
    """Minimise ``sum(model(p)**2)`` from ``start`` within optional bounds.

    ``model`` maps a parameter vector to a residual vector and must be finite
    at ``start``.  ``jac`` is an optional analytic Jacobian callable; without
    one a finite-difference Jacobian is used.  Returns a MinimizeResult whose
    ``termination`` is ``tolerance``, ``iteration_cap`` or
    ``aborted_nonfinite``.
    """
    config = config or DEFAULT_CONFIG
    start = np.asarray(start, dtype=float)
    guarded = _GuardedModel(model)
    try:
        guarded(start)
    except _NonFiniteResidual:
        raise DomainError("residual function is not finite at the start vector") from None

    if bounds is None:
        lower = np.full(start.shape, -np.inf)
        upper = np.full(start.shape, np.inf)
    else:
        lower, upper = (np.asarray(b, dtype=float) for b in bounds)
    start = np.clip(start, lower, upper)

    def run_trf(x0, budget):
        return _trf_least_squares(
            guarded,
            x0,
            jac=jac if jac is not None else "2-point",
            bounds=(lower, upper),
            method="trf",
            xtol=config.x_tol,
            ftol=config.f_tol,
            gtol=config.g_tol,
            max_nfev=budget,
        )

    budget = config.max_iterations * (start.size + 1)
    try:
        res = run_trf(start, budget)
        stalled = res.status == 0
        if stalled and config.restart_on_stall:
            # derivative-free polish, then one more damped pass
            nm = _nm_minimize(
                lambda p: 0.5 * float(np.sum(guarded(p) ** 2)),
                res.x,
                method="Nelder-Mead",
                bounds=list(zip(lower, upper)),
                options={"maxiter": 50 * start.size, "xatol": config.x_tol, "fatol": config.f_tol},
            )
            res = run_trf(np.clip(nm.x, lower, upper), budget)
            stalled = res.status == 0
    except _NonFiniteResidual:
        params, residual = guarded.last_good
        return MinimizeResult(
            params=params,
            cost=0.5 * float(np.sum(residual ** 2)),
            residual_rms=float(np.sqrt(np.mean(residual ** 2))),
            n_iterations=-1,
            termination="aborted_nonfinite",
            converged=False,
            message="non-finite residuals encountered; returning last good state",
        )

    residual = res.fun
    covariance = _covariance(res.jac, residual)
    return MinimizeResult(
        params=res.x,
        cost=float(res.cost),
        residual_rms=float(np.sqrt(np.mean(residual ** 2))),
        n_iterations=int(res.njev if res.njev is not None else res.nfev),
        termination="iteration_cap" if stalled else "tolerance",
        converged=not stalled,
        message=res.message,
        covariance=covariance,
    )


def _covariance(jac, residual):
    m, n = jac.shape
    if m <= n:
        return None
    try:
        jtj_inv = np.linalg.pinv(jac.T @ jac)
    except np.linalg.LinAlgError:
        return None
    dof_var = float(np.sum(residual ** 2)) / (m - n)
    return dof_var * jtj_inv


# --------------------------------------------------------------------------
# bare cavity (rocking curve)

_BARE_NAMES = ("a", "phi", "theta_mode", "kappa", "kappa_r")


def bare_cavity_intensity(theta_mrad, a, phi, theta_mode_mrad, kappa2, kappa_r2):
    """Rocking-curve model |A(-e^{i phi} + 2 kR/(k + i Dc))|^2.

    Angles in mrad; ``kappa2``/``kappa_r2`` in units of 1e-2 omega0 (the
    natural scale of the fitted rates).
    """
    theta_mrad = np.asarray(theta_mrad, dtype=float)
    k = kappa2 * 1e-2
    kr = kappa_r2 * 1e-2
    dc = np.sin(theta_mode_mrad * 1e-3) / np.sin(theta_mrad * 1e-3) - 1.0
    amplitude = a * (-np.exp(1j * phi) + 2.0 * kr / (k + 1j * dc))
    return np.abs(amplitude) ** 2


def _bare_partials(theta_mrad, a, phi, theta_mode_mrad, kappa2, kappa_r2):
    """Columns d(model)/d(A, phi, theta_mode, kappa, kappa_r)."""
    k = kappa2 * 1e-2
    kr = kappa_r2 * 1e-2
    dc = np.sin(theta_mode_mrad * 1e-3) / np.sin(theta_mrad * 1e-3) - 1.0
    denom = k + 1j * dc
    u = -np.exp(1j * phi) + 2.0 * kr / denom
    # m = A^2 |u|^2; d|u|^2/dp = 2 Re(conj(u) du/dp)
    ddc_dthm = 1e-3 * math.cos(theta_mode_mrad * 1e-3) / np.sin(theta_mrad * 1e-3)
    du_dphi = -1j * np.exp(1j * phi) * np.ones_like(dc)
    du_dthm = (-2j * kr / denom ** 2) * ddc_dthm
    du_dk = (-2.0 * kr / denom ** 2) * 1e-2
    du_dkr = (2.0 / denom) * 1e-2
    a2 = a * a
    return np.column_stack([
        2.0 * a * np.abs(u) ** 2,
        2.0 * a2 * np.real(np.conj(u) * du_dphi),
        2.0 * a2 * np.real(np.conj(u) * du_dthm),
        2.0 * a2 * np.real(np.conj(u) * du_dk),
        2.0 * a2 * np.real(np.conj(u) * du_dkr),
    ])


@dataclass
class BareCavityFit:
    """Recovered bare-cavity parameters (Table-style units).

    ``theta_mode`` in mrad, ``kappa``/``kappa_r`` in 1e-2 omega0.
    """

    a: float
    phi: float
    theta_mode: float
    kappa: float
    kappa_r: float
    residual_rms: float
    converged: bool
    regime: str
    termination: str
    n_iterations: int
    uncertainties: dict = field(default_factory=dict)

    def to_cavity_params(self, omega0_kev=14.4):
        return CavityParams(
            theta_mode=self.theta_mode * 1e-3,
            kappa=self.kappa * 1e-2,
            kappa_r=self.kappa_r * 1e-2,
            omega0=omega0_kev,
        )

    def to_dict(self):
        return {
            "a": self.a,
            "phi": self.phi,
            "theta_mode_mrad": self.theta_mode,
            "kappa_1e2omega0": self.kappa,
            "kappa_r_1e2omega0": self.kappa_r,
            "regime": self.regime,
            "residual_rms": self.residual_rms,
            "converged": self.converged,
            "termination": self.termination,
            "n_iterations": self.n_iterations,
            "uncertainties": self.uncertainties,
        }


def _dip_geometry(theta_grid, data):
    """Baseline, dip index and half-depth width of a rocking dip."""
    n = theta_grid.size
    edge = max(3, n // 10)
    baseline = float(np.median(np.concatenate([data[:edge], data[-edge:]])))
    imin = int(np.argmin(data))
    depth = baseline - float(data[imin])
    if depth <= 0.02 * baseline or imin in (0, n - 1):
        raise FitError(
            "no identifiable mode dip in the scan; widen the angle range "
            "or refine the grid"
        )
    half = baseline - 0.5 * depth

    def crossing(step):
        i = imin
        while 0 < i < n - 1 and data[i] < half:
            i += step
        if data[i] < half:
            raise FitError("mode dip is cut off by the scan edge; widen the scan")
        j = i - step
        # linear interpolation between the bracketing samples
        frac = (half - data[j]) / (data[i] - data[j])
        return theta_grid[j] + frac * (theta_grid[i] - theta_grid[j])

    theta_lo = crossing(-1)
    theta_hi = crossing(+1)
    return baseline, imin, depth, theta_lo, theta_hi


def initial_guess_bare(theta_grid, data, branch="over"):
    """Start vector [A, phi, theta_mode, kappa, kappa_r] from dip geometry.

    The dip depth fixes ``|1 - 2 kR / k|`` but not the regime, so ``branch``
    picks the overcritical (2 kR > k) or undercritical root.  Raises FitError
    when no dip is identifiable.
    """
    theta_grid = np.asarray(theta_grid, dtype=float)
    data = np.asarray(data, dtype=float)
    baseline, imin, depth, theta_lo, theta_hi = _dip_geometry(theta_grid, data)
    theta_mode = float(theta_grid[imin])

    # half-depth points sit at |Dc| = kappa under the model
    dc_lo = abs(math.sin(theta_mode * 1e-3) / math.sin(theta_lo * 1e-3) - 1.0)
    dc_hi = abs(math.sin(theta_mode * 1e-3) / math.sin(theta_hi * 1e-3) - 1.0)
    kappa2 = 0.5 * (dc_lo + dc_hi) / 1e-2

    ratio_root = math.sqrt(max(float(data[imin]) / baseline, 0.0))
    ratio = 1.0 + ratio_root if branch == "over" else 1.0 - ratio_root
    ratio = max(ratio, 1e-3)
    return np.array([math.sqrt(baseline), 0.0, theta_mode, kappa2, 0.5 * ratio * kappa2])


def fit_bare_cavity(theta_grid, data, config=None, window=None, branch="auto"):
    """Fit the rocking-curve model to (theta_mrad, |R|^2) data.

    The dip depth fixes |1 - 2 kR/k| only up to the coupling branch; with
    ``branch="auto"`` both starting branches are tried and the lower residual
    kept (an intensity-only curve can leave the branches nearly degenerate,
    see ``trajectory.OracleSetup`` for a physics-based tie-break).  ``window``
    (mrad) optionally restricts the fit to +/- window around the dip, for
    data whose wings leave the model's validity range.  A missing dip yields
    a flagged, non-converged result.
    """
    if branch not in ("auto", "over", "under"):
        raise DomainError(f"branch must be 'auto', 'over' or 'under', got {branch!r}")
    theta_grid = np.asarray(theta_grid, dtype=float)
    data = np.asarray(data, dtype=float)
    if theta_grid.ndim != 1 or theta_grid.shape != data.shape:
        raise DomainError("theta_grid and data must be matching 1-d arrays")
    if theta_grid.size < 50:
        raise DomainError("need at least 50 points across the mode dip")
    if not (np.all(np.isfinite(theta_grid)) and np.all(np.isfinite(data))):
        raise DomainError("scan data must be finite")
    if np.any(data < 0.0):
        raise DomainError("reflectivity data must be non-negative")
    config = config or DEFAULT_CONFIG

    if window is not None:
        imin = int(np.argmin(data))
        keep = np.abs(theta_grid - theta_grid[imin]) <= window
        if keep.sum() < 50:
            raise DomainError("fit window contains fewer than 50 points")
        theta_grid, data = theta_grid[keep], data[keep]

    lower = np.array([1e-6, -0.5 * math.pi, theta_grid[0], 1e-3, 1e-4])
    upper = np.array([1.2, 0.5 * math.pi, theta_grid[-1], 50.0, 50.0])

    def residual(params):
        return bare_cavity_intensity(theta_grid, *params) - data

    def jacobian(params):
        return _bare_partials(theta_grid, *params)

    best = None
    guess_error = None
    branches = ("over", "under") if branch == "auto" else (branch,)
    for candidate in branches:
        try:
            start = initial_guess_bare(theta_grid, data, branch=candidate)
        except FitError as exc:
            guess_error = exc
            continue
        result = least_squares_minimize(residual, start, (lower, upper), config, jacobian)
        if best is None or result.cost < best.cost:
            best = result

    if best is None:
        return BareCavityFit(
            a=math.nan, phi=math.nan, theta_mode=math.nan, kappa=math.nan,
            kappa_r=math.nan, residual_rms=math.nan, converged=False,
            regime="unknown", termination=f"no_dip: {guess_error}", n_iterations=0,
        )

    a, phi, theta_mode, kappa2, kappa_r2 = best.params
    sigmas = {}
    if best.covariance is not None:
        diag = np.sqrt(np.maximum(np.diag(best.covariance), 0.0))
        sigmas = dict(zip(_BARE_NAMES, diag.tolist()))
    cavity = CavityParams(theta_mode * 1e-3, kappa2 * 1e-2, kappa_r2 * 1e-2)
    return BareCavityFit(
        a=float(a), phi=float(phi), theta_mode=float(theta_mode),
        kappa=float(kappa2), kappa_r=float(kappa_r2),
        residual_rms=best.residual_rms, converged=best.converged,
        regime=classify_regime(cavity), termination=best.termination,
        n_iterations=best.n_iterations, uncertainties=sigmas,
    )


# --------------------------------------------------------------------------
# Fano resonance (energy scan)


@dataclass(frozen=True)
class CavityContext:
    """Cavity working point fixing r_E, phi_E and the Im(q) sign for a Fano fit."""

    cavity: CavityParams
    ensemble: NuclearEnsemble
    theta: float

    def profile(self):
        return fano_profile(self.theta, self.cavity, self.ensemble)


@dataclass
class FanoFit:
    """Recovered Fano parameters; ``width`` and ``shift`` in units of gamma.

    ``shift`` is the combined fitted energy shift (the scan-origin offset
    absorbing the collective Lamb shift); when a context is given the
    model's own prediction is reported alongside for comparison.
    """

    q: complex
    pi_strength: float
    width: float
    shift: float
    a: float
    b: float
    residual_rms: float
    converged: bool
    termination: str
    n_iterations: int
    uncertainties: dict = field(default_factory=dict)
    model_q: Optional[complex] = None
    model_lamb_shift_gamma: Optional[float] = None

    def to_dict(self):
        out = {
            "re_q": self.q.real,
            "im_q": self.q.imag,
            "pi_strength": self.pi_strength,
            "width_gamma": self.width,
            "shift_gamma": self.shift,
            "a": self.a,
            "b": self.b,
            "residual_rms": self.residual_rms,
            "converged": self.converged,
            "termination": self.termination,
            "n_iterations": self.n_iterations,
            "uncertainties": self.uncertainties,
        }
        if self.model_q is not None:
            out["model_re_q"] = self.model_q.real
            out["model_im_q"] = self.model_q.imag
            out["model_lamb_shift_gamma"] = self.model_lamb_shift_gamma
        return out


def fano_intensity(domega, re_q, im_q, width, shift, a, b, prefactor=1.0):
    """Fano lineshape a * prefactor * |eps + q|^2/(eps^2 + 1) + b.

    ``domega``, ``width`` and ``shift`` share one energy unit (gamma here).
    """
    domega = np.asarray(domega, dtype=float)
    eps = 2.0 * (domega + shift) / width
    lineshape = ((eps + re_q) ** 2 + im_q ** 2) / (eps ** 2 + 1.0)
    return a * prefactor * lineshape + b


def _fano_partials(domega, re_q, im_q, width, shift, a, prefactor):
    """Columns d(model)/d(re_q, im_q, width, shift, a)."""
    eps = 2.0 * (domega + shift) / width
    den = eps ** 2 + 1.0
    num = (eps + re_q) ** 2 + im_q ** 2
    d_re = a * prefactor * 2.0 * (eps + re_q) / den
    d_im = a * prefactor * 2.0 * im_q / den
    d_eps = a * prefactor * (2.0 * (eps + re_q) * den - num * 2.0 * eps) / den ** 2
    return np.column_stack([
        d_re,
        d_im,
        d_eps * (-eps / width),
        d_eps * (2.0 / width),
        prefactor * num / den,
    ])


def estimate_fano_geometry(domega, ynorm):
    """(feature center, half-extent width) of a normalised Fano scan.

    The width is the span where the deviation from the off-resonant level
    exceeds half its peak, which tracks the lineshape's eps = +-1 points.
    """
    edge = max(3, domega.size // 10)
    far = float(np.median(np.concatenate([ynorm[:edge], ynorm[-edge:]])))
    deviation = ynorm - far
    ipk = int(np.argmax(np.abs(deviation)))
    center = float(domega[ipk])
    peak = float(abs(deviation[ipk]))

    strong = np.abs(deviation) >= 0.5 * peak
    width = float(domega[strong][-1] - domega[strong][0])
    resolution = float(np.median(np.diff(domega)))
    width = min(max(width, 2.0 * resolution, 1.0), float(domega[-1] - domega[0]))
    return center, width


def _initial_guess_fano(domega, ynorm):
    """[re_q, im_q, width, shift, a, b] from normalised scan geometry."""
    edge = max(3, domega.size // 10)
    far = float(np.median(np.concatenate([ynorm[:edge], ynorm[-edge:]])))
    center, width = estimate_fano_geometry(domega, ynorm)

    level = float(np.interp(center, domega, ynorm))
    q_abs2 = max(level / far, 0.05)
    d_plus = float(np.interp(center + 0.5 * width, domega, ynorm)) / far - 1.0
    d_minus = float(np.interp(center - 0.5 * width, domega, ynorm)) / far - 1.0
    re_q = 0.5 * (d_plus - d_minus)
    im_q = math.sqrt(max(q_abs2 - re_q ** 2, 0.01))
    return np.array([re_q, im_q, width, -center, far, 0.0])


def fit_fano(domega, data, context=None, config=None, mode="q", background=0.0):
    """Fit the Fano model to an energy scan (detuning grid in units of gamma).

    The lineshape is a rational function with a quadratic numerator, so only
    three amplitude-like numbers are observable; a free complex q together
    with free (a, b) would leave one exact flat direction.  Two identifiable
    parametrisations are offered:

    * ``mode="q"``: both components of q free, background held at
      ``background`` (the A.2-style fitted offset stays in ``shift``);
    * ``mode="pi"``: q constrained to the cavity line i + Pi r_E e^{i phi_E}
      (context required), with the background ``b`` free.

    A single spectrum sees Im(q) only squared; with a context the sign is
    taken from the model prediction, otherwise the non-negative branch is
    returned.  The grid must span at least ten estimated linewidths on both
    sides of the feature.
    """
    domega = np.asarray(domega, dtype=float)
    data = np.asarray(data, dtype=float)
    if domega.ndim != 1 or domega.shape != data.shape or domega.size < 20:
        raise DomainError("domega and data must be matching 1-d arrays (>= 20 points)")
    if not (np.all(np.isfinite(domega)) and np.all(np.isfinite(data))):
        raise DomainError("scan data must be finite")
    if np.any(data < 0.0):
        raise DomainError("reflectivity data must be non-negative")
    if mode not in ("q", "pi"):
        raise DomainError(f"mode must be 'q' or 'pi', got {mode!r}")
    if mode == "pi" and context is None:
        raise DomainError("mode='pi' requires a cavity context")
    config = config or DEFAULT_CONFIG

    scale = float(np.median(np.concatenate([data[: max(3, data.size // 20)],
                                            data[-max(3, data.size // 20):]])))
    if scale <= 0.0:
        raise DomainError("off-resonant level must be positive")
    ynorm = data / scale

    guess = _initial_guess_fano(domega, ynorm)
    center = -guess[3]
    w0 = guess[2]
    if (center - domega[0]) < 10.0 * w0 or (domega[-1] - center) < 10.0 * w0:
        raise DomainError(
            "grid must span at least 10 linewidths on both sides of the "
            f"resonance (estimated width {w0:.3g} gamma)"
        )

    profile = context.profile() if context is not None else None
    pref = profile.prefactor if profile is not None else 1.0
    span = float(domega[-1] - domega[0])
    resolution = float(np.median(np.diff(domega)))

    if mode == "q":
        b_norm = background / scale

        def residual(p):
            return fano_intensity(domega, p[0], p[1], p[2], p[3], p[4], b_norm, pref) - ynorm

        def jacobian(p):
            return _fano_partials(domega, p[0], p[1], p[2], p[3], p[4], pref)

        start = guess[:5]
        lower = np.array([-1e3, 0.0, 1.0, -span, 1e-12])
        upper = np.array([1e3, 1e3, 1e6, span, np.inf])
        result = least_squares_minimize(residual, start, (lower, upper), config, jacobian)
        re_q, im_q, width, shift, a_norm = result.params
        names = ("re_q", "im_q", "width", "shift", "a")
    else:
        rpe = profile.r_e * complex(math.cos(profile.phi_e), math.sin(profile.phi_e))

        def q_of(pi_s):
            return 1j + pi_s * rpe

        def residual(p):
            q = q_of(p[0])
            return fano_intensity(domega, q.real, q.imag, p[1], p[2], p[3], p[4], pref) - ynorm

        def jacobian(p):
            q = q_of(p[0])
            cols = _fano_partials(domega, q.real, q.imag, p[1], p[2], p[3], pref)
            d_pi = cols[:, 0] * rpe.real + cols[:, 1] * rpe.imag
            ones = np.ones_like(domega)
            return np.column_stack([d_pi, cols[:, 2], cols[:, 3], cols[:, 4], ones])

        pi0 = math.hypot(guess[0], guess[1] - 1.0) / max(profile.r_e, 1e-9)
        start = np.array([min(max(pi0, 1e-3), 0.999), guess[2], guess[3], guess[4], 0.0])
        lower = np.array([0.0, 1.0, -span, 1e-12, 0.0])
        upper = np.array([1.0, 1e6, span, np.inf, np.inf])
        result = least_squares_minimize(residual, start, (lower, upper), config, jacobian)
        q_full = q_of(result.params[0])
        re_q, im_q = q_full.real, q_full.imag
        width, shift, a_norm = result.params[1:4]
        b_norm = result.params[4]
        names = ("pi_strength", "width", "shift", "a", "b")

    if width < resolution:
        raise FitError(
            f"fitted width {width:.3g} gamma collapsed below the grid "
            f"resolution {resolution:.3g} gamma"
        )

    if mode == "q" and profile is not None and profile.q.imag < 0.0:
        im_q = -im_q

    sigmas = {}
    if result.covariance is not None:
        diag = np.sqrt(np.maximum(np.diag(result.covariance), 0.0))
        sigmas = dict(zip(names, diag.tolist()))
        for key in ("a", "b"):
            if key in sigmas:
                sigmas[key] *= scale

    return FanoFit(
        q=complex(re_q, im_q),
        pi_strength=1.0 - 1.0 / width,
        width=float(width),
        shift=float(shift),
        a=float(a_norm * scale),
        b=float(b_norm * scale),
        residual_rms=result.residual_rms,
        converged=result.converged,
        termination=result.termination,
        n_iterations=result.n_iterations,
        uncertainties=sigmas,
        model_q=profile.q if profile is not None else None,
        model_lamb_shift_gamma=(
            profile.lamb_shift / context.ensemble.gamma if profile is not None else None
        ),
    )

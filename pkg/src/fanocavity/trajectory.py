"""Sweeps of the complex asymmetry parameter and trajectory geometry.

Two control knobs move q through the complex plane: the nuclear abundance
(straight lines through q = i, slope set by the two-pathway phase) and the
angle offset (arc-shaped loci bending back towards q = i as the collective
strength dies off).  Sweeps come either from the closed-form model or from
the transfer-matrix oracle followed by a Fano fit per point.
"""

import math
from dataclasses import dataclass

import numpy as np

from .core_model import (
    CRITICAL,
    CavityParams,
    NuclearEnsemble,
    cavity_detuning,
    classify_regime,
    fano_profile,
    relative_phase,
)
from .errors import (
    DegenerateGeometryError,
    DomainError,
    FanoCavityError,
    FitError,
)
from .fitting import CavityContext, estimate_fano_geometry, fit_bare_cavity, fit_fano
from .layersim import energy_scan, rocking_scan

#: A trajectory counts as a straight line when the perpendicular RMS of its
#: total-least-squares fit is below this fraction of the trajectory extent.
COLLINEARITY_RTOL = 1e-3

#: Fitted-cavity validity window around the mode angle (radians).
ANGLE_WINDOW = 0.15e-3

MODEL = "model"
ORACLE = "oracle"


@dataclass(frozen=True)
class SweepSpec:
    """What to sweep, what stays fixed, and where q points come from."""

    mode: str                # "abundance-sweep" | "angle-sweep" | "grid"
    fixed: float
    grid: tuple
    source: str = MODEL

    def __post_init__(self):
        if self.mode not in ("abundance-sweep", "angle-sweep", "grid"):
            raise DomainError(f"unknown sweep mode {self.mode!r}")
        if self.source not in (MODEL, ORACLE):
            raise DomainError(f"unknown source {self.source!r}")
        grid = np.asarray(self.grid, dtype=float)
        if grid.size < 1 or (grid.size > 1 and not (
                np.all(np.diff(grid) > 0) or np.all(np.diff(grid) < 0))):
            raise DomainError("sweep grid must be non-empty and strictly monotone")


@dataclass(frozen=True)
class QPoint:
    control: float
    q: complex
    pi_strength: float
    ok: bool = True
    note: str = ""


@dataclass
class QTrajectory:
    """Sweep result: one q per control value, failures flagged in place."""

    mode: str
    source: str
    fixed: float
    points: list

    def ok_points(self):
        return [p for p in self.points if p.ok]

    def q_values(self):
        return np.array([p.q for p in self.ok_points()], dtype=complex)

    def ok_fraction(self):
        return sum(p.ok for p in self.points) / len(self.points) if self.points else 0.0

    def to_rows(self):
        return [
            {
                "control": p.control,
                "re_q": p.q.real if p.ok else math.nan,
                "im_q": p.q.imag if p.ok else math.nan,
                "pi": p.pi_strength if p.ok else math.nan,
                "source": self.source,
                "ok": p.ok,
            }
            for p in self.points
        ]


@dataclass(frozen=True)
class LineFit:
    """Total-least-squares line: anchor point, direction angle, residual."""

    anchor: complex
    direction: float     # radians, normalised to (-pi/2, pi/2]
    rms: float


@dataclass(frozen=True)
class ArcFit:
    """Algebraic circle fit: center, radius, radial scatter, distortion index."""

    center: complex
    radius: float
    rms: float
    distortion: float


@dataclass
class OracleSetup:
    """Transfer-matrix pipeline state: stack, fitted cavity, calibrated ensemble.

    Built once per stack via :meth:`from_stack`: a coarse rocking scan finds
    the first mode, a fine scan around it is fitted for the cavity rates, and
    one on-mode energy scan calibrates the effective nuclear number against
    the fitted superradiant width.

    Energy scans are span-adaptive: a coarse pilot scan estimates the
    linewidth, then the measurement grid covers about eleven linewidths per
    side so narrow 10%-abundance lines and broad on-mode lines are both
    resolved on their own scale.
    """

    stack: object
    bare_fit: object
    cavity: CavityParams
    ensemble: NuclearEnsemble
    pilot_span: float = 1600.0
    energy_points: int = 4001

    @classmethod
    def from_stack(cls, stack, ensemble=None, pilot_span=1600.0, energy_points=4001,
                   fine_points=4001, window=ANGLE_WINDOW, calibration_offset=42e-6,
                   backend=None):
        ensemble = ensemble or NuclearEnsemble()
        if stack.resonant_index is None:
            raise DomainError("oracle sweeps need a nuclear-resonant layer")
        theta_c, r2_c = rocking_scan(stack, backend=backend)
        theta_dip = theta_c[int(np.argmin(r2_c))]
        fine = np.linspace(theta_dip - window, theta_dip + window, fine_points)
        theta_f, r2_f = rocking_scan(stack, fine, backend=backend)

        scans = _AdaptiveScans(stack, pilot_span, energy_points)
        bare = _resolve_coupling_branch(theta_f, r2_f, scans, backend)
        cavity = bare.to_cavity_params()

        # calibrate n_ref so the model's superradiant width matches the
        # oracle's fitted width; done at the standard probe offset from the
        # mode so abundance sweeps there are compared on equal footing
        ab_cal = stack.layers[stack.resonant_index].nuclear.abundance
        if ab_cal <= 0.0:
            raise DomainError("calibration needs a positive stack abundance")
        theta_cal = cavity.theta_mode + calibration_offset
        cal = scans.fano_fit(theta_cal, ab_cal, backend=backend)
        dc = cavity_detuning(theta_cal, cavity)
        gs_cal = 2.0 * ensemble.g ** 2 / (cavity.kappa + dc ** 2 / cavity.kappa)
        n_ref = (cal.width - 1.0) * ensemble.gamma / (gs_cal * ab_cal)
        calibrated = NuclearEnsemble(ensemble.gamma, ensemble.g, n_ref, 1.0)
        return cls(stack=stack, bare_fit=bare, cavity=cavity, ensemble=calibrated,
                   pilot_span=pilot_span, energy_points=energy_points)

    def q_at(self, theta, abundance, backend=None):
        """Extract (q, Pi) from one oracle energy scan via a Fano fit."""
        scans = _AdaptiveScans(self.stack, self.pilot_span, self.energy_points)
        context = CavityContext(self.cavity, self.ensemble.with_abundance(abundance), theta)
        fit = scans.fano_fit(theta, abundance, context=context, backend=backend)
        if not fit.converged:
            raise FitError(f"fano fit did not converge: {fit.termination}")
        return fit.q, fit.pi_strength


class _AdaptiveScans:
    """Width-adaptive oracle energy scans feeding Fano fits."""

    def __init__(self, stack, pilot_span, points):
        self.stack = stack
        self.pilot_span = pilot_span
        self.points = points

    def width_estimate(self, theta, abundance, backend=None):
        grid = np.linspace(-self.pilot_span, self.pilot_span, 1201)
        x, y = energy_scan(self.stack, theta, grid, abundance=abundance, backend=backend)
        level = float(np.median(np.concatenate([y[:120], y[-120:]])))
        if level <= 0.0:
            raise FitError("pilot scan has a non-positive off-resonant level")
        return estimate_fano_geometry(x, y / level)

    def fano_fit(self, theta, abundance, context=None, backend=None):
        center, w_est = self.width_estimate(theta, abundance, backend=backend)
        span = max(22.0 * w_est, 40.0)
        grid = center + np.linspace(-span, span, self.points)
        x, y = energy_scan(self.stack, theta, grid, abundance=abundance, backend=backend)
        return fit_fano(x, y, context=context)


def _resolve_coupling_branch(theta_fine, r2_fine, scans, backend):
    """Bare-cavity fit with a nuclear tie-break between coupling branches.

    An intensity-only rocking curve fixes |1 - 2 kR/k| but barely separates
    the two kR roots once the transfer-matrix background deviates from the
    ideal lineshape.  The nuclear line settles it: q(abundance) runs along a
    straight line through i whose full direction angle equals phi_E, so two
    energy scans pin the Im(q) signs (demanding an abundance-independent
    r_E = |q - i| / Pi) and the branch whose predicted phi_E points the same
    way wins.
    """
    fits = {}
    for branch in ("over", "under"):
        fit = fit_bare_cavity(theta_fine * 1e3, r2_fine, branch=branch)
        if fit.converged:
            fits[fit.regime] = fit
    if not fits:
        raise FitError("bare-cavity fit did not converge on either coupling branch")
    if len(fits) == 1:
        return next(iter(fits.values()))

    theta_probe = fits["overcritical"].theta_mode * 1e-3 + 30e-6
    measured = []
    for abundance in (1.0, 0.35):
        fit = scans.fano_fit(theta_probe, abundance, backend=backend)
        measured.append((fit.q, fit.pi_strength))

    best_combo, best_spread = None, math.inf
    for s1 in (1.0, -1.0):
        for s2 in (1.0, -1.0):
            r_es = [
                abs(complex(q.real, s * q.imag) - 1j) / pi_s
                for (q, pi_s), s in zip(measured, (s1, s2))
            ]
            spread = abs(r_es[0] - r_es[1]) / (r_es[0] + r_es[1])
            if spread < best_spread:
                best_combo, best_spread = (s1, s2), spread
    q_signed = complex(measured[0][0].real, best_combo[0] * measured[0][0].imag)
    direction = math.atan2(q_signed.imag - 1.0, q_signed.real)

    def full_angle_distance(a, b):
        return abs(math.remainder(a - b, 2.0 * math.pi))

    def mismatch(fit):
        cavity = fit.to_cavity_params()
        dc = cavity_detuning(theta_probe, cavity)
        return full_angle_distance(direction, relative_phase(dc, cavity))

    return min(fits.values(), key=mismatch)


def _check_theta_window(theta, cavity):
    if abs(theta - cavity.theta_mode) > ANGLE_WINDOW:
        raise DomainError(
            f"theta {theta*1e3:.4f} mrad is outside the fitted cavity's "
            f"validity window ({ANGLE_WINDOW*1e3:.2f} mrad around the mode)"
        )


def _model_point(theta, abundance, cavity, ensemble):
    profile = fano_profile(theta, cavity, ensemble.with_abundance(abundance))
    return profile.q, profile.pi_strength


def _sweep(mode, source, fixed, controls, evaluate):
    points = []
    for control in controls:
        try:
            q, pi_s = evaluate(control)
            points.append(QPoint(float(control), q, pi_s))
        except FanoCavityError as exc:
            points.append(QPoint(float(control), complex("nan"), math.nan,
                                 ok=False, note=str(exc)))
    return QTrajectory(mode=mode, source=source, fixed=fixed, points=points)


def sweep_abundance(theta, abundances, cavity=None, ensemble=None,
                    source=MODEL, oracle=None, backend=None):
    """q trajectory versus nuclear abundance at a fixed grazing angle."""
    spec = SweepSpec("abundance-sweep", float(theta), tuple(abundances), source)
    if source == ORACLE:
        if oracle is None:
            raise DomainError("oracle-sourced sweeps need an OracleSetup")
        _check_theta_window(theta, oracle.cavity)
        return _sweep(spec.mode, source, spec.fixed, abundances,
                      lambda ab: oracle.q_at(theta, ab, backend=backend))
    if cavity is None:
        raise DomainError("model-sourced sweeps need CavityParams")
    ensemble = ensemble or NuclearEnsemble()
    return _sweep(spec.mode, source, spec.fixed, abundances,
                  lambda ab: _model_point(theta, ab, cavity, ensemble))


def sweep_angle(abundance, thetas, cavity=None, ensemble=None,
                source=MODEL, oracle=None, backend=None):
    """q trajectory versus grazing angle at fixed nuclear abundance."""
    spec = SweepSpec("angle-sweep", float(abundance), tuple(thetas), source)
    ref_cavity = oracle.cavity if oracle is not None else cavity
    if ref_cavity is not None and classify_regime(ref_cavity) == CRITICAL:
        if any(t == ref_cavity.theta_mode for t in thetas):
            raise DomainError("angle grid crosses the critical-coupling pole")
    if source == ORACLE:
        if oracle is None:
            raise DomainError("oracle-sourced sweeps need an OracleSetup")
        for theta in thetas:
            _check_theta_window(theta, oracle.cavity)
        return _sweep(spec.mode, source, spec.fixed, thetas,
                      lambda th: oracle.q_at(th, abundance, backend=backend))
    if cavity is None:
        raise DomainError("model-sourced sweeps need CavityParams")
    ensemble = ensemble or NuclearEnsemble()
    return _sweep(spec.mode, source, spec.fixed, thetas,
                  lambda th: _model_point(th, abundance, cavity, ensemble))


def fit_line(points):
    """Total-least-squares line through complex-plane points.

    Direction is reported modulo pi in (-pi/2, pi/2]; ``rms`` is the root
    mean square perpendicular distance.
    """
    pts = np.asarray(points, dtype=complex).ravel()
    if pts.size < 3:
        raise DomainError("line fit needs at least 3 points")
    xy = np.column_stack([pts.real, pts.imag])
    centroid = xy.mean(axis=0)
    centered = xy - centroid
    scatter = centered.T @ centered
    eigvals, eigvecs = np.linalg.eigh(scatter)
    if eigvals[-1] <= 0.0 or not np.isfinite(eigvals).all():
        raise DegenerateGeometryError("all points coincide; no line direction")
    direction = math.atan2(eigvecs[1, -1], eigvecs[0, -1])
    if direction <= -math.pi / 2:
        direction += math.pi
    elif direction > math.pi / 2:
        direction -= math.pi
    # residuals from explicit normal projections; the small eigenvalue would
    # bury them under eps * lambda_max rounding
    normal = np.array([-math.sin(direction), math.cos(direction)])
    distances = centered @ normal
    rms = float(np.sqrt(np.mean(distances ** 2)))
    return LineFit(anchor=complex(centroid[0], centroid[1]), direction=direction, rms=rms)


def fit_arc(points):
    """Algebraic (Kasa) circle fit minimising sum(|p - c|^2 - r^2)^2.

    Collinear input is rejected and belongs to :func:`fit_line`.  The
    distortion index is the largest radial deviation over the radius.
    """
    pts = np.asarray(points, dtype=complex).ravel()
    if pts.size < 4:
        raise DomainError("arc fit needs at least 4 points")
    extent = float(np.max(np.abs(pts[:, None] - pts[None, :])))
    line = fit_line(pts)
    if line.rms < COLLINEARITY_RTOL * extent:
        raise DegenerateGeometryError(
            "points are collinear at the line/arc threshold; fit_line applies"
        )
    x, y = pts.real, pts.imag
    design = np.column_stack([2.0 * x, 2.0 * y, np.ones_like(x)])
    rhs = x ** 2 + y ** 2
    (cx, cy, t), *_ = np.linalg.lstsq(design, rhs, rcond=None)
    radius = math.sqrt(max(t + cx ** 2 + cy ** 2, 0.0))
    if radius <= 0.0:
        raise DegenerateGeometryError("circle fit collapsed to zero radius")
    radial = np.abs(pts - complex(cx, cy)) - radius
    return ArcFit(
        center=complex(cx, cy),
        radius=radius,
        rms=float(np.sqrt(np.mean(radial ** 2))),
        distortion=float(np.max(np.abs(radial)) / radius),
    )


def angle_distance_mod_pi(a, b):
    """Distance between two direction angles identified modulo pi."""
    d = (a - b) % math.pi
    return min(d, math.pi - d)


@dataclass(frozen=True)
class SurfaceCell:
    theta: float
    abundance: float
    q: complex
    pi_strength: float
    ok: bool = True
    note: str = ""


def q_surface(thetas, abundances, cavity=None, ensemble=None,
              source=MODEL, oracle=None, backend=None):
    """Full factorial (theta x abundance) evaluation of q and Pi.

    Returns a list of SurfaceCell in row-major order (theta outer); failed
    cells are flagged, never dropped.
    """
    cells = []
    for theta in thetas:
        for abundance in abundances:
            try:
                if source == ORACLE:
                    if oracle is None:
                        raise DomainError("oracle-sourced surfaces need an OracleSetup")
                    _check_theta_window(theta, oracle.cavity)
                    q, pi_s = oracle.q_at(theta, abundance, backend=backend)
                else:
                    if cavity is None:
                        raise DomainError("model-sourced surfaces need CavityParams")
                    q, pi_s = _model_point(theta, abundance, cavity,
                                           ensemble or NuclearEnsemble())
                cells.append(SurfaceCell(float(theta), float(abundance), q, pi_s))
            except FanoCavityError as exc:
                cells.append(SurfaceCell(float(theta), float(abundance),
                                         complex("nan"), math.nan, False, str(exc)))
    return cells

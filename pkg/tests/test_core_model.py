import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fanocavity import (
    CavityParams,
    DomainError,
    NuclearEnsemble,
    SingularityError,
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
from fanocavity.core_model import GAMMA_57FE, prefactor, wrap_angle

# frozen by direct high-precision evaluation of the detuning formula
# with theta_mode = 2.338 mrad, theta = 2.380 mrad
DETUNING_TABLE_POINT = -0.01764702638032860
# 2*kappa_r / |2*kappa_r - kappa| for kappa = 1.938e-2, kappa_r = 1.667e-2
R_E_OVER_ON_MODE = 2.3882521489971347
# same for the weak-coupling design (0.7391e-2, 0.2711e-2)
R_E_UNDER_ON_MODE = 2.7536820721178263

OVER = CavityParams(2.338e-3, 1.938e-2, 1.667e-2)
UNDER = CavityParams(2.320e-3, 0.7391e-2, 0.2711e-2)

# admissible random cavities: decade of kappa around the reference designs,
# coupling ratio away from the critical pole
cavities = st.builds(
    CavityParams,
    theta_mode=st.floats(2.0e-3, 2.6e-3),
    kappa=st.floats(3e-3, 3e-2),
    kappa_r=st.floats(3e-4, 3e-2),
).filter(lambda c: abs(2 * c.kappa_r - c.kappa) > 1e-6 * c.kappa)

ensembles = st.builds(
    NuclearEnsemble,
    gamma=st.just(GAMMA_57FE),
    g=st.floats(1e-9, 2e-8),
    n_ref=st.floats(1e2, 1e5),
    abundance=st.floats(0.0, 1.0),
)

offsets = st.floats(-60e-6, 60e-6)


class TestCavityDetuning:
    def test_zero_on_mode(self):
        assert cavity_detuning(OVER.theta_mode, OVER) == 0.0

    def test_table_point(self):
        dc = cavity_detuning(2.380e-3, OVER)
        assert dc == pytest.approx(DETUNING_TABLE_POINT, rel=1e-12)

    def test_sign_rule_below_mode(self):
        cav = CavityParams(2.320e-3, 1e-2, 1e-2)
        assert cavity_detuning(2.280e-3, cav) > 0.0
        assert cavity_detuning(2.360e-3, cav) < 0.0

    @pytest.mark.parametrize("theta", [0.0, -1e-3, math.nan, math.inf, 2.0])
    def test_domain_errors(self, theta):
        with pytest.raises(DomainError):
            cavity_detuning(theta, OVER)


class TestRegime:
    def test_table_overcritical(self):
        assert classify_regime(OVER) == "overcritical"

    def test_table_undercritical(self):
        assert classify_regime(UNDER) == "undercritical"

    def test_exact_critical(self):
        cav = CavityParams(2.3e-3, 2e-2, 1e-2)
        assert classify_regime(cav) == "critical"

    def test_tolerance_band(self):
        cav = CavityParams(2.3e-3, 2e-2, 1e-2 * (1 + 1e-12))
        assert classify_regime(cav) == "critical"
        assert classify_regime(cav, tol=1e-15) == "overcritical"

    def test_classification_is_total(self):
        for ratio in np.linspace(0.05, 1.95, 77):
            cav = CavityParams(2.3e-3, 1e-2, ratio * 0.5e-2)
            assert classify_regime(cav) in ("overcritical", "critical", "undercritical")


class TestSingleAtomWidth:
    ens = NuclearEnsemble()

    def test_on_mode_value(self):
        gs = single_atom_width(0.0, OVER, self.ens)
        assert gs == pytest.approx(2 * self.ens.g ** 2 / OVER.kappa, rel=1e-15)

    def test_half_at_dc_equal_kappa(self):
        gs0 = single_atom_width(0.0, OVER, self.ens)
        gs = single_atom_width(OVER.kappa, OVER, self.ens)
        assert gs == pytest.approx(0.5 * gs0, rel=1e-12)

    def test_decoupled_limit(self):
        ens = NuclearEnsemble(g=0.0)
        assert single_atom_width(0.01, OVER, ens) == 0.0

    @given(dc=st.floats(-0.2, 0.2), cav=cavities)
    def test_even_parity(self, dc, cav):
        ens = NuclearEnsemble()
        assert single_atom_width(dc, cav, ens) == single_atom_width(-dc, cav, ens)


class TestCollectiveStrength:
    def test_bare_cavity(self):
        ens = NuclearEnsemble(abundance=0.0)
        assert collective_strength(ens, 1e-12) == 0.0

    def test_balance_point(self):
        ens = NuclearEnsemble(n_ref=1.0, abundance=1.0)
        assert collective_strength(ens, ens.gamma) == pytest.approx(0.5, rel=1e-15)

    def test_99_percent(self):
        ens = NuclearEnsemble(n_ref=99.0, abundance=1.0)
        assert collective_strength(ens, ens.gamma) == pytest.approx(0.99, rel=1e-12)

    @given(ens=ensembles, scale=st.floats(0.1, 10.0))
    def test_monotone_in_gamma_s(self, ens, scale):
        if ens.n_eff == 0.0:
            return
        base = collective_strength(ens, 1e-14)
        more = collective_strength(ens, 1e-14 * (1 + scale))
        assert more >= base


class TestRelativeAmplitudeAndPhase:
    def test_table_value_on_mode(self):
        assert relative_amplitude(0.0, OVER) == pytest.approx(R_E_OVER_ON_MODE, rel=1e-12)
        assert relative_amplitude(0.0, UNDER) == pytest.approx(R_E_UNDER_ON_MODE, rel=1e-12)

    def test_asymptotic_limit(self):
        target = 2 * OVER.kappa_r / OVER.kappa
        assert relative_amplitude(50 * OVER.kappa, OVER) == pytest.approx(target, rel=1e-3)

    def test_unit_detuning_identity(self):
        cav = CavityParams(2.3e-3, 1e-2, 1e-2)
        assert relative_amplitude(0.0, cav) == pytest.approx(2.0, rel=1e-15)

    def test_pole_raises(self):
        critical = CavityParams(2.3e-3, 2e-2, 1e-2)
        with pytest.raises(SingularityError):
            relative_amplitude(0.0, critical)
        with pytest.raises(SingularityError):
            relative_phase(0.0, critical)
        # off the pole the critical cavity is fine
        assert relative_amplitude(1e-3, critical) > 0.0

    def test_phase_on_mode(self):
        assert relative_phase(0.0, OVER) == pytest.approx(-math.pi / 2, abs=1e-15)
        assert relative_phase(0.0, UNDER) == pytest.approx(math.pi / 2, abs=1e-15)

    def test_phase_arg_sum_case(self):
        # Dc = +kappa with 2 kappa_r - kappa = kappa: -pi/4 + pi/4 - pi/2
        cav = CavityParams(2.3e-3, 1e-2, 1e-2)
        assert relative_phase(1e-2, cav) == pytest.approx(-math.pi / 2, abs=1e-15)

    @given(dc=st.floats(-0.3, 0.3), cav=cavities)
    def test_amplitude_even_parity(self, dc, cav):
        assert relative_amplitude(dc, cav) == relative_amplitude(-dc, cav)

    @given(dc=st.floats(-0.3, 0.3), cav=cavities)
    def test_phase_in_principal_interval(self, dc, cav):
        phi = relative_phase(dc, cav)
        assert -math.pi < phi <= math.pi


class TestLambShift:
    ens = NuclearEnsemble()

    def test_zero_on_mode(self):
        assert lamb_shift(0.0, 1e-14, 1e4, OVER) == 0.0

    def test_value_at_dc_kappa(self):
        gs = 1e-14
        n = 1e4
        assert lamb_shift(OVER.kappa, gs, n, OVER) == pytest.approx(-n * gs / 2, rel=1e-15)

    @given(dc=st.floats(1e-6, 0.3), cav=cavities)
    def test_odd_parity(self, dc, cav):
        plus = lamb_shift(dc, 1e-14, 1e3, cav)
        minus = lamb_shift(-dc, 1e-14, 1e3, cav)
        assert plus == -minus
        assert plus <= 0.0  # negative for positive detuning


class TestComplexQ:
    def test_bare_cavity_point(self):
        assert complex_q(0.0, 5.0, 1.0) == 1j

    def test_table_point(self):
        q = complex_q(1.0, R_E_OVER_ON_MODE, -math.pi / 2)
        assert q == pytest.approx(complex(0.0, 1.0 - R_E_OVER_ON_MODE), abs=1e-12)

    def test_unit_case(self):
        assert complex_q(1.0, 1.0, 0.0) == pytest.approx(1.0 + 1.0j, abs=1e-15)

    def test_domain(self):
        with pytest.raises(DomainError):
            complex_q(1.5, 1.0, 0.0)
        with pytest.raises(DomainError):
            complex_q(0.5, -1.0, 0.0)

    @given(dc=st.floats(-0.2, 0.2), cav=cavities, pi_s=st.floats(0.0, 1.0))
    def test_offset_matches_factored_form(self, dc, cav, pi_s):
        off = q_offset(dc, cav, pi_s)
        expected = pi_s * relative_amplitude(dc, cav) * np.exp(1j * relative_phase(dc, cav))
        assert abs(off - expected) <= 1e-12 * max(1.0, abs(expected))

    def test_offset_pole_raises(self):
        critical = CavityParams(2.3e-3, 2e-2, 1e-2)
        with pytest.raises(SingularityError):
            q_offset(0.0, critical, 0.5)


class TestReflectivitySpectrum:
    ens = NuclearEnsemble()

    def test_bare_cavity_flat_at_prefactor(self):
        ens0 = NuclearEnsemble(abundance=0.0)
        grid = np.linspace(-100, 100, 201)
        r2 = reflectivity_spectrum(grid, OVER.theta_mode, OVER, ens0)
        level = (2 * OVER.kappa_r - OVER.kappa) ** 2 / OVER.kappa ** 2
        np.testing.assert_allclose(r2, level, rtol=1e-14)

    def test_far_detuned_limit(self):
        theta = OVER.theta_mode + 42e-6
        prof = fano_profile(theta, OVER, self.ens)
        far = np.array([-5e6, 5e6])
        r2 = reflectivity_spectrum(far, theta, OVER, self.ens)
        np.testing.assert_allclose(r2, prof.prefactor, rtol=1e-3)

    def test_grid_validation(self):
        with pytest.raises(DomainError):
            reflectivity_spectrum([1.0, 0.0], OVER.theta_mode, OVER, self.ens)
        with pytest.raises(DomainError):
            reflectivity_spectrum([np.nan], OVER.theta_mode, OVER, self.ens)
        with pytest.raises(DomainError):
            reflectivity_spectrum([], OVER.theta_mode, OVER, self.ens)


class TestFanoLineshape:
    def test_real_q_zero(self):
        assert fano_lineshape(-1.0, 1.0 + 0j, 0.7) == 0.0

    def test_q_equal_i_is_flat(self):
        eps = np.linspace(-30, 30, 101)
        np.testing.assert_allclose(fano_lineshape(eps, 1j, 0.37), 0.37, rtol=1e-15)

    def test_unit_arithmetic(self):
        assert fano_lineshape(0.0, 1 + 1j, 0.5) == pytest.approx(1.0, rel=1e-15)


@settings(max_examples=200, deadline=None)
@given(cav=cavities, ens=ensembles, off=offsets)
def test_fano_form_equivalence(cav, ens, off):
    """Direct interference form vs prefactor * |eps+q|^2 / (eps^2+1)."""
    theta = cav.theta_mode + off
    grid = np.linspace(-300.0, 300.0, 41)
    direct = reflectivity_spectrum(grid, theta, cav, ens)
    prof = fano_profile(theta, cav, ens)
    eps = 2 * (grid * ens.gamma + prof.lamb_shift) / prof.width
    fano = fano_lineshape(eps, prof.q, prof.prefactor)
    np.testing.assert_allclose(direct, fano, rtol=1e-12)


@settings(max_examples=200, deadline=None)
@given(cav=cavities, off=offsets)
def test_q_is_i_exactly_when_bare(cav, off):
    ens = NuclearEnsemble(abundance=0.0)
    prof = fano_profile(cav.theta_mode + off, cav, ens)
    assert prof.q == 1j
    assert prof.pi_strength == 0.0


@settings(max_examples=100, deadline=None)
@given(cav=cavities, off=offsets)
def test_abundance_collinearity_and_slope(cav, off):
    """q(abundance) lies on the line through i with direction phi_E."""
    from fanocavity.trajectory import angle_distance_mod_pi, fit_line

    theta = cav.theta_mode + off
    ens = NuclearEnsemble()
    qs = [fano_profile(theta, cav, ens.with_abundance(ab)).q
          for ab in (1.0, 0.7, 0.5, 0.3, 0.1)]
    line = fit_line(np.array(qs + [1j]))
    extent = max(abs(q - 1j) for q in qs)
    assert line.rms < 1e-10 * max(extent, 1e-30)
    if extent > 1e-9:  # direction is meaningless for a degenerate segment
        dc = cavity_detuning(theta, cav)
        assert angle_distance_mod_pi(line.direction, relative_phase(dc, cav)) < 1e-8


@settings(max_examples=100, deadline=None)
@given(cav=cavities, off=st.floats(1e-6, 60e-6))
def test_parity_of_amplitude_width_shift(cav, off):
    ens = NuclearEnsemble()
    plus = fano_profile(cav.theta_mode + off, cav, ens)
    # equal |Dc| on both sides requires symmetric detuning, not symmetric theta
    dc = cavity_detuning(cav.theta_mode + off, cav)
    gs_plus = single_atom_width(dc, cav, ens)
    gs_minus = single_atom_width(-dc, cav, ens)
    assert gs_plus == gs_minus
    assert relative_amplitude(dc, cav) == relative_amplitude(-dc, cav)
    assert lamb_shift(dc, gs_plus, ens.n_eff, cav) == -lamb_shift(-dc, gs_minus, ens.n_eff, cav)
    assert plus.width >= ens.gamma


@settings(max_examples=100, deadline=None)
@given(cav=cavities, off=offsets, ab=st.floats(0.0, 0.999))
def test_width_monotone_in_abundance(cav, off, ab):
    theta = cav.theta_mode + off
    ens = NuclearEnsemble()
    w_low = fano_profile(theta, cav, ens.with_abundance(ab)).width
    w_high = fano_profile(theta, cav, ens.with_abundance(min(ab + 1e-3, 1.0))).width
    assert w_high > w_low


@pytest.mark.parametrize("cav", [OVER, UNDER], ids=["overcritical", "undercritical"])
def test_sign_of_re_q_opposes_angle_offset(cav):
    ens = NuclearEnsemble()
    for off in (-50e-6, -18e-6, -2e-6, 14e-6, 46e-6):
        q = fano_profile(cav.theta_mode + off, cav, ens).q
        assert math.copysign(1.0, q.real) == -math.copysign(1.0, off)


def test_detuning_state_kinematics():
    ens = NuclearEnsemble()
    state = detuning_state(OVER.theta_mode, 0.0, OVER, ens)
    assert state.delta_c == 0.0
    # epsilon is affine in the probe energy with slope 2/(N Gs + gamma)
    theta = OVER.theta_mode + 30e-6
    s1 = detuning_state(theta, 10.0, OVER, ens)
    s2 = detuning_state(theta, 250.0, OVER, ens)
    prof = fano_profile(theta, OVER, ens)
    slope = (s2.epsilon - s1.epsilon) / ((s2.domega - s1.domega) * ens.gamma)
    assert slope == pytest.approx(2.0 / prof.width, rel=1e-12)
    assert slope > 0.0


def test_profile_q_identity():
    theta = OVER.theta_mode + 25e-6
    prof = fano_profile(theta, OVER, NuclearEnsemble())
    rebuilt = complex_q(prof.pi_strength, prof.r_e, prof.phi_e)
    assert prof.q == rebuilt
    assert prof.prefactor == pytest.approx(
        (2 * OVER.kappa_r / OVER.kappa / prof.r_e) ** 2, rel=1e-12)


def test_wrap_angle_interval():
    for raw in (-4 * math.pi, -math.pi, -0.5, 0.0, 0.5, math.pi, 7.5):
        w = wrap_angle(raw)
        assert -math.pi < w <= math.pi
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi


def test_prefactor_is_the_bare_level():
    dc = 0.013
    pref = prefactor(dc, OVER)
    r_e = relative_amplitude(dc, OVER)
    assert pref == pytest.approx((2 * OVER.kappa_r / OVER.kappa / r_e) ** 2, rel=1e-12)

import numpy as np
import pytest

from fanocavity import _kernels
from fanocavity.layersim import energy_scan, rocking_scan

needs_cython = pytest.mark.skipif(
    "cython" not in _kernels.available_backends(),
    reason="compiled kernel not built",
)


def test_python_backend_always_available():
    assert "python" in _kernels.available_backends()


def test_unknown_backend_rejected():
    with pytest.raises(RuntimeError, match="unknown backend"):
        _kernels.get_backend("fortran")


def test_env_override(monkeypatch):
    monkeypatch.setenv("FANO_CAVITY_BACKEND", "python")
    assert _kernels.default_backend() == "python"
    monkeypatch.setenv("FANO_CAVITY_BACKEND", "nope")
    with pytest.raises(RuntimeError, match="FANO_CAVITY_BACKEND"):
        _kernels.default_backend()


def test_parratt_shape_checks():
    kz = np.ones((5, 3), dtype=complex)
    with pytest.raises(ValueError):
        _kernels.parratt_amplitude(kz, np.zeros(2), backend="python")
    with pytest.raises(ValueError):
        _kernels.parratt_amplitude(np.ones((5, 1), dtype=complex), np.zeros(1),
                                   backend="python")


def test_identical_media_reflect_nothing():
    # vacuum over vacuum: every Fresnel coefficient vanishes
    kz = np.full((4, 2), 0.002 * 73.0, dtype=complex)
    r = _kernels.parratt_amplitude(kz, np.zeros(2), backend="python")
    np.testing.assert_array_equal(r, 0.0)


@needs_cython
class TestBackendAgreement:
    def test_recursion_agreement(self):
        rng = np.random.default_rng(7)
        kz = (rng.uniform(0.01, 0.2, (64, 6))
              + 1j * rng.uniform(0.0, 0.05, (64, 6))) * 73.0
        d = np.concatenate([[0.0], rng.uniform(0.3, 30.0, 4), [0.0]])
        a = _kernels.parratt_amplitude(kz, d, backend="cython")
        b = _kernels.parratt_amplitude(kz, d, backend="python")
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)

    def test_rocking_scan_agreement(self, pt_stack):
        grid = np.linspace(2.0e-3, 2.7e-3, 2001)
        _, a = rocking_scan(pt_stack, grid, backend="cython")
        _, b = rocking_scan(pt_stack, grid, backend="python")
        np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)

    def test_energy_scan_agreement(self, pt_stack):
        grid = np.linspace(-200.0, 200.0, 2001)
        _, a = energy_scan(pt_stack, 2.378e-3, grid, backend="cython")
        _, b = energy_scan(pt_stack, 2.378e-3, grid, backend="python")
        np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)

    def test_fused_one_and_two_dim_n_agree(self):
        rng = np.random.default_rng(11)
        n = 1.0 - rng.uniform(1e-6, 2e-5, 5) + 1j * rng.uniform(1e-9, 2e-6, 5)
        cos2 = np.cos(np.linspace(2.0e-3, 2.6e-3, 33)) ** 2
        d = np.array([0.0, 2.0, 20.0, 3.0, 0.0])
        a = _kernels.reflection_amplitude(n, cos2, 72.975, d, backend="cython")
        n2 = np.tile(n, (33, 1))
        b = _kernels.reflection_amplitude(n2, cos2, 72.975, d, backend="cython")
        np.testing.assert_allclose(a, b, rtol=1e-13)

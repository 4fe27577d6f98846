import json
from pathlib import Path

import pytest

from fanocavity import CavityParams
from fanocavity.layersim import load_stack
from fanocavity.trajectory import OracleSetup

DATA = Path(__file__).resolve().parent.parent / "src" / "fanocavity" / "data" / "stacks"

#: Fitted bare-cavity parameters of the two reference designs
#: (A, phi, theta_mode mrad, kappa and kappa_r in 1e-2 omega0).
TABLE1 = {
    "overcritical": (0.77, -0.02, 2.338, 1.938, 1.667),
    "undercritical": (0.94, 0.038, 2.320, 0.7391, 0.2711),
}


@pytest.fixture(scope="session")
def overcritical_cavity():
    _, _, theta, kappa, kappa_r = TABLE1["overcritical"]
    return CavityParams(theta * 1e-3, kappa * 1e-2, kappa_r * 1e-2)


@pytest.fixture(scope="session")
def undercritical_cavity():
    _, _, theta, kappa, kappa_r = TABLE1["undercritical"]
    return CavityParams(theta * 1e-3, kappa * 1e-2, kappa_r * 1e-2)


@pytest.fixture(scope="session")
def pt_stack():
    return load_stack(DATA / "pt_cavity.json")


@pytest.fixture(scope="session")
def pd_stack():
    return load_stack(DATA / "pd_cavity.json")


@pytest.fixture(scope="session")
def pt_oracle(pt_stack):
    return OracleSetup.from_stack(pt_stack, calibration_offset=42e-6)


@pytest.fixture(scope="session")
def pd_oracle(pd_stack):
    return OracleSetup.from_stack(pd_stack, calibration_offset=-40e-6)


@pytest.fixture()
def stack_file(tmp_path):
    """Write a minimal valid stack JSON and return its path."""

    def write(doc, name="stack.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return path

    return write

import json
from dataclasses import replace

import numpy as np
import pytest

from core.config_file import load_document
from core.gate import CnotConfig, calibrate_bac

# Reduced-field device: at B_z = 0.04 T the Zeeman scale drops to ~33 u and the
# level crossing to J ~ 16.4 u, so a 19 us gate integrates in seconds while the
# |symm> - |00> detuning (~0.17 u) still dwarfs the swap Rabi splitting (~5e-3 u).
# B_ac is left unset and calibrated once per session.
TOY_DOCUMENT = {
    "device": {"b_z": 0.04, "a2": 1.0, "delta_a1": 0.04, "j_max": 12.0, "profile": "linsin", "b_ac": None},
    "durations": {"ramp_j": 5.0, "ramp_a": 1.5, "swap": 6.0, "unramp_a": 1.5, "unramp_j": 5.0},
    "integrator": {"rel_tol": 1e-6, "abs_tol": 1e-9},
    "grid": {"tau_e_s": [1e-6, 1e-5], "tau_n_s": [1e-4, 1e-2]},
}


@pytest.fixture
def default_config():
    return CnotConfig()


@pytest.fixture
def toy_loaded():
    return load_document(TOY_DOCUMENT)


@pytest.fixture(scope="session")
def toy_calibration():
    return calibrate_bac(load_document(TOY_DOCUMENT).config)


@pytest.fixture
def toy_config(toy_loaded, toy_calibration):
    return replace(toy_loaded.config, b_ac=toy_calibration.b_ac)


@pytest.fixture
def toy_config_path(tmp_path):
    path = tmp_path / "toy.json"
    path.write_text(json.dumps(TOY_DOCUMENT))
    return str(path)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_density(rng, dim=16, rank=3):
    a = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def random_hermitian(rng, dim=16, scale=1.0):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h = 0.5 * (a + a.conj().T)
    return h * scale / np.max(np.abs(np.linalg.eigvalsh(h)))

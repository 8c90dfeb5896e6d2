import json

import numpy as np
import pytest

from qudit_memory.models.experiment import ExperimentConfig, SweepSpec, SweepVariable
from qudit_memory.physics.spin_system import EXPERIMENT_VIEW, build_hamiltonian
from qudit_memory.physics.states import StateVector


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def system():
    return build_hamiltonian()


@pytest.fixture
def pseudo_pure():
    """Pseudo-pure start |+1/2,-1/2> of the five-level experiment basis."""
    return StateVector.basis_state(EXPERIMENT_VIEW, (0.5, -0.5))


@pytest.fixture
def ideal_config():
    return ExperimentConfig(
        ideal_pulses=True,
        shots=16,
        theta_sweep=SweepSpec(variable=SweepVariable.THETA, start=-1.0, stop=1.0, points=21),
        storage_sweep=SweepSpec(variable=SweepVariable.STORAGE_TIME, start=0.0, stop=0.105, points=8),
    )


@pytest.fixture
def config_file(tmp_path):
    """Writes a config JSON with small sweeps and returns its path."""

    def write(**overrides):
        raw = {
            "ideal_pulses": True,
            "shots": 8,
            "theta_sweep": {"variable": "theta", "start": -1.0, "stop": 1.0, "points": 21},
            "storage_sweep": {"variable": "storage_time", "start": 0.0, "stop": 0.5, "points": 6},
            "fidelity": {"nutation_points": 64, "dd_points": 17, "shots": 2000},
        }
        raw.update(overrides)
        path = tmp_path / "config.json"
        path.write_text(json.dumps(raw))
        return path

    return write

import numpy as np
import pytest

from qudit_memory.core.errors import InvalidArgumentError, InvalidStateError
from qudit_memory.physics.spin_system import EXPERIMENT_VIEW, NUCLEAR_VIEW, PROTOCOL_VIEW
from qudit_memory.physics.states import (
    DensityMatrix,
    StateVector,
    fidelity,
    pseudo_pure_decomposition,
    thermal_state,
)


def test_fidelity_ignores_global_phase(rng):
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    a = StateVector(psi, NUCLEAR_VIEW)
    b = StateVector(np.exp(0.7j) * 3 * psi, NUCLEAR_VIEW)
    assert fidelity(a, b) == pytest.approx(1.0, abs=1e-12)


def test_fidelity_needs_same_view():
    with pytest.raises(InvalidArgumentError):
        fidelity(StateVector.basis_state(NUCLEAR_VIEW, (-0.5, -0.5)),
                 StateVector.basis_state(EXPERIMENT_VIEW, (-0.5, -0.5)))


def test_amplitude_shape_must_match_view():
    with pytest.raises(InvalidArgumentError):
        StateVector(np.ones(3), NUCLEAR_VIEW)


def test_embed_and_restrict():
    psi = StateVector(np.array([0.1, 0.2, 0.3, 0.4, 0.5]), EXPERIMENT_VIEW)
    wide = psi.embed(PROTOCOL_VIEW)
    assert wide.view == PROTOCOL_VIEW
    np.testing.assert_allclose(wide.amplitudes[5:], 0)
    np.testing.assert_allclose(wide.restrict(EXPERIMENT_VIEW).amplitudes, psi.amplitudes)


def test_density_of_ensemble_is_average():
    amps = np.array([[1, 0, 0, 0], [0, 1, 0, 0]], dtype=complex)
    rho = StateVector(amps, NUCLEAR_VIEW).density()
    np.testing.assert_allclose(rho.matrix, np.diag([0.5, 0.5, 0, 0]))
    rho.validate()


@pytest.mark.parametrize(
    "matrix",
    [
        np.diag([0.5, 0.6, 0.0, 0.0]),
        np.array([[0.5, 0.5j, 0, 0], [0.5j, 0.5, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]]),
        np.diag([1.2, -0.2, 0.0, 0.0]),
    ],
    ids=["trace", "hermitian", "negative"],
)
def test_validate_rejects_unphysical(matrix):
    with pytest.raises(InvalidStateError):
        DensityMatrix(matrix, NUCLEAR_VIEW).validate()


def test_thermal_state_is_pseudo_pure(system):
    rho = thermal_state(system, 6.0)
    rho.validate()
    c, w, k, residual = pseudo_pure_decomposition(rho)
    assert EXPERIMENT_VIEW.labels[k] == (0.5, -0.5)
    assert residual < 0.1 * abs(w)
    np.testing.assert_allclose(np.diag(rho.matrix).real.sum(), 1.0)


def test_thermal_state_needs_positive_temperature(system):
    with pytest.raises(InvalidArgumentError):
        thermal_state(system, 0.0)


def test_conjugate_by_unitary_preserves_trace(rng):
    q, _ = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    rho = DensityMatrix(np.diag([0.4, 0.3, 0.2, 0.1]), NUCLEAR_VIEW)
    out = rho.conjugate_by(q)
    out.validate()
    assert complex(out.trace()) == pytest.approx(1.0)

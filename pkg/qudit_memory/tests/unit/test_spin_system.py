import numpy as np
import pytest

from qudit_memory.core.errors import InvalidArgumentError, InvalidSequenceError
from qudit_memory.models.spin import MW, SpinParams
from qudit_memory.physics.spin_system import (
    EXPERIMENT_VIEW,
    NUCLEAR_VIEW,
    PROTOCOL_VIEW,
    build_hamiltonian,
    degenerate_groups,
    esr_transitions,
    nmr_lines,
    spin_operators,
    subspace_projection,
    transition_frequencies,
)

COMPUTED_MHZ = {"f1": 82.37, "f2": 85.57, "f3": 89.07}


def test_spin_half_operators():
    sx, sy, sz = spin_operators(0.5)
    np.testing.assert_allclose(sz, np.diag([0.5, -0.5]))
    np.testing.assert_allclose(sx @ sy - sy @ sx, 1j * sz, atol=1e-15)


def test_casimir_for_spin_five_halves():
    sx, sy, sz = spin_operators(2.5)
    np.testing.assert_allclose(sx @ sx + sy @ sy + sz @ sz, 35 / 4 * np.eye(6), atol=1e-12)


@pytest.mark.parametrize("s", [0.3, -0.5, float("nan")])
def test_spin_operators_reject_bad_spin(s):
    with pytest.raises(InvalidArgumentError):
        spin_operators(s)


def test_hamiltonian_is_hermitian_and_diagonalised(system):
    h = system.hamiltonian
    assert h.shape == (36, 36)
    assert np.max(np.abs(h - h.conj().T)) <= 1e-12 * np.max(np.abs(h))
    v = system.eigenvectors
    np.testing.assert_allclose(v.conj().T @ v, np.eye(36), atol=1e-10)
    residual = np.linalg.norm(h @ v - v * system.eigenvalues, axis=0)
    assert np.all(residual <= 1e-9 * np.linalg.norm(h))


def test_zeeman_only_eigenvalues():
    params = SpinParams(A_hf_MHz=0.0, D_MHz=0.0)
    system = build_hamiltonian(params)
    expected = sorted(
        params.gamma_S_MHz * ms * params.B_z + params.gamma_I * mi * params.B_z
        for ms, mi in system.basis.labels
    )
    np.testing.assert_allclose(system.eigenvalues, expected, atol=1e-9)


def test_nmr_lines_at_computed_values(system):
    lines = nmr_lines(system)
    freqs = [lines[name].frequency for name in ("f1", "f2", "f3")]
    np.testing.assert_allclose(freqs, [COMPUTED_MHZ[name] for name in ("f1", "f2", "f3")], atol=0.02)
    assert all(80.0 < f < 95.0 for f in freqs)
    assert freqs[0] < freqs[1] < freqs[2]
    # no quadrupole term: splittings come out near 3.2 and 3.5 MHz
    np.testing.assert_allclose(np.diff(freqs), [3.20, 3.50], atol=0.03)


def test_esr_line_in_x_band(system):
    frequency = system.frequency(MW.bra, MW.ket)
    assert 9500.0 < frequency < 9900.0
    esr = esr_transitions(system)
    assert any((t.bra, t.ket) == (MW.bra, MW.ket) for t in esr)
    assert all(t.kind == "MW" for t in esr)


def test_degenerate_nmr_without_shifts():
    params = SpinParams(A_hf_MHz=0.0, D_MHz=0.0)
    system = build_hamiltonian(params)
    lines = list(nmr_lines(system).values())
    np.testing.assert_allclose([t.frequency for t in lines], abs(params.gamma_I) * params.B_z, rtol=1e-10)
    assert degenerate_groups(lines) == [(0, 1, 2)]


def test_unknown_transition_filter(system):
    with pytest.raises(InvalidArgumentError):
        transition_frequencies(system, "optical")


def test_experiment_view_projection(system):
    projection = subspace_projection(system, EXPERIMENT_VIEW)
    assert len(set(projection.eigen_indices)) == 5
    assert system.label_of(projection.eigen_indices[4]) == (0.5, -0.5)
    assert np.all(projection.in_view_norms() >= 0.99)


def test_views_share_leading_indices():
    assert EXPERIMENT_VIEW.labels[:4] == NUCLEAR_VIEW.labels
    assert PROTOCOL_VIEW.labels[:5] == EXPERIMENT_VIEW.labels
    np.testing.assert_array_equal(NUCLEAR_VIEW.m_I, [-1.5, -0.5, 0.5, 1.5])
    with pytest.raises(InvalidSequenceError):
        NUCLEAR_VIEW.index((0.5, -0.5))

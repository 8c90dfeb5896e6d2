import math

import numpy as np
import pytest

from qudit_memory.models.experiment import ExperimentConfig
from qudit_memory.physics.decoherence import ElectronRelaxationModel, InhomogeneityModel, sigma_from_fidelity
from qudit_memory.physics.readout import storage_model
from qudit_memory.services.experiment_service import (
    Ensemble,
    ExperimentSimulator,
    coherence_transfer_signal,
    dd_signal,
    hahn_echo_signal,
    inversion_recovery_signal,
    nutation_signal,
    storage_point,
    theta_point,
)
from qudit_memory.utils.fitting import fit_dd_fidelity, fit_nutation_sigma

SEED = np.random.SeedSequence(99)


def _echoes(record):
    return record.I_half_x, record.I_half_y, record.I_threehalf_x, record.I_threehalf_y


def test_ideal_unperturbed_point(ideal_config):
    record = theta_point((ideal_config, 0.0, SEED))
    assert _echoes(record) == pytest.approx((0.75, 0.0, 0.25, 0.0), abs=1e-12)


def test_ideal_sweep_follows_exact_channel(ideal_config):
    thetas = ideal_config.theta_sweep.values()
    records = ExperimentSimulator(ideal_config, jobs=1, progress=False).sweep_theta()
    assert [r.sweep_var for r in records] == pytest.approx(thetas.tolist())
    half = np.array([r.half for r in records])
    threehalf = np.array([r.threehalf for r in records])
    np.testing.assert_allclose(half, 0.75 * np.exp(-1j * thetas), atol=1e-10)
    np.testing.assert_allclose(threehalf, 0.25 * np.exp(-3j * thetas), atol=1e-10)


def test_spurious_signals_do_not_reach_the_data(ideal_config):
    noisy = ideal_config.model_copy(update={"spurious": ideal_config.spurious.model_copy(
        update={"offset": (0.3, -0.1), "electron_echo": (0.2, 0.4)})})
    clean = theta_point((ideal_config, 0.4, SEED))
    dirty = theta_point((noisy, 0.4, SEED))
    assert _echoes(dirty) == pytest.approx(_echoes(clean), abs=1e-10)


def test_imperfect_pulses_reduce_echo():
    config = ExperimentConfig(shots=64)
    record = theta_point((config, 0.0, SEED))
    assert abs(record.half) < 0.75


def test_ensemble_shapes():
    ideal = Ensemble(InhomogeneityModel(), np.random.default_rng(0), 10)
    assert ideal.shots is None and ideal.scale is None
    assert ideal.initial_state().amplitudes.shape == (5,)
    assert ideal.initial_density().matrix.shape == (1, 5, 5)

    model = InhomogeneityModel(sigma_MW=0.1, sigma_RF=0.2, detuning_sigma_MHz=(0.001, 0.0, 0.0))
    noisy = Ensemble(model, np.random.default_rng(0), 10)
    assert noisy.initial_state().amplitudes.shape == (10, 5)
    assert noisy.initial_density().matrix.shape == (10, 5, 5)
    assert np.asarray(noisy.det.delta_f1).shape == (10,)


@pytest.mark.parametrize("storage_ms", [0.0, 0.05, 0.2, 1.0, 3.0])
def test_ideal_storage_point_matches_dephasing_model(ideal_config, storage_ms):
    record = storage_point((ideal_config, storage_ms, SEED))
    x = storage_ms / ideal_config.relaxation.T2n_ms
    assert record.I_half_x == pytest.approx(0.75 * math.exp(-x), abs=1e-10)
    assert record.I_threehalf_x == pytest.approx(0.25 * math.exp(-9 * x), abs=1e-10)
    uncorrupted, corrupted = storage_model(storage_ms, ideal_config.relaxation.T2n_ms)
    assert (3 * record.I_half_x - record.I_threehalf_x) / 2 == pytest.approx(uncorrupted, abs=1e-10)
    assert 2 * (record.I_half_x - 3 * record.I_threehalf_x) / 3 == pytest.approx(corrupted, abs=1e-10)


def test_storage_sweep_is_flat_early(ideal_config):
    records = ExperimentSimulator(ideal_config, jobs=1, progress=False).sweep_storage([0.0, 0.0525, 0.105])
    uncorrupted = [(3 * r.I_half_x - r.I_threehalf_x) / 2 for r in records]
    assert uncorrupted[0] == pytest.approx(1.0)
    assert 1 - uncorrupted[1] < 0.02
    assert 1 - uncorrupted[2] < 0.04


def test_nutation_signal_recovers_mw_spread():
    sigma = sigma_from_fidelity(0.995)
    angles = np.linspace(0.0, 7 * math.pi, 281)
    signal = nutation_signal(angles, sigma, 20000, np.random.default_rng(3))
    estimate = fit_nutation_sigma(angles, signal)
    assert estimate.sigma == pytest.approx(sigma, rel=0.02)
    assert 100 * estimate.fidelity == pytest.approx(99.5, abs=0.2)


def test_ideal_nutation_is_a_sine():
    angles = np.linspace(0.0, 4 * math.pi, 33)
    np.testing.assert_allclose(nutation_signal(angles, 0.0, 4, np.random.default_rng(0)), np.sin(angles), atol=1e-12)


@pytest.mark.parametrize("line", ["f1", "f2"])
def test_two_pulse_dd_recovers_rf_spread(line):
    sigma = sigma_from_fidelity(0.935)
    thetas = np.linspace(0.0, math.pi, 17)
    signal = dd_signal(thetas, 2, sigma, line, 40000, np.random.default_rng(4))
    estimate = fit_dd_fidelity(thetas, signal, 2)
    assert estimate.sigma == pytest.approx(sigma, rel=0.02)
    assert 100 * estimate.fidelity == pytest.approx(93.5, abs=0.2)


def test_four_pulse_dd_recovers_rf_fidelity():
    sigma = sigma_from_fidelity(0.935)
    thetas = np.linspace(0.0, math.pi, 17)
    signal = dd_signal(thetas, 4, sigma, "f2", 40000, np.random.default_rng(5))
    estimate = fit_dd_fidelity(thetas, signal, 4)
    assert estimate.sigma == pytest.approx(sigma, rel=0.02)
    assert 100 * estimate.fidelity == pytest.approx(93.5, abs=0.2)


def test_ideal_dd_keeps_full_contrast():
    thetas = np.linspace(0.0, math.pi, 9)
    signal = dd_signal(thetas, 4, 0.0, "f1", 2, np.random.default_rng(0))
    np.testing.assert_allclose(signal, 1.0, atol=1e-12)


def test_sweeps_are_reproducible():
    config = ExperimentConfig(shots=32, seed=11)
    thetas = [-0.5, 0.0, 0.5]
    first = ExperimentSimulator(config, jobs=1, progress=False).sweep_theta(thetas)
    second = ExperimentSimulator(config, jobs=1, progress=False).sweep_theta(thetas)
    parallel = ExperimentSimulator(config, jobs=2, progress=False).sweep_theta(thetas)
    assert [_echoes(r) for r in first] == [_echoes(r) for r in second]
    assert [_echoes(r) for r in first] == [_echoes(r) for r in parallel]


def test_seed_changes_imperfect_results():
    thetas = [0.3]
    a = ExperimentSimulator(ExperimentConfig(shots=32, seed=1), jobs=1, progress=False).sweep_theta(thetas)
    b = ExperimentSimulator(ExperimentConfig(shots=32, seed=2), jobs=1, progress=False).sweep_theta(thetas)
    assert _echoes(a[0]) != _echoes(b[0])


def test_frequency_table_names_driven_lines(ideal_config):
    rows = ExperimentSimulator(ideal_config, jobs=1, progress=False).frequency_table()
    named = {row["name"]: row for row in rows if row["name"]}
    assert set(named) == {"f1", "f2", "f3", "MW"}
    assert named["MW"]["kind"] == "MW"
    assert 9000 < named["MW"]["frequency_MHz"] < 10500
    for line in ("f1", "f2", "f3"):
        assert named[line]["kind"] == "RF"
        assert 50 < named[line]["frequency_MHz"] < 150
    assert len({named[line]["frequency_MHz"] for line in ("f1", "f2", "f3")}) == 3
    assert not any(row["degenerate"] for row in named.values())


def test_fidelity_data_layout(ideal_config):
    config = ideal_config.model_copy(
        update={"fidelity": ideal_config.fidelity.model_copy(update={"nutation_points": 32, "dd_points": 9, "shots": 64})}
    )
    data = ExperimentSimulator(config, jobs=1, progress=False).fidelity_data()
    assert set(data) == {"nutation", "dd_f1_n2", "dd_f1_n4", "dd_f2_n2", "dd_f2_n4"}
    assert data["nutation"]["signal"].shape == (32,)
    assert data["dd_f2_n4"]["theta"][-1] == pytest.approx(math.pi)


def test_inversion_recovery_follows_t1():
    model = ElectronRelaxationModel(T1e_ms=1.3, T2e_us=80.0)
    delays = np.linspace(0.0, 6.5, 11)
    np.testing.assert_allclose(inversion_recovery_signal(delays, model), 1 - 2 * np.exp(-delays / 1.3), atol=1e-12)


def test_hahn_echo_follows_t2():
    model = ElectronRelaxationModel(T1e_ms=1.3, T2e_us=80.0)
    echo_times = np.linspace(0.0, 400.0, 11)
    np.testing.assert_allclose(hahn_echo_signal(echo_times, model), np.exp(-echo_times / 80.0), atol=1e-12)


def test_coherence_transfer_decays_with_t2n():
    storage = np.linspace(0.0, 5.0, 11)
    np.testing.assert_allclose(coherence_transfer_signal(storage, 1.05), np.exp(-storage / 1.05), atol=1e-10)


def test_relaxation_data_grids_and_noise():
    relaxation = {"points": 12, "span": 4.0, "noise": 0.01}
    config = ExperimentConfig(relaxation=relaxation, seed=5)
    data = ExperimentSimulator(config, jobs=1, progress=False).relaxation_data()
    assert set(data) == {"T1e", "T2e", "T2n"}
    assert data["T2e"]["time"][-1] == pytest.approx(4.0 * 80.0)
    assert data["T1e"]["signal"].shape == (12,)
    again = ExperimentSimulator(config, jobs=1, progress=False).relaxation_data()
    np.testing.assert_array_equal(data["T2n"]["signal"], again["T2n"]["signal"])
    clean = ExperimentSimulator(ExperimentConfig(relaxation={**relaxation, "noise": 0.0}), progress=False)
    residual = data["T2e"]["signal"] - clean.relaxation_data()["T2e"]["signal"]
    assert 0.003 < np.std(residual) < 0.03

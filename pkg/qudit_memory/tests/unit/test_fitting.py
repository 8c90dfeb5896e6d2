import math

import numpy as np
import pytest

from qudit_memory.core.errors import FitError, InvalidArgumentError
from qudit_memory.models.records import frame_to_records
from qudit_memory.physics.decoherence import fidelity_from_sigma
from qudit_memory.utils.fitting import (
    SigmaEstimate,
    fit_dd_fidelity,
    fit_exponential,
    fit_nutation_sigma,
    fit_phase_calibration,
    fit_series,
    fit_vertical_scale,
    series_channels,
    synthesize_series,
)

TRUTH = (1.0, 0.9, 0.8, 0.7, 0.6, 0.5)
THETA = np.linspace(-1.0, 1.0, 81)


def test_series_channels_at_zero():
    channels = series_channels(np.array([0.0]), TRUTH)
    np.testing.assert_allclose(channels[:, 0], [0.75, 0.0, 0.25, 0.0])


def test_noiseless_series_fit_recovers_coefficients():
    fit = fit_series(synthesize_series(THETA, TRUTH), order=5, seed=7)
    assert fit.converged
    assert fit.kind == "series"
    assert fit.seed == 7
    for n in range(3):
        assert fit.params[f"A{n}"] == pytest.approx(TRUTH[n], abs=1e-4)
    for n in range(6):
        assert fit.params[f"A{n}"] == pytest.approx(TRUTH[n], abs=1e-2)
    assert fit.residual < 1e-6


def test_noisy_series_fit_covers_truth():
    rng = np.random.default_rng(2024)
    data = synthesize_series(THETA, TRUTH, noise_std=2e-3, rng=rng)
    fit = fit_series(data, order=5)
    assert fit.converged
    for n in (0, 1):
        name = f"A{n}"
        assert abs(fit.params[name] - TRUTH[n]) <= 4 * fit.sigmas[name]
    assert fit.ratios()["A1"] == pytest.approx(0.9, abs=0.05)


MEASURED_SERIES = (14.19, 14.15, 15.9, 16.0, 14.5, 17.0)


def test_measured_coefficients_are_covered_at_two_sigma():
    noise = 0.01 * MEASURED_SERIES[0] ** 2
    seeds = np.random.SeedSequence(314).spawn(100)
    inside = np.zeros(len(MEASURED_SERIES), dtype=int)
    for seed in seeds:
        data = synthesize_series(THETA, MEASURED_SERIES, noise_std=noise, rng=np.random.default_rng(seed))
        fit = fit_series(data, order=5)
        assert fit.converged
        for n, truth in enumerate(MEASURED_SERIES):
            name = f"A{n}"
            inside[n] += abs(fit.params[name] - truth) <= 2 * fit.sigmas[name]
    # nominal 2 sigma coverage is 95.4 %; allow binomial scatter over 100 trials
    assert inside.sum() >= 0.93 * inside.size * len(seeds)
    assert np.all(inside >= 88)


def test_series_fit_reports_positive_a0():
    negative = tuple(-a for a in TRUTH)
    fit = fit_series(synthesize_series(THETA, negative), order=5)
    assert fit.params["A0"] > 0
    assert fit.params["A1"] == pytest.approx(0.9, abs=1e-4)


def test_series_fit_accepts_records():
    records = frame_to_records(synthesize_series(THETA, TRUTH))
    fit = fit_series(records, order=2)
    assert fit.params["A0"] == pytest.approx(1.0, abs=1e-2)


def test_series_fit_needs_enough_points():
    with pytest.raises(FitError):
        fit_series(synthesize_series(np.linspace(-1, 1, 11), TRUTH), order=5)


def test_zero_angle_only_data_is_not_converged():
    fit = fit_series(synthesize_series(np.zeros(20), TRUTH), order=5)
    assert not fit.converged
    assert fit.sigmas is None


def test_series_fit_argument_checks():
    data = synthesize_series(THETA, TRUTH)
    with pytest.raises(InvalidArgumentError):
        fit_series(data, weights=(1.0, 1.0, 1.0))
    with pytest.raises(InvalidArgumentError):
        fit_series(data.drop(columns=["I_half_y"]))


def test_inversion_recovery_fit():
    rng = np.random.default_rng(5)
    t = np.linspace(0.05, 8.0, 24)
    y = 1.0 * (1 - 2 * np.exp(-t / 1.3)) + rng.normal(0, 0.005, t.size)
    fit = fit_exponential(t, y, kind="recovery")
    assert fit.converged
    assert fit.kind == "exponential_recovery"
    assert fit.params["T"] == pytest.approx(1.3, rel=0.03)
    assert fit.sigmas["T"] > 0


def test_echo_decay_fit():
    rng = np.random.default_rng(6)
    t = np.linspace(0.0, 400.0, 30)
    y = 0.9 * np.exp(-t / 80.0) + 0.02 + rng.normal(0, 0.005, t.size)
    fit = fit_exponential(t, y, kind="decay")
    assert fit.converged
    assert fit.params["T"] == pytest.approx(80.0, rel=0.03)
    assert fit.params["a"] == pytest.approx(0.9, abs=0.02)


def test_constant_data_cannot_fix_time_constant():
    fit = fit_exponential(np.linspace(0, 1, 10), np.full(10, 0.5))
    assert not fit.converged
    assert fit.sigmas is None


def test_exponential_fit_checks():
    with pytest.raises(FitError):
        fit_exponential([0, 1, 2], [1, 0.5, 0.2])
    with pytest.raises(InvalidArgumentError):
        fit_exponential(np.arange(5), np.ones(5), kind="stretched")


def _dd_curve(theta: np.ndarray, ratio: float, offset: float = 0.3) -> np.ndarray:
    return (1 + ratio) / 2 + (1 - ratio) / 2 * np.cos(2 * (theta - offset))


def test_dd_fit_inverts_contrast():
    theta = np.linspace(0, math.pi, 33)
    estimate = fit_dd_fidelity(theta, _dd_curve(theta, math.exp(-0.16)), n=4)
    assert estimate.sigma == pytest.approx(0.1, abs=1e-9)
    assert estimate.ratio == pytest.approx(math.exp(-0.16))
    assert estimate.fidelity == pytest.approx(fidelity_from_sigma(0.1))
    assert estimate.sigma_err < 1e-6
    assert estimate.method == "dd" and estimate.n == 4


def test_dd_fit_two_pulses():
    theta = np.linspace(0, math.pi, 17)
    sigma = 0.46574
    estimate = fit_dd_fidelity(theta, _dd_curve(theta, math.exp(-4 * sigma ** 2), offset=-0.2), n=2)
    assert estimate.fidelity == pytest.approx(0.935, abs=1e-4)


def test_dd_fit_checks():
    theta = np.linspace(0, math.pi, 17)
    with pytest.raises(InvalidArgumentError):
        fit_dd_fidelity(theta, _dd_curve(theta, 0.8), n=3)
    short = np.linspace(0, 1.0, 17)
    with pytest.raises(FitError):
        fit_dd_fidelity(short, _dd_curve(short, 0.8), n=2)


def test_nutation_fit():
    angles = np.linspace(0.05, 7 * math.pi, 281)
    sigma = 0.12294
    signal = 0.8 * np.sin(angles) * np.exp(-(sigma * angles / math.pi) ** 2)
    estimate = fit_nutation_sigma(angles, signal)
    assert estimate.sigma == pytest.approx(sigma, rel=1e-4)
    assert estimate.fidelity == pytest.approx(0.995, abs=1e-5)


def test_flat_nutation_curve_fails():
    angles = np.linspace(0.05, 7 * math.pi, 50)
    with pytest.raises(FitError):
        fit_nutation_sigma(angles, np.zeros(50))


def test_confidence_interval_is_capped():
    estimate = SigmaEstimate(method="dd", sigma=0.01, sigma_err=0.01, fidelity=0.99997, fidelity_err=0.001)
    low, high = estimate.confidence_interval()
    assert high == 1.0
    assert low == pytest.approx(0.99997 - 1.959964 * 0.001, abs=1e-6)
    assert estimate.to_payload()["fidelity_percent"] == pytest.approx(99.997)


def test_phase_calibration_scales_with_duration():
    cal = 0.004
    amplitudes = np.array([1.0, 1.0, 2.0, 2.0, 3.0])
    durations = np.array([10.0, 80.0, 10.0, 80.0, 40.0])
    fit = fit_phase_calibration(amplitudes, durations, cal * amplitudes * durations)
    assert fit.params["cal"] == pytest.approx(cal)
    assert fit.residual < 1e-12


def test_noisy_phase_calibration(rng):
    amplitudes = np.repeat([0.5, 1.0, 1.5, 2.0], 6)
    durations = np.tile([10.0, 20.0, 40.0, 80.0, 10.0, 80.0], 4)
    phases = 0.004 * amplitudes * durations + rng.normal(0, 0.01, amplitudes.size)
    fit = fit_phase_calibration(amplitudes, durations, phases)
    assert abs(fit.params["cal"] - 0.004) < 4 * fit.sigmas["cal"]
    with pytest.raises(FitError):
        fit_phase_calibration([1.0], [10.0], [0.04])


def test_vertical_scale():
    model = np.linspace(1.0, 0.2, 12)
    fit = fit_vertical_scale(0.9 * model, model)
    assert fit.params["scale"] == pytest.approx(0.9)
    assert fit.sigmas["scale"] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(FitError):
        fit_vertical_scale([1.0, 2.0], [0.0, 0.0])

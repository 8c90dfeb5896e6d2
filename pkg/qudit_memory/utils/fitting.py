"""Least-squares fits used by the analysis layer.

Nonlinear fits run scipy's Levenberg-Marquardt driver; 1σ uncertainties come from
the linearised covariance inv(J^T J) * RSS / (m - p) at the optimum.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import optimize, stats

from ..core.config import settings
from ..core.errors import FitError, InvalidArgumentError
from ..models.records import ECHO_COLUMNS, EchoRecord, FitResult, records_to_frame
from ..physics.decoherence import fidelity_from_sigma, series_factor

logger = logging.getLogger(__name__)

EchoData = Union[Sequence[EchoRecord], pd.DataFrame]

# singular values below this fraction of the largest mark a parameter as unidentifiable
RANK_RTOL = 1e-10


@dataclass
class SigmaEstimate:
    """B1 spread recovered from a nutation envelope or a DD phase sweep."""
    method: str
    sigma: float
    sigma_err: float
    fidelity: float
    fidelity_err: float
    ratio: Optional[float] = None
    n: Optional[int] = None

    def confidence_interval(self, alpha: float = 0.05) -> Tuple[float, float]:
        """Normal-approximation interval on the fidelity."""
        margin = stats.norm.ppf(1 - alpha / 2) * self.fidelity_err
        return self.fidelity - margin, min(self.fidelity + margin, 1.0)

    def to_payload(self) -> Dict[str, object]:
        low, high = self.confidence_interval()
        return {
            "method": self.method,
            "n": self.n,
            "sigma": self.sigma,
            "sigma_err": self.sigma_err,
            "ratio": self.ratio,
            "fidelity_percent": 100 * self.fidelity,
            "fidelity_err_percent": 100 * self.fidelity_err,
            "ci95_percent": [100 * low, 100 * high],
        }


def _covariance(jac: np.ndarray, residuals: np.ndarray) -> Optional[np.ndarray]:
    """Scaled inverse normal matrix, or None when the Jacobian is rank deficient."""
    m, p = jac.shape
    singular = np.linalg.svd(jac, compute_uv=False)
    if singular.size < p or singular[0] == 0 or singular[-1] <= RANK_RTOL * singular[0]:
        return None
    rss = float(residuals @ residuals)
    return np.linalg.inv(jac.T @ jac) * rss / max(m - p, 1)


def _least_squares(
    residual_fn: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    max_iterations: Optional[int] = None,
    xtol: Optional[float] = None,
) -> Tuple[np.ndarray, Optional[np.ndarray], float, bool, str]:
    max_iterations = max_iterations or settings.FIT_MAX_ITERATIONS
    xtol = xtol or settings.FIT_XTOL
    x0 = np.asarray(x0, dtype=float)
    result = optimize.least_squares(
        residual_fn, x0, method="lm", xtol=xtol, max_nfev=max_iterations * (x0.size + 1)
    )
    cov = _covariance(result.jac, result.fun)
    residual = float(np.linalg.norm(result.fun))
    if not result.success:
        return result.x, None, residual, False, str(result.message)
    if cov is None:
        return result.x, None, residual, False, "rank deficient Jacobian"
    return result.x, cov, residual, True, str(result.message)


def _echo_arrays(data: EchoData) -> Tuple[np.ndarray, np.ndarray]:
    frame = data if isinstance(data, pd.DataFrame) else records_to_frame(data)
    missing = [c for c in ECHO_COLUMNS if c not in frame.columns]
    if missing:
        raise InvalidArgumentError("Echo data is missing columns", missing=missing)
    theta = frame["sweep_var"].to_numpy(dtype=float)
    echoes = frame[ECHO_COLUMNS[1:]].to_numpy(dtype=float).T
    return theta, echoes


def series_channels(theta: np.ndarray, coefficients: Sequence[float]) -> np.ndarray:
    """(I_half_x, I_half_y, I_threehalf_x, I_threehalf_y) of the series model, shape (4, m)."""
    theta = np.asarray(theta, dtype=float)
    half = 0.75 * series_factor(coefficients, theta / 2) ** 2
    threehalf = 0.25 * series_factor(coefficients, 1.5 * theta) ** 2
    return np.stack([half.real, half.imag, threehalf.real, threehalf.imag])


def synthesize_series(
    theta: np.ndarray,
    coefficients: Sequence[float],
    noise_std: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> pd.DataFrame:
    """Echo table generated from the series model with optional Gaussian noise."""
    channels = series_channels(theta, coefficients)
    if noise_std:
        rng = rng or np.random.default_rng()
        channels = channels + rng.normal(0.0, noise_std, size=channels.shape)
    frame = pd.DataFrame(channels.T, columns=ECHO_COLUMNS[1:])
    frame.insert(0, "sweep_var", np.asarray(theta, dtype=float))
    return frame


def fit_series(
    data: EchoData,
    order: int = 5,
    weights: Sequence[float] = (1.0, 1.0, 1.0, 1.0),
    seed: Optional[int] = None,
    max_iterations: Optional[int] = None,
    xtol: Optional[float] = None,
) -> FitResult:
    """Global fit of A_0..A_N to all four echo channels at once.

    The model is invariant under A -> -A; the sign is fixed so that A_0 > 0.
    """
    if order < 0:
        raise InvalidArgumentError("Series order must be non-negative", order=order)
    if len(weights) != 4 or any(w < 0 for w in weights):
        raise InvalidArgumentError("Need four non-negative channel weights", weights=list(weights))

    theta, echoes = _echo_arrays(data)
    p = order + 1
    if theta.size < 2 * p:
        raise FitError(f"Series fit of order {order} needs at least {2 * p} points", points=int(theta.size))
    if not (np.any(theta < 0) and np.any(theta > 0)):
        logger.warning("Series fit data do not span both signs of theta")

    w = np.asarray(weights, dtype=float)[:, None]

    def residuals(a: np.ndarray) -> np.ndarray:
        return (w * (series_channels(theta, a) - echoes)).ravel()

    nearest = int(np.argmin(np.abs(theta)))
    start = (3 * echoes[0, nearest] - echoes[2, nearest]) / 2
    x0 = np.full(p, math.sqrt(abs(start)) or 1.0)

    x, cov, residual, converged, message = _least_squares(residuals, x0, max_iterations, xtol)
    if x[0] < 0:
        x = -x
    names = [f"A{n}" for n in range(p)]
    sigmas = None if cov is None else dict(zip(names, np.sqrt(np.clip(np.diag(cov), 0, None)).tolist()))
    logger.info(
        "Series fit finished",
        extra={"order": order, "points": int(theta.size), "converged": converged, "residual": residual},
    )
    return FitResult(
        kind="series",
        params=dict(zip(names, x.tolist())),
        sigmas=sigmas,
        residual=residual,
        converged=converged,
        seed=seed,
        message=message,
    )


def _exponential_model(kind: str) -> Callable[[np.ndarray, float, float, float], np.ndarray]:
    if kind == "decay":
        return lambda t, a, T, c: a * np.exp(-t / T) + c
    if kind == "recovery":
        return lambda t, a, T, c: a * (1 - 2 * np.exp(-t / T)) + c
    raise InvalidArgumentError(f"Unknown exponential kind {kind!r}", kind=kind)


def fit_exponential(
    times: Sequence[float], amplitudes: Sequence[float], kind: str = "decay", seed: Optional[int] = None
) -> FitResult:
    """Single exponential decay or inversion recovery; the time constant is fitted in log space."""
    model = _exponential_model(kind)
    t = np.asarray(times, dtype=float)
    y = np.asarray(amplitudes, dtype=float)
    if t.shape != y.shape or t.size < 4:
        raise FitError("Exponential fit needs at least four matching points", points=int(t.size))

    order = np.argsort(t)
    t, y = t[order], y[order]
    span = float(t[-1] - t[0]) or 1.0
    if kind == "decay":
        a0, c0 = y[0] - y[-1], y[-1]
    else:
        a0, c0 = (y[-1] - y[0]) / 2, (y[-1] + y[0]) / 2

    def residuals(x: np.ndarray) -> np.ndarray:
        return model(t, x[0], math.exp(x[1]), x[2]) - y

    x, cov, residual, converged, message = _least_squares(residuals, np.array([a0, math.log(span / 3), c0]))
    T = math.exp(x[1])
    params = {"a": float(x[0]), "T": T, "c": float(x[2])}
    sigmas = None
    if cov is not None:
        err = np.sqrt(np.clip(np.diag(cov), 0, None))
        sigmas = {"a": float(err[0]), "T": T * float(err[1]), "c": float(err[2])}
    return FitResult(
        kind=f"exponential_{kind}",
        params=params,
        sigmas=sigmas,
        residual=residual,
        converged=converged,
        seed=seed,
        message=message,
    )


def _sigma_estimate(method: str, sigma: float, sigma_err: float, **extra) -> SigmaEstimate:
    fidelity = fidelity_from_sigma(sigma)
    fidelity_err = 2 * sigma * math.exp(-sigma ** 2) / 3 * sigma_err
    return SigmaEstimate(method=method, sigma=sigma, sigma_err=sigma_err,
                         fidelity=fidelity, fidelity_err=fidelity_err, **extra)


def fit_dd_fidelity(theta_grid: Sequence[float], signal: Sequence[float], n: int) -> SigmaEstimate:
    """Recover sigma from the final echo of an n-pulse DD train swept in pulse phase.

    The echo is c + a cos(2 theta) + b sin(2 theta); min/max = exp(-sigma^2 n^2).
    """
    if n not in (2, 4):
        raise InvalidArgumentError("DD trains have 2 or 4 pulses", n=n)
    theta = np.asarray(theta_grid, dtype=float)
    y = np.asarray(signal, dtype=float)
    if theta.shape != y.shape or theta.size < 4:
        raise FitError("DD fit needs at least four matching points", points=int(theta.size))
    if np.ptp(theta) < math.pi - 1e-9:
        raise FitError("DD phase grid must span a full period", span=float(np.ptp(theta)))

    design = np.column_stack([np.ones_like(theta), np.cos(2 * theta), np.sin(2 * theta)])
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < 3:
        raise FitError("DD phase grid does not resolve the 2 theta harmonic")
    resid = y - design @ coef
    dof = max(theta.size - 3, 1)
    cov = np.linalg.inv(design.T @ design) * float(resid @ resid) / dof

    def sigma_of(c: np.ndarray) -> Tuple[float, float]:
        amp = math.hypot(c[1], c[2])
        hi, lo = c[0] + amp, c[0] - amp
        if hi <= 0:
            raise FitError("DD echo maximum is not positive", maximum=hi)
        ratio = min(max(lo / hi, 1e-300), 1.0)
        return math.sqrt(-math.log(ratio)) / n, ratio

    sigma, ratio = sigma_of(coef)
    # forward-difference gradient of sigma in the harmonic coefficients
    step = 1e-7 * max(abs(coef[0]), 1.0)
    grad = np.zeros(3)
    for k in range(3):
        shifted = coef.copy()
        shifted[k] += step
        grad[k] = (sigma_of(shifted)[0] - sigma) / step
    sigma_err = math.sqrt(max(float(grad @ cov @ grad), 0.0))
    return _sigma_estimate("dd", sigma, sigma_err, ratio=ratio, n=n)


def fit_nutation_sigma(angles: Sequence[float], signal: Sequence[float]) -> SigmaEstimate:
    """Fit A sin(Theta) exp(-sigma^2 Theta^2 / pi^2) to a nutation curve of nominal angles Theta."""
    angles = np.asarray(angles, dtype=float)
    y = np.asarray(signal, dtype=float)
    if angles.shape != y.shape or angles.size < 4:
        raise FitError("Nutation fit needs at least four matching points", points=int(angles.size))

    def residuals(x: np.ndarray) -> np.ndarray:
        return x[0] * np.sin(angles) * np.exp(-(x[1] * angles / math.pi) ** 2) - y

    amp0 = float(np.max(np.abs(y))) or 1.0
    x, cov, _, converged, message = _least_squares(residuals, np.array([amp0, 0.1]))
    if not converged:
        raise FitError(f"Nutation fit did not converge: {message}")
    sigma = abs(float(x[1]))
    sigma_err = math.sqrt(max(float(cov[1, 1]), 0.0))
    return _sigma_estimate("nutation", sigma, sigma_err)


def _fit_through_origin(x: np.ndarray, y: np.ndarray) -> Tuple[float, float, float]:
    sxx = float(x @ x)
    if sxx == 0:
        raise FitError("Regressor is identically zero")
    slope = float(x @ y) / sxx
    resid = y - slope * x
    rss = float(resid @ resid)
    return slope, math.sqrt(rss / max(x.size - 1, 1) / sxx), math.sqrt(rss)


def fit_phase_calibration(
    amplitudes: Sequence[float], durations: Sequence[float], phases: Sequence[float]
) -> FitResult:
    """Phase = cal * amplitude * duration, fitted through the origin."""
    x = np.asarray(amplitudes, dtype=float) * np.asarray(durations, dtype=float)
    y = np.asarray(phases, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise FitError("Phase calibration needs at least two matching points", points=int(x.size))
    cal, err, residual = _fit_through_origin(x, y)
    return FitResult(kind="phase_calibration", params={"cal": cal}, sigmas={"cal": err},
                     residual=residual, converged=True)


def fit_vertical_scale(data: Sequence[float], model: Sequence[float]) -> FitResult:
    """Single multiplicative scale between a measured curve and its model prediction."""
    x = np.asarray(model, dtype=float)
    y = np.asarray(data, dtype=float)
    if x.shape != y.shape or x.size < 1:
        raise FitError("Scale fit needs matching data and model", points=int(x.size))
    scale, err, residual = _fit_through_origin(x, y)
    return FitResult(kind="vertical_scale", params={"scale": scale}, sigmas={"scale": err},
                     residual=residual, converged=True)

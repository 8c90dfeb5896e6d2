"""Z(theta) error channel, nuclear dephasing, electron relaxation and B1 inhomogeneity.

Pulse fidelity F and the Gaussian B1 spread sigma are tied by
F = (2 + exp(-sigma^2)) / 3, the average gate fidelity of a pi rotation whose
angle error has variance 2 sigma^2. A single pulse therefore scales its angle by
1 + g with g ~ N(0, sqrt(2) sigma / pi), and n pi pulses lose contrast exp(-sigma^2 n^2).
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Union

import numpy as np

from ..core.errors import InvalidArgumentError
from ..models.experiment import InhomogeneityConfig
from ..models.spin import MW
from .logical import LogicalQubit
from .pulses import Detunings, Pulse, ScaleSource
from .spin_system import LevelView
from .states import DensityMatrix, StateVector

logger = logging.getLogger(__name__)

SeedLike = Union[None, int, np.random.Generator, np.random.SeedSequence]


@dataclass(frozen=True)
class SeriesModel:
    """Coefficients A_0..A_N of sum_n A_n (-i theta)^n / n! I_z^n."""

    coefficients: Tuple[float, ...] = (1.0,) * 6

    def __post_init__(self):
        coefficients = tuple(float(a) for a in self.coefficients)
        if not coefficients:
            raise InvalidArgumentError("Series needs at least A_0")
        if not all(math.isfinite(a) for a in coefficients):
            raise InvalidArgumentError("Series coefficients must be finite")
        if coefficients[0] <= 0:
            raise InvalidArgumentError("A_0 must be positive", A0=coefficients[0])
        object.__setattr__(self, "coefficients", coefficients)

    @classmethod
    def ideal(cls, order: int = 5) -> "SeriesModel":
        return cls((1.0,) * (order + 1))

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    def factor(self, x: np.ndarray) -> np.ndarray:
        return series_factor(self.coefficients, x)


def series_factor(coefficients, x: np.ndarray) -> np.ndarray:
    """g(x) = sum_n A_n (-i x)^n / n!, the series stand-in for exp(-i x)."""
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape, dtype=complex)
    term = np.ones(x.shape, dtype=complex)
    for n, a in enumerate(coefficients):
        if n:
            term = term * (-1j * x) / n
        total = total + a * term
    return total


@dataclass(frozen=True)
class LindbladModel:
    T2n_ms: float = 1.05

    def __post_init__(self):
        if not (math.isfinite(self.T2n_ms) and self.T2n_ms > 0):
            raise InvalidArgumentError("T2n must be positive", T2n_ms=self.T2n_ms)

    def collapse_operator(self, view: LevelView) -> np.ndarray:
        return math.sqrt(2.0 / self.T2n_ms) * np.diag(view.m_I).astype(complex)

    def dephasing(self, view: LevelView, t_ms: float) -> np.ndarray:
        """Elementwise factor exp(-(m_a - m_b)^2 t / T2n)."""
        m = view.m_I
        return np.exp(-((m[:, None] - m[None, :]) ** 2) * t_ms / self.T2n_ms)


@dataclass(frozen=True)
class InhomogeneityModel:
    sigma_MW: float = 0.0
    sigma_RF: float = 0.0
    detuning_sigma_MHz: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    correlated: bool = True

    def __post_init__(self):
        if self.sigma_MW < 0 or self.sigma_RF < 0:
            raise InvalidArgumentError("B1 spreads must be non-negative", sigma_MW=self.sigma_MW, sigma_RF=self.sigma_RF)
        if any(s < 0 for s in self.detuning_sigma_MHz):
            raise InvalidArgumentError("Detuning spreads must be non-negative")

    @classmethod
    def from_config(cls, config: InhomogeneityConfig) -> "InhomogeneityModel":
        sigma_mw, sigma_rf = config.resolved_sigmas()
        return cls(
            sigma_MW=sigma_mw,
            sigma_RF=sigma_rf,
            detuning_sigma_MHz=tuple(config.detuning_sigma_MHz),
            correlated=config.correlated,
        )

    @property
    def is_ideal(self) -> bool:
        return self.sigma_MW == 0 and self.sigma_RF == 0 and not any(self.detuning_sigma_MHz)

    def sigma(self, kind: str) -> float:
        return self.sigma_MW if kind == "MW" else self.sigma_RF

    def fractional_std(self, kind: str) -> float:
        return math.sqrt(2.0) * self.sigma(kind) / math.pi

    def draw_scalings(self, rng: np.random.Generator, shots: int) -> Dict[str, np.ndarray]:
        """One angle factor per shot and pulse kind."""
        return {kind: 1.0 + rng.normal(0.0, self.fractional_std(kind), size=shots) for kind in ("MW", "RF")}

    def draw_detunings(self, rng: np.random.Generator, shots: int) -> Detunings:
        d1, d2, d3 = (rng.normal(0.0, s, size=shots) if s else np.zeros(shots) for s in self.detuning_sigma_MHz)
        return Detunings(d1, d2, d3)

    def scale_source(self, rng: np.random.Generator, shots: int) -> ScaleSource:
        """Angle factors for apply_sequence.

        Correlated: every pulse of a kind shares the shot's factor. Otherwise each
        named pulse draws its own factor once.
        """
        if self.correlated:
            scalings = self.draw_scalings(rng, shots)
            return lambda pulse: scalings[pulse.kind]

        per_pulse: Dict[str, np.ndarray] = {}

        def source(pulse: Pulse) -> np.ndarray:
            if pulse.name not in per_pulse:
                per_pulse[pulse.name] = 1.0 + rng.normal(0.0, self.fractional_std(pulse.kind), size=shots)
            return per_pulse[pulse.name]

        return source


def sigma_from_fidelity(fidelity: float) -> float:
    if not (2 / 3 < fidelity <= 1):
        raise InvalidArgumentError("Fidelity must lie in (2/3, 1]", fidelity=fidelity)
    return math.sqrt(max(-math.log(3 * fidelity - 2), 0.0))


def fidelity_from_sigma(sigma: float) -> float:
    if sigma < 0:
        raise InvalidArgumentError("sigma must be non-negative", sigma=sigma)
    return (2 + math.exp(-sigma ** 2)) / 3


def _m_i_phases(view: LevelView, theta: float) -> np.ndarray:
    return np.exp(-1j * theta * view.m_I)


def z_error_exact(state: StateVector, theta: float) -> StateVector:
    """exp(-i theta I_z), acting on every level of the view by its m_I."""
    return StateVector(state.amplitudes * _m_i_phases(state.view, theta), state.view)


def z_error_series(state: StateVector, theta: float, model: SeriesModel) -> StateVector:
    """Truncated series sum_n A_n (-i theta I_z)^n / n!; not normalised."""
    return StateVector(state.amplitudes * model.factor(theta * state.view.m_I), state.view)


def lindblad_evolve(rho: DensityMatrix, t_ms: float, model: LindbladModel) -> DensityMatrix:
    """Closed-form dephasing under the collapse operator sqrt(2/T2n) I_z."""
    if t_ms < 0:
        raise InvalidArgumentError("Evolution time must be non-negative", t_ms=t_ms)
    rho.validate()
    return DensityMatrix(rho.matrix * model.dephasing(rho.view, t_ms), rho.view)


@dataclass(frozen=True)
class ElectronRelaxationModel:
    """Longitudinal (T1e) and transverse (T2e) relaxation of the MW pair."""

    T1e_ms: float = 1.3
    T2e_us: float = 80.0

    def __post_init__(self):
        if not all(math.isfinite(t) and t > 0 for t in (self.T1e_ms, self.T2e_us)):
            raise InvalidArgumentError(
                "Electron relaxation times must be positive", T1e_ms=self.T1e_ms, T2e_us=self.T2e_us
            )


def electron_relax(
    rho: DensityMatrix, t_us: float, model: ElectronRelaxationModel, equilibrium: DensityMatrix
) -> DensityMatrix:
    """Relax the |-1/2,-1/2>, |+1/2,-1/2> pair for t_us.

    Pair populations approach those of `equilibrium` with T1e and the pair coherence
    decays with T2e. Other elements are left alone, so the trace is kept only while the
    pair population matches the equilibrium one (MW pulses alone).
    """
    if t_us < 0:
        raise InvalidArgumentError("Evolution time must be non-negative", t_us=t_us)
    lower, upper = rho.view.index(MW.bra), rho.view.index(MW.ket)
    longitudinal = math.exp(-t_us / (1000.0 * model.T1e_ms))
    transverse = math.exp(-t_us / model.T2e_us)
    m = rho.matrix.copy()
    for k in (lower, upper):
        target = equilibrium.matrix[..., k, k]
        m[..., k, k] = target + (m[..., k, k] - target) * longitudinal
    m[..., lower, upper] *= transverse
    m[..., upper, lower] *= transverse
    return DensityMatrix(m, rho.view)


def lindblad_generator(rho: np.ndarray, collapse: np.ndarray) -> np.ndarray:
    l_dag = collapse.conj().T
    l_dag_l = l_dag @ collapse
    return collapse @ rho @ l_dag - 0.5 * (l_dag_l @ rho + rho @ l_dag_l)


def lindblad_evolve_rk4(rho: DensityMatrix, t_ms: float, model: LindbladModel, steps: int = 400) -> DensityMatrix:
    """Fourth-order Runge-Kutta integration of the same master equation."""
    if steps < 1:
        raise InvalidArgumentError("RK4 needs at least one step", steps=steps)
    rho.validate()
    collapse = model.collapse_operator(rho.view)
    h = t_ms / steps
    m = rho.matrix.copy()
    for _ in range(steps):
        k1 = lindblad_generator(m, collapse)
        k2 = lindblad_generator(m + h / 2 * k1, collapse)
        k3 = lindblad_generator(m + h / 2 * k2, collapse)
        k4 = lindblad_generator(m + h * k3, collapse)
        m = m + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return DensityMatrix(m, rho.view)


def sample_imperfect_rotation(pulse: Pulse, model: InhomogeneityModel, rng: SeedLike = None) -> Pulse:
    """One draw of the pulse with its angle scaled by 1 + g."""
    rng = np.random.default_rng(rng)
    std = model.fractional_std(pulse.kind)
    if std == 0:
        return pulse
    return pulse.scaled(1.0 + rng.normal(0.0, std))


def b_field_pulse_phase(amplitude: float, duration_us: float, cal: float) -> float:
    """Phase from a field pulse, linear in amplitude and duration."""
    if not cal > 0:
        raise InvalidArgumentError("Calibration coefficient must be positive", cal=cal)
    return cal * amplitude * duration_us


def logical_overlaps(
    theta: float, qubit: Optional[LogicalQubit] = None, model: Optional[SeriesModel] = None
) -> Tuple[complex, complex]:
    """(<psi_L|Z(theta)|psi_L>, <psi_L|I_z Z(theta)|psi_L>) for the exact channel or a series model."""
    qubit = qubit or LogicalQubit.balanced()
    psi = qubit.encoded()
    evolved = z_error_exact(psi, theta) if model is None else z_error_series(psi, theta, model)
    iz_psi = psi.amplitudes * psi.view.m_I
    return complex(np.vdot(psi.amplitudes, evolved.amplitudes)), complex(np.vdot(iz_psi, evolved.amplitudes))

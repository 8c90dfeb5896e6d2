"""Refocusing, echo detection and the echo combinations that expose A_0 and A_1 theta.

Echoes are normalised so that an encoded, unperturbed state gives I_half_x = 3/4 and
I_threehalf_x = 1/4. The 3/2 channel is recorded with mirrored quadrature (complex
conjugate), so both out-of-phase echoes start with slope -3/4 in theta.
"""
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from ..core.errors import InvalidArgumentError
from ..models.records import EchoRecord
from .decoherence import SeriesModel
from .pulses import Detunings, apply_sequence, free_evolution_phases
from .sequences import HALF, PATHWAYS, THREEHALF, detection_sequence
from .spin_system import NUCLEAR_VIEW
from .states import DensityMatrix, StateVector

# The unperturbed encoded state read out through the 1/2 pathway gives conj(a) b = -3/8.
# Dividing by (-3/8) / (3/4) = -1/2 maps that coherence onto the nominal I_half_x = 3/4.
REFERENCE_COHERENCE = -0.5

_ELECTRON_PAIR = ((-0.5, -0.5), (0.5, -0.5))

Number = Union[float, np.ndarray]


@dataclass(frozen=True)
class RefocusBlock:
    """Anti-diagonal pi over the four nuclear levels; `sign` multiplies rows 0 and 1."""

    sign: int = 1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise InvalidArgumentError("Refocus sign must be +1 or -1", sign=self.sign)

    @property
    def propagator(self) -> np.ndarray:
        p = np.fliplr(np.eye(4)).astype(complex)
        p[0, 3] = p[1, 2] = self.sign
        return p

    def apply(self, state: StateVector) -> StateVector:
        return StateVector(state.amplitudes @ self.propagator.T, state.view)


def refocus_apply(state: StateVector, tau: float, det: Detunings, sign: int = 1) -> StateVector:
    """tau of free evolution, the refocusing block, tau of free evolution."""
    if state.view != NUCLEAR_VIEW:
        raise InvalidArgumentError("Refocusing acts on the nuclear view", view=state.view.name)
    block = RefocusBlock(sign)
    state = free_evolution_phases(state, tau, det)
    state = block.apply(state)
    return free_evolution_phases(state, tau, det)


def electron_coherence(state: Union[StateVector, DensityMatrix]) -> complex:
    """Shot-averaged conj(a) b on the MW pair |-1/2,-1/2>, |+1/2,-1/2>."""
    lower, upper = (state.view.index(label) for label in _ELECTRON_PAIR)
    if isinstance(state, DensityMatrix):
        return complex(np.mean(state.matrix[..., upper, lower]))
    a, b = state.amplitudes[..., lower], state.amplitudes[..., upper]
    return complex(np.mean(np.conj(a) * b))


def echo_from_state(state: Union[StateVector, DensityMatrix], variant: str) -> complex:
    if variant not in PATHWAYS:
        raise InvalidArgumentError(f"Unknown readout pathway {variant!r}", variant=variant)
    echo = electron_coherence(state) / REFERENCE_COHERENCE
    return echo.conjugate() if variant == THREEHALF else echo


def detection_pathway(state: StateVector, variant: str = HALF, green: bool = True) -> complex:
    """Read a stored nuclear state out through pulses 13-16 and the two final MW pulses."""
    final = apply_sequence(state, detection_sequence(variant, green))
    return echo_from_state(final, variant)


def echo_expansions(theta: float, model: SeriesModel, printed: bool = False) -> EchoRecord:
    """Echoes predicted by the A_n series.

    printed=True keeps only the leading terms (theta^2 for x, theta^3 for y); otherwise
    the full truncated series is squared numerically.
    """
    if printed:
        a = list(model.coefficients) + [0.0] * max(0, 4 - len(model.coefficients))
        a0, a1, a2, a3 = a[:4]
        even = a1 ** 2 + a0 * a2
        odd = 3 * a1 * a2 + a0 * a3
        half = complex(0.75 * a0 ** 2 - 3 * theta ** 2 / 16 * even, -0.75 * theta * a0 * a1 + theta ** 3 / 32 * odd)
        threehalf = complex(
            0.25 * a0 ** 2 - 9 * theta ** 2 / 16 * even, -0.75 * theta * a0 * a1 + 9 * theta ** 3 / 32 * odd
        )
    else:
        half, threehalf = series_echoes(np.asarray(theta), model)
    return EchoRecord.from_echoes(theta, complex(half), complex(threehalf))


def series_echoes(theta: np.ndarray, model: SeriesModel) -> Tuple[np.ndarray, np.ndarray]:
    """(3/4) g(theta/2)^2 and (1/4) g(3 theta/2)^2, vectorised over theta."""
    theta = np.asarray(theta, dtype=float)
    return 0.75 * model.factor(theta / 2) ** 2, 0.25 * model.factor(1.5 * theta) ** 2


def combine_uncorrupted(rec) -> Number:
    """(3 I_half_x - I_threehalf_x) / 2 = A_0^2 + O(theta^4)."""
    return (3 * rec.I_half_x - rec.I_threehalf_x) / 2


def combine_corrupted_linear(rec) -> Tuple[Number, Number]:
    """-4/3 of each out-of-phase echo, both A_0 A_1 theta + O(theta^3)."""
    return -4 * rec.I_half_y / 3, -4 * rec.I_threehalf_y / 3


def combine_corrupted_square(rec) -> Number:
    """2 (I_half_x - 3 I_threehalf_x) / 3 = (A_1^2 + A_0 A_2) theta^2."""
    return 2 * (rec.I_half_x - 3 * rec.I_threehalf_x) / 3


def storage_model(t_ms: Number, T2n_ms: float) -> Tuple[Number, Number]:
    """Uncorrupted and corrupted-square combinations under I_z dephasing alone."""
    x = np.asarray(t_ms, dtype=float) / T2n_ms
    half, threehalf = 0.75 * np.exp(-x), 0.25 * np.exp(-9 * x)
    return (3 * half - threehalf) / 2, 2 * (half - 3 * threehalf) / 3

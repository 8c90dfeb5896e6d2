"""Logical qubit on the I = 3/2 nuclear levels of the m_S = -1/2 manifold.

Nuclear view order is m_I = (-3/2, -1/2, +1/2, +3/2).
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from ..core.errors import InvalidStateError, UnsupportedEncodingError
from ..models.spin import TransitionLabel
from .pulses import Pulse, PulseSequence, apply_sequence
from .spin_system import EXPERIMENT_VIEW, NUCLEAR_VIEW, PROTOCOL_VIEW, SpinSystem
from .states import StateVector

logger = logging.getLogger(__name__)

_R3 = math.sqrt(3.0)


def _nuclear(m_i_from: float, m_i_to: float) -> TransitionLabel:
    return TransitionLabel(bra=(-0.5, m_i_from), ket=(-0.5, m_i_to))


@dataclass(frozen=True)
class LogicalBasis:
    ket0L: StateVector
    ket1L: StateVector
    ketIz0L: StateVector
    ketIz1L: StateVector

    @classmethod
    def build(cls) -> "LogicalBasis":
        zero = np.array([0.5, 0.0, _R3 / 2, 0.0])
        one = np.array([0.0, _R3 / 2, 0.0, 0.5])
        iz = np.diag(NUCLEAR_VIEW.m_I)
        return cls(
            ket0L=StateVector(zero, NUCLEAR_VIEW),
            ket1L=StateVector(one, NUCLEAR_VIEW),
            ketIz0L=StateVector(2 / _R3 * iz @ zero, NUCLEAR_VIEW),
            ketIz1L=StateVector(2 / _R3 * iz @ one, NUCLEAR_VIEW),
        )

    def matrix(self) -> np.ndarray:
        """Columns |0_L>, |1_L>, |I_z 0_L>, |I_z 1_L>."""
        return np.stack(
            [self.ket0L.amplitudes, self.ket1L.amplitudes, self.ketIz0L.amplitudes, self.ketIz1L.amplitudes],
            axis=1,
        )


LOGICAL_BASIS = LogicalBasis.build()


@dataclass(frozen=True)
class LogicalQubit:
    alpha: complex
    beta: complex

    def __post_init__(self):
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise InvalidStateError("Qubit amplitudes are not normalised", norm=norm)

    @classmethod
    def random(cls, rng: np.random.Generator) -> "LogicalQubit":
        z = rng.normal(size=2) + 1j * rng.normal(size=2)
        z /= np.linalg.norm(z)
        return cls(complex(z[0]), complex(z[1]))

    @classmethod
    def balanced(cls) -> "LogicalQubit":
        return cls(1 / math.sqrt(2), 1 / math.sqrt(2))

    def nuclear_input(self) -> StateVector:
        """alpha|-1/2> + beta|+1/2> before encoding."""
        return StateVector(np.array([0, self.alpha, self.beta, 0], dtype=complex), NUCLEAR_VIEW)

    def electron_input(self) -> StateVector:
        """(alpha|-1/2> + beta|+1/2>) x |m_I = -1/2> in the five-level view."""
        return StateVector(np.array([0, self.alpha, 0, 0, self.beta], dtype=complex), EXPERIMENT_VIEW)

    def encoded(self) -> StateVector:
        return StateVector(
            self.alpha * LOGICAL_BASIS.ket0L.amplitudes + self.beta * LOGICAL_BASIS.ket1L.amplitudes,
            NUCLEAR_VIEW,
        )


@lru_cache(maxsize=1)
def _encode_matrix() -> np.ndarray:
    b = LOGICAL_BASIS
    u = np.zeros((4, 4), dtype=complex)
    u[:, 0] = b.ketIz0L.amplitudes
    u[:, 1] = b.ket0L.amplitudes
    u[:, 2] = b.ket1L.amplitudes
    u[:, 3] = b.ketIz1L.amplitudes
    u.flags.writeable = False
    return u


def encode_unitary() -> np.ndarray:
    """U_enc: |-1/2> -> |0_L>, |+1/2> -> |1_L>, |-3/2> -> |I_z 0_L>, |+3/2> -> |I_z 1_L>."""
    return _encode_matrix().copy()


def encode_pulse_sequence(system: Optional[SpinSystem] = None) -> PulseSequence:
    """Three y-axis rotations composing to U_enc, two of them on dm_I = 2 transitions."""
    if system is not None and not system.allow_double_quantum:
        raise UnsupportedEncodingError()
    pulses = (
        Pulse(_nuclear(-0.5, 0.5), -math.pi, name="enc_1"),
        Pulse(_nuclear(-1.5, 0.5), 5 * math.pi / 3, name="enc_2"),
        Pulse(_nuclear(-0.5, 1.5), math.pi / 3, name="enc_3"),
    )
    return PulseSequence(pulses=pulses, name="encode-ideal")


def decode_pulse_sequence(system: Optional[SpinSystem] = None) -> PulseSequence:
    return encode_pulse_sequence(system).inverted()


def swap_electron_to_nuclear() -> PulseSequence:
    """Move alpha|-1/2,-1/2> + beta|+1/2,-1/2> onto alpha|-1/2,-1/2> + beta|-1/2,+1/2>.

    Runs through |+1/2,+1/2>, so it needs the protocol view.
    """
    pulses = (
        Pulse(TransitionLabel(bra=(0.5, -0.5), ket=(0.5, 0.5)), -math.pi, name="swap_rf"),
        Pulse(TransitionLabel(bra=(-0.5, 0.5), ket=(0.5, 0.5)), math.pi, name="swap_mw"),
    )
    return PulseSequence(pulses=pulses, name="swap")


def decode_error_transfer() -> PulseSequence:
    """Electron pi pulses on m_I = -3/2 and +3/2, then nuclear pi pulses inside m_S = +1/2.

    The decoded error amplitudes on |-1/2,-3/2>, |-1/2,+3/2> end on |+1/2,-1/2>, |+1/2,+1/2>.
    """
    pulses = (
        Pulse(TransitionLabel(bra=(-0.5, -1.5), ket=(0.5, -1.5)), -math.pi, name="transfer_mw_1"),
        Pulse(TransitionLabel(bra=(-0.5, 1.5), ket=(0.5, 1.5)), -math.pi, name="transfer_mw_2"),
        Pulse(TransitionLabel(bra=(0.5, -1.5), ket=(0.5, -0.5)), -math.pi, name="transfer_rf_1"),
        Pulse(TransitionLabel(bra=(0.5, 0.5), ket=(0.5, 1.5)), math.pi, name="transfer_rf_2"),
    )
    return PulseSequence(pulses=pulses, name="error-transfer")


def decode_with_error_transfer(state: StateVector, system: Optional[SpinSystem] = None) -> StateVector:
    """U_enc^dagger on the nuclear levels, then the error transfer, in the protocol view."""
    if state.view != PROTOCOL_VIEW:
        state = state.embed(PROTOCOL_VIEW)
    state = apply_sequence(state, decode_pulse_sequence(system))
    return apply_sequence(state, decode_error_transfer())


def error_weight(state: StateVector) -> np.ndarray:
    """Population in m_S = +1/2 after decoding."""
    upper = state.view.m_S > 0
    return np.sum(np.abs(state.amplitudes[..., upper]) ** 2, axis=-1)

"""Pulse sequences of the error-correction, coherence-transfer and relaxation experiments.

RF pulses keep their table numbers (rf1 ... rf16). The four MW pulses of the
error-correction sequence are named mw_pi2, mw_pi_1 ... mw_pi_3 and sit next to
RF pulses 1 and 16.
"""
import math
from typing import Dict, List

from ..core.errors import InvalidArgumentError
from .pulses import AXIS_PHASES, PhaseCycle, PhaseCycleStep, PulseSequence

HALF = "half"
THREEHALF = "threehalf"
PATHWAYS = (HALF, THREEHALF)

REFOCUS_ALTERNATED = ("rf6", "rf9", "rf10")

Row = Dict[str, object]

ENCODE_ROWS: List[Row] = [
    {"pulse": "mw_pi2", "frequency": "MW", "position": "-2U", "angle": "+pi/2"},
    {"pulse": "mw_pi_1", "frequency": "MW", "position": "-U", "angle": "+pi"},
    {"pulse": 1, "frequency": "f2", "position": "0", "angle": "+pi"},
    {"pulse": "mw_pi_2", "frequency": "MW", "position": "0.5U", "angle": "+pi"},
    {"pulse": 2, "frequency": "f1", "position": "U", "angle": "+pi/3"},
    {"pulse": 3, "frequency": "f3", "position": "2U", "angle": "+pi/3"},
    {"pulse": 4, "frequency": "f2", "position": "3U", "angle": "-pi"},
]

REFOCUS_ROWS: List[Row] = [
    {"pulse": 5, "frequency": "f2", "position": "3U + tau", "angle": "+pi"},
    {"pulse": 6, "frequency": "f1", "position": "4U + tau", "angle": "±pi"},
    {"pulse": 7, "frequency": "f3", "position": "5U + tau", "angle": "+pi"},
    {"pulse": 8, "frequency": "f2", "position": "6U + tau", "angle": "+pi"},
    {"pulse": 9, "frequency": "f1", "position": "7U + tau", "angle": "±pi"},
    {"pulse": 10, "frequency": "f3", "position": "8U + tau", "angle": "±pi"},
    {"pulse": 11, "frequency": "f2", "position": "9U + tau", "angle": "-pi"},
    # listed at 15U + tau; ordered by pulse number, so tau >= 6U when unit delays are on
    {"pulse": 12, "frequency": "f2", "position": "15U + tau", "angle": "+pi"},
]

GREEN_ROWS: List[Row] = [
    {"pulse": 14, "frequency": "f1", "position": "10U + 2tau", "angle": "+pi"},
    {"pulse": 15, "frequency": "f3", "position": "11U + 2tau", "angle": "+pi"},
]


def _check_pathway(variant: str) -> str:
    if variant not in PATHWAYS:
        raise InvalidArgumentError(f"Unknown readout pathway {variant!r}", variant=variant)
    return variant


def _check_sign(sign: int) -> int:
    if sign not in (1, -1):
        raise InvalidArgumentError("Refocus sign must be +1 or -1", sign=sign)
    return sign


def _table_sign(refocus_sign: int) -> int:
    # pulses 6, 9, 10 at -pi give the anti-diagonal block with all entries +1
    return -_check_sign(refocus_sign)


def experimental_encode_sequence(U_us: float = 8.0, tau_us: float = 0.0) -> PulseSequence:
    """Electron coherence transfer into |-1/2,-1/2>, |-1/2,+1/2> followed by the three RF encoding pulses."""
    return PulseSequence.from_table(ENCODE_ROWS, U_us=U_us, tau_us=tau_us, name="encode")


def refocus_pulse_block(sign: int = 1, U_us: float = 8.0, tau_us: float = 0.0) -> PulseSequence:
    """RF pulses 5-12 acting as a pi pulse across the four nuclear levels."""
    return PulseSequence.from_table(
        REFOCUS_ROWS, U_us=U_us, tau_us=tau_us, pm_sign=_table_sign(sign), name=f"refocus{sign:+d}"
    )


def detection_rows(variant: str = HALF, green: bool = True) -> List[Row]:
    rows: List[Row] = [{"pulse": 13, "frequency": "f2", "position": "9U + 2tau", "angle": "+pi"}]
    if _check_pathway(variant) == THREEHALF and green:
        rows += GREEN_ROWS
    rows += [
        {"pulse": "mw_pi_3", "frequency": "MW", "position": "11.5U + 2tau", "angle": "+pi"},
        {"pulse": 16, "frequency": "f2", "position": "12U + 2tau", "angle": "+pi"},
        {"pulse": "mw_pi_4", "frequency": "MW", "position": "12.5U + 2tau", "angle": "+pi"},
    ]
    return rows


def detection_sequence(variant: str = HALF, green: bool = True, U_us: float = 8.0,
                       tau_us: float = 0.0) -> PulseSequence:
    """Pulse 13, green pulses 14/15 for the 3/2 pathway, MW pi, pulse 16, MW pi."""
    return PulseSequence.from_table(detection_rows(variant, green), U_us=U_us, tau_us=tau_us,
                                    name=f"detect-{variant}")


def qec_rows(variant: str = HALF, refocus: bool = True, green: bool = True) -> List[Row]:
    rows = list(ENCODE_ROWS)
    if refocus:
        rows += REFOCUS_ROWS
    rows += detection_rows(variant, green)
    return rows


def qec_pulse_table(
    variant: str = HALF,
    refocus_sign: int = 1,
    U_us: float = 8.0,
    tau_us: float = 100.0,
    refocus: bool = True,
    green: bool = True,
    unit_delays: bool = False,
) -> PulseSequence:
    """The full error-correction sequence in pulse-number order with its MW pulses."""
    return PulseSequence.from_table(
        qec_rows(_check_pathway(variant), refocus, green),
        U_us=U_us,
        tau_us=tau_us,
        pm_sign=_table_sign(refocus_sign),
        unit_delays=unit_delays,
        name=f"qec-{variant}",
    )


def coherence_transfer_sequence(
    refocus_phase: float = 0.0,
    mw_phase: float = 0.0,
    U_us: float = 8.0,
    tau_us: float = 100.0,
    unit_delays: bool = False,
) -> PulseSequence:
    """Store an electron coherence on the m_I = -1/2, +1/2 pair, refocus it with pi(theta), read it back."""
    rows: List[Row] = [
        {"pulse": "mw_pi2", "frequency": "MW", "position": "0", "angle": "+pi/2", "phase": mw_phase},
        {"pulse": "mw_pi_1", "frequency": "MW", "position": "U", "angle": "+pi"},
        {"pulse": "rf_store", "frequency": "f2", "position": "2U", "angle": "+pi"},
        {"pulse": "mw_pi_2", "frequency": "MW", "position": "3U", "angle": "+pi"},
        {"pulse": "rf_refocus", "frequency": "f2", "position": "3U + tau",
         "angle": "+pi", "phase": refocus_phase},
        {"pulse": "mw_pi_3", "frequency": "MW", "position": "3U + 2tau", "angle": "+pi"},
        {"pulse": "rf_restore", "frequency": "f2", "position": "4U + 2tau", "angle": "+pi"},
        {"pulse": "mw_pi_4", "frequency": "MW", "position": "5U + 2tau", "angle": "+pi"},
    ]
    return PulseSequence.from_table(rows, U_us=U_us, tau_us=tau_us, unit_delays=unit_delays,
                                    name="coherence-transfer")


def qec_phase_cycle(refocus: bool = True) -> PhaseCycle:
    """MW pi/2 phase 0/pi crossed with the pulse 6/9/10 alternation.

    Without the refocusing block only the MW phase is cycled.
    """
    if not refocus:
        return PhaseCycle(
            steps=(
                PhaseCycleStep(sign=1, phases={"mw_pi2": 0.0}),
                PhaseCycleStep(sign=-1, phases={"mw_pi2": math.pi}),
            ),
            name="qec-mw",
        )

    steps = []
    for mw_phase, refocus_sign, receiver in ((0.0, 1, 1), (math.pi, 1, -1), (0.0, -1, -1), (math.pi, -1, 1)):
        angle = _table_sign(refocus_sign) * math.pi
        steps.append(
            PhaseCycleStep(
                sign=receiver,
                phases={"mw_pi2": mw_phase},
                angles={name: angle for name in REFOCUS_ALTERNATED},
            )
        )
    return PhaseCycle(steps=tuple(steps), name="qec")


def coherence_transfer_phase_cycle() -> PhaseCycle:
    """MW pi/2 along +x/-x crossed with the RF refocusing pulse along +x/+y."""
    plan = (("+x", "+x", 1), ("-x", "+x", -1), ("+x", "+y", -1), ("-x", "+y", 1))
    return PhaseCycle(
        steps=tuple(
            PhaseCycleStep(sign=sign, phases={"mw_pi2": AXIS_PHASES[mw], "rf_refocus": AXIS_PHASES[rf]})
            for mw, rf, sign in plan
        ),
        name="coherence-transfer",
    )



def hahn_echo_sequence(tau_us: float = 0.0) -> PulseSequence:
    """MW pi/2, tau, MW pi; the echo forms tau after the pi pulse."""
    rows: List[Row] = [
        {"pulse": "mw_pi2", "frequency": "MW", "position": "0", "angle": "+pi/2"},
        {"pulse": "mw_pi", "frequency": "MW", "position": "tau", "angle": "+pi"},
    ]
    return PulseSequence.from_table(rows, tau_us=tau_us, name="hahn-echo")


def inversion_recovery_sequence(delay_us: float = 0.0) -> PulseSequence:
    """MW pi, a recovery delay, then a MW pi/2 that turns the polarisation into coherence."""
    rows: List[Row] = [
        {"pulse": "mw_pi", "frequency": "MW", "position": "0", "angle": "+pi"},
        {"pulse": "mw_pi2", "frequency": "MW", "position": "tau", "angle": "+pi/2"},
    ]
    return PulseSequence.from_table(rows, tau_us=delay_us, name="inversion-recovery")

import math

import numpy as np
import pytest

from qudit_memory.core.errors import InvalidArgumentError, InvalidSequenceError
from qudit_memory.physics.decoherence import z_error_exact
from qudit_memory.physics.pulses import PhaseCycle, SpuriousSignals, apply_sequence, run_phase_cycle
from qudit_memory.physics.readout import RefocusBlock, echo_from_state, electron_coherence
from qudit_memory.physics.sequences import (
    HALF,
    THREEHALF,
    coherence_transfer_phase_cycle,
    coherence_transfer_sequence,
    experimental_encode_sequence,
    qec_phase_cycle,
    qec_pulse_table,
    refocus_pulse_block,
)
from qudit_memory.physics.spin_system import NUCLEAR_VIEW

R2 = 1 / math.sqrt(2)
SPURIOUS = SpuriousSignals(offset=0.2 + 0.1j, electron_echo=0.5 - 0.3j)


def test_encoding_from_pseudo_pure(pseudo_pure):
    out = apply_sequence(pseudo_pure, experimental_encode_sequence())
    expected = -R2 * np.array([0.5, math.sqrt(3) / 2, math.sqrt(3) / 2, 0.5, 0.0])
    np.testing.assert_allclose(out.amplitudes, expected, atol=1e-12)


def test_table_contents():
    half = qec_pulse_table(HALF)
    threehalf = qec_pulse_table(THREEHALF)
    assert len(half) == 19
    assert len(threehalf) == 21
    assert {"rf14", "rf15"} <= {p.name for p in threehalf}
    assert "rf14" not in {p.name for p in half}
    assert len(qec_pulse_table(HALF, refocus=False)) == 11
    assert len(qec_pulse_table(THREEHALF, green=False)) == 19
    assert [p.name for p in half][:3] == ["mw_pi2", "mw_pi_1", "rf1"]


def test_refocus_sign_selects_alternated_pulses():
    plus, minus = qec_pulse_table(HALF, refocus_sign=1), qec_pulse_table(HALF, refocus_sign=-1)
    for name in ("rf6", "rf9", "rf10"):
        assert plus.pulse(name).angle == pytest.approx(-minus.pulse(name).angle)
    assert plus.pulse("rf5").angle == minus.pulse("rf5").angle


def test_unknown_pathway_and_sign():
    with pytest.raises(InvalidArgumentError):
        qec_pulse_table("quarter")
    with pytest.raises(InvalidArgumentError):
        qec_pulse_table(HALF, refocus_sign=0)


def test_pulse_twelve_needs_long_tau_with_unit_delays():
    qec_pulse_table(HALF, U_us=8.0, tau_us=40.0)
    with pytest.raises(InvalidSequenceError):
        qec_pulse_table(HALF, U_us=8.0, tau_us=40.0, unit_delays=True)
    qec_pulse_table(HALF, U_us=8.0, tau_us=48.0, unit_delays=True)


def test_refocus_block_matches_anti_diagonal():
    u = refocus_pulse_block(1).propagator(NUCLEAR_VIEW)
    np.testing.assert_allclose(u, RefocusBlock(1).propagator, atol=1e-12)


def test_refocus_block_negative_sign():
    u = refocus_pulse_block(-1).propagator(NUCLEAR_VIEW)
    expected = np.diag([1, -1, -1, 1]) @ RefocusBlock(-1).propagator
    np.testing.assert_allclose(u, expected, atol=1e-12)


@pytest.mark.parametrize("variant", [HALF, THREEHALF])
def test_qec_cycle_removes_spurious_signals(pseudo_pure, variant):
    seq = qec_pulse_table(variant)
    after = {"rf4": lambda s: z_error_exact(s, 0.3)}

    def observable(step):
        return echo_from_state(apply_sequence(pseudo_pure, step, after=after), variant)

    raw = run_phase_cycle(seq, PhaseCycle.single(), observable)
    cycled = run_phase_cycle(seq, qec_phase_cycle(), observable, SPURIOUS)
    assert abs(cycled - raw) < 1e-10


def test_cycle_without_refocus_removes_offset(pseudo_pure):
    seq = qec_pulse_table(HALF, refocus=False)
    cycle = qec_phase_cycle(refocus=False)
    assert cycle.balanced and len(cycle.steps) == 2

    def observable(step):
        return echo_from_state(apply_sequence(pseudo_pure, step), HALF)

    raw = run_phase_cycle(seq, PhaseCycle.single(), observable)
    cycled = run_phase_cycle(seq, cycle, observable, SpuriousSignals(offset=0.4 - 0.2j))
    assert abs(cycled - raw) < 1e-10


def test_coherence_transfer_follows_twice_the_refocus_phase(pseudo_pure):
    reference = electron_coherence(apply_sequence(pseudo_pure, coherence_transfer_sequence(0.0)))
    assert abs(reference) == pytest.approx(0.5)
    for theta in np.linspace(0, 2 * math.pi, 16, endpoint=False):
        echo = electron_coherence(apply_sequence(pseudo_pure, coherence_transfer_sequence(theta)))
        assert abs(echo / reference - np.exp(2j * theta)) < 1e-12


def test_coherence_transfer_cycle(pseudo_pure):
    seq = coherence_transfer_sequence()
    cycle = coherence_transfer_phase_cycle()

    def observable(step):
        return electron_coherence(apply_sequence(pseudo_pure, step))

    first = observable(cycle.steps[0].apply(seq))
    cycled = run_phase_cycle(seq, cycle, observable, SpuriousSignals(offset=1.0, electron_echo=0.7j))
    assert abs(cycled - first) < 1e-12
    assert abs(first) > 0.4

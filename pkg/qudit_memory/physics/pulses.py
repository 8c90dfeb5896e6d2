"""Selective two-level rotations, timed pulse sequences and phase cycling.

Phase 0 rotates about the rotating-frame +y axis; a phase phi multiplies the
upper off-diagonal element of the 2x2 block by exp(-i phi). Axis names map as
+y -> 0, -x -> pi/2, -y -> pi, +x -> -pi/2.

Pulses are instantaneous. Timing is carried as (multiples of U, multiples of tau);
free evolution between pulses uses only the tau part unless unit delays are enabled.
"""
import json
import logging
import math
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..core.errors import ConfigError, InvalidArgumentError, InvalidSequenceError
from ..models.spin import FREQUENCY_LABELS, TransitionLabel
from .spin_system import LevelView
from .states import DensityMatrix, StateVector

logger = logging.getLogger(__name__)

ANGLE_BOUND = 4 * math.pi
AXIS_PHASES = {"+y": 0.0, "-x": math.pi / 2, "-y": math.pi, "+x": -math.pi / 2}
_M_I_ORDER = (-1.5, -0.5, 0.5, 1.5)

ArrayLike = Union[float, np.ndarray]
ScaleSource = Callable[["Pulse"], ArrayLike]


def rotation_propagator(dim: int, i: int, j: int, angle: float, phase: float = 0.0) -> np.ndarray:
    if i == j:
        raise InvalidArgumentError("Rotation needs two distinct levels", i=i, j=j)
    if not (0 <= i < dim and 0 <= j < dim):
        raise InvalidArgumentError(f"Levels ({i}, {j}) outside a {dim}-level basis", i=i, j=j, dim=dim)

    c, s = math.cos(angle / 2), math.sin(angle / 2)
    u = np.eye(dim, dtype=complex)
    u[i, i] = c
    u[j, j] = c
    u[i, j] = -s * np.exp(-1j * phase)
    u[j, i] = s * np.exp(1j * phase)
    return u


def _broadcastable(values: ArrayLike, ndim: int) -> np.ndarray:
    values = np.asarray(values)
    return values.reshape(values.shape + (1,) * max(ndim - values.ndim, 0))


def _rotate(amplitudes: np.ndarray, i: int, j: int, angle: ArrayLike, phase: float) -> np.ndarray:
    """Apply R(i, j, angle, phase) to vectors stored along the last axis.

    `angle` may be an array over the leading (shot) axes.
    """
    lead = amplitudes.ndim - 1
    half = _broadcastable(np.asarray(angle, dtype=float) / 2, lead)
    c, s = np.cos(half), np.sin(half)
    a_i, a_j = amplitudes[..., i], amplitudes[..., j]
    new_i = c * a_i - s * np.exp(-1j * phase) * a_j
    new_j = s * np.exp(1j * phase) * a_i + c * a_j
    # a single state fans out to the shot shape of the angle
    shape = np.broadcast_shapes(amplitudes.shape[:-1], new_i.shape) + amplitudes.shape[-1:]
    out = np.array(np.broadcast_to(amplitudes, shape), dtype=complex)
    out[..., i] = new_i
    out[..., j] = new_j
    return out


def _swap_last(matrix: np.ndarray) -> np.ndarray:
    return np.swapaxes(matrix, -1, -2)


def _rotate_density(matrix: np.ndarray, i: int, j: int, angle: ArrayLike, phase: float) -> np.ndarray:
    # R rho R^dagger as two last-axis updates; per-shot angles need a shot axis on rho
    left = _swap_last(_rotate(_swap_last(matrix), i, j, angle, phase))
    return np.conj(_rotate(np.conj(left), i, j, angle, phase))


@dataclass(frozen=True)
class Detunings:
    """Offsets (MHz) of the f1, f2, f3 lines from their drive frequencies.

    Each entry may be a scalar or an array over shots.
    """

    delta_f1: ArrayLike = 0.0
    delta_f2: ArrayLike = 0.0
    delta_f3: ArrayLike = 0.0

    def __post_init__(self):
        for name in ("delta_f1", "delta_f2", "delta_f3"):
            value = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(value)):
                raise InvalidArgumentError("Detunings must be finite", field=name)

    @classmethod
    def zero(cls) -> "Detunings":
        return cls()

    @property
    def is_zero(self) -> bool:
        return all(not np.any(np.asarray(v)) for v in (self.delta_f1, self.delta_f2, self.delta_f3))

    def cumulative(self) -> np.ndarray:
        """Phase rates on m_I = (-3/2, -1/2, +1/2, +3/2); last axis has length 4."""
        d1, d2, d3 = np.broadcast_arrays(
            np.asarray(self.delta_f1, dtype=float),
            np.asarray(self.delta_f2, dtype=float),
            np.asarray(self.delta_f3, dtype=float),
        )
        return np.stack([d1 + d2 + d3, d1 + d2, d1, np.zeros_like(d1)], axis=-1)


def level_phase_rates(view: LevelView, det: Detunings) -> np.ndarray:
    """Phase rate (MHz) of every view level; m_S = +1/2 levels do not precess."""
    rates = det.cumulative()
    out = np.zeros(rates.shape[:-1] + (view.dim,))
    for k, (m_s, m_i) in enumerate(view.labels):
        if m_s == -0.5 and m_i in _M_I_ORDER:
            out[..., k] = rates[..., _M_I_ORDER.index(m_i)]
    return out


def free_evolution_phases(state: StateVector, tau: float, det: Detunings) -> StateVector:
    """Multiply amplitudes by exp(-i 2 pi phi tau), tau in microseconds."""
    if tau == 0 or det.is_zero:
        return state
    rates = level_phase_rates(state.view, det)
    lead = state.amplitudes.ndim - 1
    phases = np.exp(-2j * np.pi * rates * tau)
    if phases.ndim > 1:
        phases = phases.reshape(phases.shape[:-1] + (1,) * (lead - (phases.ndim - 1)) + phases.shape[-1:])
    return StateVector(state.amplitudes * phases, state.view)


def free_evolution_density(rho: DensityMatrix, tau: float, det: Detunings) -> DensityMatrix:
    if tau == 0 or det.is_zero:
        return rho
    rates = level_phase_rates(rho.view, det)
    phases = np.exp(-2j * np.pi * rates * tau)
    if phases.ndim > 1:
        phases = phases.reshape(phases.shape[:-1] + (1,) * (rho.matrix.ndim - 2 - (phases.ndim - 1)) + phases.shape[-1:])
    factor = phases[..., :, None] * np.conj(phases)[..., None, :]
    return DensityMatrix(rho.matrix * factor, rho.view)


@dataclass(frozen=True)
class Pulse:
    transition: TransitionLabel
    angle: float
    phase: float = 0.0
    units: float = 0.0
    taus: float = 0.0
    name: str = ""
    number: Optional[int] = None
    label: str = ""

    def __post_init__(self):
        if not math.isfinite(self.angle) or abs(self.angle) > ANGLE_BOUND + 1e-12:
            raise InvalidArgumentError(
                f"Pulse angle {self.angle} is outside [-4pi, 4pi]", pulse=self.name, angle=self.angle
            )
        if not math.isfinite(self.phase):
            raise InvalidArgumentError("Pulse phase must be finite", pulse=self.name)

    @property
    def kind(self) -> str:
        return self.transition.kind

    def position(self, U_us: float, tau_us: float, unit_delays: bool = True) -> float:
        return (self.units * U_us if unit_delays else 0.0) + self.taus * tau_us

    def scaled(self, factor: float) -> "Pulse":
        return replace(self, angle=self.angle * factor)

    def levels(self, view: LevelView) -> Tuple[int, int]:
        return view.index(self.transition.bra), view.index(self.transition.ket)


@dataclass(frozen=True)
class PulseSequence:
    pulses: Tuple[Pulse, ...] = ()
    U_us: float = 8.0
    tau_us: float = 0.0
    unit_delays: bool = False
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "pulses", tuple(self.pulses))
        if self.U_us < 0 or self.tau_us < 0:
            raise InvalidSequenceError("Timing units must be non-negative", U_us=self.U_us, tau_us=self.tau_us)
        positions = self.positions()
        for k in range(1, len(positions)):
            if positions[k] < positions[k - 1] - 1e-9:
                raise InvalidSequenceError(
                    f"Pulse {self.pulses[k].name or k} at {positions[k]:g} us precedes "
                    f"pulse {self.pulses[k - 1].name or k - 1} at {positions[k - 1]:g} us",
                    sequence=self.name,
                )

    def __len__(self) -> int:
        return len(self.pulses)

    def __iter__(self):
        return iter(self.pulses)

    def positions(self) -> np.ndarray:
        """Positions (us) that drive free evolution."""
        return np.array([p.position(self.U_us, self.tau_us, self.unit_delays) for p in self.pulses])

    def segments(self) -> List[Tuple[float, Pulse]]:
        """(free evolution before the pulse in us, pulse) in time order."""
        positions = self.positions()
        gaps = np.diff(positions, prepend=positions[0] if len(positions) else 0.0)
        return list(zip(gaps.tolist(), self.pulses))

    def pulse(self, name: str) -> Pulse:
        for p in self.pulses:
            if p.name == name:
                return p
        raise InvalidSequenceError(f"No pulse named {name!r}", sequence=self.name)

    def block(self, names: Iterable[str]) -> "PulseSequence":
        wanted = set(names)
        return replace(self, pulses=tuple(p for p in self.pulses if p.name in wanted))

    def with_overrides(
        self,
        phases: Optional[Mapping[str, float]] = None,
        angles: Optional[Mapping[str, float]] = None,
    ) -> "PulseSequence":
        phases, angles = phases or {}, angles or {}
        unknown = (set(phases) | set(angles)) - {p.name for p in self.pulses}
        if unknown:
            raise InvalidSequenceError(f"Overrides for unknown pulses: {sorted(unknown)}", sequence=self.name)
        pulses = tuple(
            replace(p, phase=phases.get(p.name, p.phase), angle=angles.get(p.name, p.angle))
            for p in self.pulses
        )
        return replace(self, pulses=pulses)

    def inverted(self) -> "PulseSequence":
        """Reversed order with negated angles; timing is dropped."""
        pulses = tuple(replace(p, angle=-p.angle, units=0.0, taus=0.0) for p in reversed(self.pulses))
        return replace(self, pulses=pulses, name=f"{self.name}^-1" if self.name else "")

    def then(self, other: "PulseSequence") -> "PulseSequence":
        """Append `other`, shifting its timing to start at this sequence's last pulse."""
        if not self.pulses:
            return replace(other, U_us=self.U_us, tau_us=self.tau_us, unit_delays=self.unit_delays)
        last = self.pulses[-1]
        shifted = tuple(replace(p, units=p.units + last.units, taus=p.taus + last.taus) for p in other.pulses)
        return replace(self, pulses=self.pulses + shifted)

    def propagator(self, view: LevelView, det: Optional[Detunings] = None,
                   scale: Optional[ScaleSource] = None, shots: Optional[int] = None) -> np.ndarray:
        """Composite unitary, shape (shots, dim, dim) when per-shot inputs are given."""
        eye = np.eye(view.dim, dtype=complex)
        if shots is not None:
            eye = np.array(np.broadcast_to(eye, (shots, view.dim, view.dim)))
        columns = apply_sequence(StateVector(eye, view), self, det, scale=scale)
        return _swap_last(columns.amplitudes)

    def to_table(self) -> Dict[str, object]:
        rows = []
        for p in self.pulses:
            row: Dict[str, object] = {"pulse": p.number if p.number is not None else p.name}
            if p.label in FREQUENCY_LABELS:
                row["frequency"] = p.label
            else:
                row["transition"] = [list(p.transition.bra), list(p.transition.ket)]
            row["position"] = format_position(p.units, p.taus)
            row["angle"] = format_angle(p.angle)
            row["phase"] = p.phase
            rows.append(row)
        return {"name": self.name, "U_us": self.U_us, "tau_us": self.tau_us, "pulses": rows}

    @classmethod
    def from_table(
        cls,
        rows: Sequence[Mapping[str, object]],
        U_us: float = 8.0,
        tau_us: float = 0.0,
        pm_sign: int = 1,
        unit_delays: bool = False,
        name: str = "",
    ) -> "PulseSequence":
        """Build a sequence from table rows in the order given.

        Row keys: pulse (number or name), frequency (f1/f2/f3/MW) or transition,
        position ("9U + 2tau"), angle ("+pi/3", "-pi", "±pi" or radians), phase
        (radians or "+x"/"-x"/"+y"/"-y"). "±" resolves to `pm_sign`.
        """
        pulses = []
        for k, row in enumerate(rows):
            ident = row.get("pulse", k + 1)
            number = int(ident) if isinstance(ident, (int, float)) and not isinstance(ident, bool) else None
            pulse_name = str(row.get("name") or (f"rf{number}" if number is not None else ident))
            if "frequency" in row:
                label = str(row["frequency"])
                if label not in FREQUENCY_LABELS:
                    raise InvalidSequenceError(f"Unknown frequency label {label!r}", pulse=pulse_name)
                transition = FREQUENCY_LABELS[label]
            elif "transition" in row:
                bra, ket = row["transition"]
                transition = TransitionLabel(bra=tuple(bra), ket=tuple(ket))
                label = ""
            else:
                raise InvalidSequenceError("Row needs a frequency label or a transition", pulse=pulse_name)
            units, taus = parse_position(str(row.get("position", "0")))
            pulses.append(
                Pulse(
                    transition=transition,
                    angle=parse_angle(row["angle"], pm_sign),
                    phase=parse_phase(row.get("phase", 0.0)),
                    units=units,
                    taus=taus,
                    name=pulse_name,
                    number=number,
                    label=label,
                )
            )
        return cls(pulses=tuple(pulses), U_us=U_us, tau_us=tau_us, unit_delays=unit_delays, name=name)


_POSITION_TERM = re.compile(r"^(?P<coef>\d+(?:\.\d+)?)?\s*\*?\s*(?P<sym>U|tau|τ)?$")
_ANGLE = re.compile(
    r"^(?P<sign>\+/-|[+\-±])?\s*(?P<num>\d+(?:\.\d+)?)?\s*\*?\s*(?:pi|π)(?:\s*/\s*(?P<den>\d+(?:\.\d+)?))?$"
)


def parse_position(expr: str) -> Tuple[float, float]:
    """'9U + 2tau' -> (9, 2)."""
    units = taus = 0.0
    for raw in expr.replace("-", "+-").split("+"):
        term = raw.strip()
        if not term:
            continue
        sign = -1.0 if term.startswith("-") else 1.0
        term = term.lstrip("-").strip()
        match = _POSITION_TERM.match(term)
        if not match or (match["coef"] is None and match["sym"] is None):
            raise InvalidSequenceError(f"Cannot parse position {expr!r}", position=expr)
        coef = sign * (float(match["coef"]) if match["coef"] else 1.0)
        if match["sym"] == "U":
            units += coef
        elif match["sym"] in ("tau", "τ"):
            taus += coef
        elif coef != 0:
            raise InvalidSequenceError(f"Position {expr!r} must be expressed in U and tau", position=expr)
    return units, taus


def _format_term(coef: float, symbol: str) -> str:
    if coef == 1:
        return symbol
    return f"{coef:g}{symbol}"


def format_position(units: float, taus: float) -> str:
    terms = [_format_term(c, s) for c, s in ((units, "U"), (taus, "tau")) if c]
    return " + ".join(terms).replace("+ -", "- ") or "0"


def parse_angle(value: object, pm_sign: int = 1) -> float:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    text = str(value).strip().replace(" ", "")
    match = _ANGLE.match(text)
    if not match:
        try:
            return float(text)
        except ValueError:
            raise InvalidSequenceError(f"Cannot parse angle {value!r}", angle=str(value))
    sign = {"-": -1.0, "±": float(pm_sign), "+/-": float(pm_sign)}.get(match["sign"], 1.0)
    num = float(match["num"]) if match["num"] else 1.0
    den = float(match["den"]) if match["den"] else 1.0
    return sign * num * math.pi / den


def format_angle(angle: float) -> str:
    ratio = Fraction(angle / math.pi).limit_denominator(12)
    if abs(float(ratio) * math.pi - angle) > 1e-12:
        return repr(angle)
    sign = "-" if ratio < 0 else "+"
    num, den = abs(ratio.numerator), ratio.denominator
    if num == 0:
        return "0"
    text = "pi" if num == 1 else f"{num}pi"
    return f"{sign}{text}" + (f"/{den}" if den != 1 else "")


def parse_phase(value: object) -> float:
    if isinstance(value, str):
        key = value.strip()
        if key in AXIS_PHASES:
            return AXIS_PHASES[key]
        return parse_angle(key)
    return float(value)


def load_pulse_table(path: Union[str, Path], pm_sign: int = 1, unit_delays: bool = False) -> PulseSequence:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as e:
        raise ConfigError(f"Cannot read pulse table {path}: {e.strerror}", location=str(path))
    except json.JSONDecodeError as e:
        raise ConfigError(f"Malformed JSON in {path}: {e.msg}", location=f"line {e.lineno}, column {e.colno}")
    if not isinstance(raw, dict) or "pulses" not in raw:
        raise ConfigError(f"Pulse table {path} has no 'pulses' list", location="pulses")
    return PulseSequence.from_table(
        raw["pulses"],
        U_us=float(raw.get("U_us", 8.0)),
        tau_us=float(raw.get("tau_us", 0.0)),
        pm_sign=pm_sign,
        unit_delays=unit_delays,
        name=str(raw.get("name", path.stem)),
    )


def save_pulse_table(seq: PulseSequence, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(json.dumps(seq.to_table(), indent=2) + "\n")
    return path


StateLike = Union[StateVector, DensityMatrix]
Hook = Callable[[StateLike], StateLike]


def apply_sequence(
    state: StateLike,
    seq: PulseSequence,
    det: Optional[Detunings] = None,
    scale: Optional[ScaleSource] = None,
    after: Optional[Mapping[str, Hook]] = None,
    free: Optional[Callable[[StateLike, float], StateLike]] = None,
) -> StateLike:
    """Propagate a state vector or density matrix through `seq` in time order.

    scale: per-pulse angle factor (scalar or per-shot array over the leading axis).
    after: callables applied to the state right after the named pulse.
    free: replaces detuned free evolution, called with (state, gap_us).
    """
    det = det or Detunings.zero()
    after = after or {}
    is_density = isinstance(state, DensityMatrix)
    view = state.view

    if free is None:
        free = (lambda s, t: free_evolution_density(s, t, det)) if is_density else (
            lambda s, t: free_evolution_phases(s, t, det)
        )

    for gap, pulse in seq.segments():
        if gap > 0:
            state = free(state, gap)
        i, j = pulse.levels(view)
        angle: ArrayLike = pulse.angle
        if scale is not None:
            angle = pulse.angle * np.asarray(scale(pulse), dtype=float)
        if is_density:
            state = DensityMatrix(_rotate_density(state.matrix, i, j, angle, pulse.phase), view)
        else:
            state = StateVector(_rotate(state.amplitudes, i, j, angle, pulse.phase), view)
        if pulse.name in after:
            state = after[pulse.name](state)
    return state


@dataclass(frozen=True)
class PhaseCycleStep:
    sign: int
    phases: Mapping[str, float] = field(default_factory=dict)
    angles: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise InvalidArgumentError("Receiver sign must be +1 or -1", sign=self.sign)

    def apply(self, seq: PulseSequence) -> PulseSequence:
        return seq.with_overrides(phases=self.phases, angles=self.angles)


@dataclass(frozen=True)
class PhaseCycle:
    steps: Tuple[PhaseCycleStep, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if not self.steps:
            raise InvalidArgumentError("Phase cycle needs at least one step", cycle=self.name)

    @property
    def balanced(self) -> bool:
        return sum(step.sign for step in self.steps) == 0

    @classmethod
    def single(cls) -> "PhaseCycle":
        return cls(steps=(PhaseCycleStep(sign=1),), name="single")


@dataclass(frozen=True)
class SpuriousSignals:
    """Unwanted echo pathways added to every acquisition.

    offset: detector baseline, independent of every pulse phase.
    electron_echo: echo from the MW pulses alone; follows the phase of `mw_pulse`
    and ignores RF phases.
    """

    offset: complex = 0j
    electron_echo: complex = 0j
    mw_pulse: str = "mw_pi2"

    def evaluate(self, seq: PulseSequence) -> complex:
        value = complex(self.offset)
        if self.electron_echo:
            value += complex(self.electron_echo) * np.exp(1j * seq.pulse(self.mw_pulse).phase)
        return value


def run_phase_cycle(
    seq: PulseSequence,
    cycle: PhaseCycle,
    observable: Callable[[PulseSequence], complex],
    spurious: Optional[SpuriousSignals] = None,
) -> complex:
    """Receiver-signed average of `observable` over the cycle steps."""
    total = 0j
    for step in cycle.steps:
        variant = step.apply(seq)
        signal = complex(observable(variant))
        if spurious is not None:
            signal += spurious.evaluate(variant)
        total += step.sign * signal
    result = total / len(cycle.steps)
    logger.debug(f"Phase cycle {cycle.name or '<anon>'} over {len(cycle.steps)} steps -> {result:.6g}")
    return result

import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..core.config import settings
from ..core.errors import ConfigError
from .spin import SpinParams


class SweepVariable(str, Enum):
    THETA = "theta"
    STORAGE_TIME = "storage_time"


class SweepSpec(BaseModel):
    """Linear grid; theta in radians, storage time (2 tau) in ms."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    variable: SweepVariable
    start: float
    stop: float
    points: int = Field(..., ge=1)

    @model_validator(mode="after")
    def check_range(self) -> "SweepSpec":
        if not (math.isfinite(self.start) and math.isfinite(self.stop)):
            raise ValueError("sweep bounds must be finite")
        if self.points > 1 and self.start == self.stop:
            raise ValueError("sweep range is empty")
        if self.variable == SweepVariable.THETA and max(abs(self.start), abs(self.stop)) > math.pi:
            raise ValueError("theta sweep must stay within [-pi, pi]")
        if self.variable == SweepVariable.STORAGE_TIME and min(self.start, self.stop) < 0:
            raise ValueError("storage time must be non-negative")
        return self

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)


class RelaxationConfig(BaseModel):
    """Relaxation times plus the grid of the relaxation experiments."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    T1e_ms: float = Field(1.3, gt=0)
    T2e_us: float = Field(80.0, gt=0)
    T2n_ms: float = Field(1.05, gt=0)
    points: int = Field(25, ge=4)
    span: float = Field(5.0, gt=0, description="grid length in units of each time constant")
    noise: float = Field(0.0, ge=0, description="Gaussian noise on the normalised signals")


class InhomogeneityConfig(BaseModel):
    """B1 inhomogeneity and static detuning spread.

    sigma_MW / sigma_RF default to the values implied by the quoted pulse fidelities.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    mw_fidelity: float = Field(0.995, gt=2 / 3, le=1)
    rf_fidelity: float = Field(0.935, gt=2 / 3, le=1)
    sigma_MW: Optional[float] = Field(None, ge=0)
    sigma_RF: Optional[float] = Field(None, ge=0)
    detuning_sigma_MHz: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    correlated: bool = Field(True, description="one B1 scaling per spin packet and pulse kind")

    @field_validator("detuning_sigma_MHz")
    @classmethod
    def validate_spread(cls, v: Tuple[float, float, float]) -> Tuple[float, float, float]:
        if any(not (math.isfinite(s) and s >= 0) for s in v):
            raise ValueError("detuning spreads must be finite and non-negative")
        return v

    def resolved_sigmas(self) -> Tuple[float, float]:
        from ..physics.decoherence import sigma_from_fidelity

        sigma_mw = self.sigma_MW if self.sigma_MW is not None else sigma_from_fidelity(self.mw_fidelity)
        sigma_rf = self.sigma_RF if self.sigma_RF is not None else sigma_from_fidelity(self.rf_fidelity)
        return sigma_mw, sigma_rf


class TimingConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    U_us: float = Field(8.0, gt=0)
    tau_ms: float = Field(0.1, ge=0, description="free-evolution period of the theta sweep")


class SpuriousConfig(BaseModel):
    """Unwanted signal pathways injected on every acquisition (zero by default)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    offset: Tuple[float, float] = (0.0, 0.0)
    electron_echo: Tuple[float, float] = (0.0, 0.0)


class FitConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    order: int = Field(5, ge=1)
    weights: Tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)

    @field_validator("weights")
    @classmethod
    def validate_weights(cls, v: Tuple[float, float, float, float]) -> Tuple[float, float, float, float]:
        if any(not (math.isfinite(w) and w > 0) for w in v):
            raise ValueError("channel weights must be positive")
        return v


class FidelityConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    nutation_max_turns: int = Field(7, ge=2, description="largest nominal rotation in units of pi")
    nutation_points: int = Field(281, ge=16)
    dd_points: int = Field(33, ge=9)
    dd_pulse_counts: Tuple[int, ...] = (2, 4)
    shots: int = Field(20000, ge=1)

    @field_validator("dd_pulse_counts")
    @classmethod
    def validate_counts(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        if not v or any(n not in (2, 4) for n in v):
            raise ValueError("decoupling trains use 2 or 4 pulses")
        return v


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    spin: SpinParams = Field(default_factory=SpinParams)
    relaxation: RelaxationConfig = Field(default_factory=RelaxationConfig)
    inhomogeneity: InhomogeneityConfig = Field(default_factory=InhomogeneityConfig)
    timing: TimingConfig = Field(default_factory=TimingConfig)
    theta_sweep: SweepSpec = SweepSpec(variable=SweepVariable.THETA, start=-1.0, stop=1.0, points=81)
    storage_sweep: SweepSpec = SweepSpec(
        variable=SweepVariable.STORAGE_TIME, start=0.2, stop=6.0, points=30
    )
    shots: int = Field(default_factory=lambda: settings.DEFAULT_SHOTS, ge=1)
    seed: int = Field(20240517, ge=0)
    refocus: bool = True
    green_pulses: bool = True
    ideal_pulses: bool = False
    phase_cycling: bool = True
    allow_double_quantum: bool = True
    spurious: SpuriousConfig = Field(default_factory=SpuriousConfig)
    fit: FitConfig = Field(default_factory=FitConfig)
    fidelity: FidelityConfig = Field(default_factory=FidelityConfig)

    @field_validator("theta_sweep")
    @classmethod
    def validate_theta_sweep(cls, v: SweepSpec) -> SweepSpec:
        if v.variable != SweepVariable.THETA:
            raise ValueError("theta_sweep must sweep 'theta'")
        return v

    @field_validator("storage_sweep")
    @classmethod
    def validate_storage_sweep(cls, v: SweepSpec) -> SweepSpec:
        if v.variable != SweepVariable.STORAGE_TIME:
            raise ValueError("storage_sweep must sweep 'storage_time'")
        return v

    @property
    def tau_us(self) -> float:
        return self.timing.tau_ms * 1000.0

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json", by_alias=True), sort_keys=True, separators=(",", ":"))


class RunManifest(BaseModel):
    command: str
    run_id: str
    version: str
    seed: int
    timestamp: str
    config: Dict[str, Any]
    outputs: List[str] = Field(default_factory=list)


def _location(error: Dict[str, Any]) -> str:
    return ".".join(str(part) for part in error.get("loc", ())) or "<root>"


def load_experiment_config(path: Optional[Union[str, Path]] = None) -> ExperimentConfig:
    """Read and validate a JSON experiment config; no path means built-in defaults."""
    if path is None:
        return ExperimentConfig()

    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e.strerror}", location=str(path))

    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(
            f"Malformed JSON in {path}: {e.msg} at line {e.lineno} column {e.colno}",
            location=f"line {e.lineno}, column {e.colno}",
        )

    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        problems = "; ".join(f"{_location(err)}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"Invalid config {path}: {problems}", location=_location(first))

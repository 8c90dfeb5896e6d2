import math
from typing import Dict, Iterable, List, Optional

import pandas as pd
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

ECHO_COLUMNS = ["sweep_var", "I_half_x", "I_half_y", "I_threehalf_x", "I_threehalf_y"]


class EchoRecord(BaseModel):
    """The four detected echo components at one sweep point."""

    model_config = ConfigDict(frozen=True)

    sweep_var: float
    I_half_x: float
    I_half_y: float
    I_threehalf_x: float
    I_threehalf_y: float

    @field_validator("*")
    @classmethod
    def validate_finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("echo components must be finite")
        return v

    @classmethod
    def from_echoes(cls, sweep_var: float, half: complex, threehalf: complex) -> "EchoRecord":
        return cls(
            sweep_var=float(sweep_var),
            I_half_x=float(half.real),
            I_half_y=float(half.imag),
            I_threehalf_x=float(threehalf.real),
            I_threehalf_y=float(threehalf.imag),
        )

    @property
    def half(self) -> complex:
        return complex(self.I_half_x, self.I_half_y)

    @property
    def threehalf(self) -> complex:
        return complex(self.I_threehalf_x, self.I_threehalf_y)


class FitResult(BaseModel):
    """Parameters of a least-squares fit with linearised 1σ uncertainties."""

    model_config = ConfigDict(frozen=True)

    kind: str
    params: Dict[str, float]
    sigmas: Optional[Dict[str, float]] = None
    residual: Optional[float] = None
    converged: bool
    seed: Optional[int] = None
    message: str = ""

    @model_validator(mode="after")
    def check_uncertainties(self) -> "FitResult":
        if not self.converged:
            if self.sigmas is not None:
                raise ValueError("uncertainties are only reported for converged fits")
            return self
        if self.sigmas is None:
            raise ValueError("converged fits must report uncertainties")
        if any(not (s >= 0) for s in self.sigmas.values()):
            raise ValueError("uncertainties must be non-negative")
        return self

    def ratios(self, reference: str = "A0") -> Dict[str, float]:
        ref = self.params[reference]
        return {name: value / ref for name, value in self.params.items()}

    def to_payload(self) -> Dict[str, object]:
        return self.model_dump(include={"params", "sigmas", "residual", "converged", "seed"})


def records_to_frame(records: Iterable[EchoRecord]) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in records], columns=ECHO_COLUMNS)


def frame_to_records(frame: pd.DataFrame) -> List[EchoRecord]:
    missing = [c for c in ECHO_COLUMNS if c not in frame.columns]
    if missing:
        raise ValueError(f"missing columns: {', '.join(missing)}")
    return [EchoRecord(**row) for row in frame[ECHO_COLUMNS].to_dict(orient="records")]

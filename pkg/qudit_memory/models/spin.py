import math
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Label = Tuple[float, float]


class SpinParams(BaseModel):
    """Static spin Hamiltonian constants.

    Energies are linear frequencies; the electron ratio is in GHz/T, everything else in MHz.
    JSON keys carry their units, attribute names stay short.
    """

    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="forbid")

    gamma_S: float = Field(28.02, alias="gamma_S_GHz_per_T")
    gamma_I: float = Field(-10.96, alias="gamma_I_MHz_per_T")
    A_hf: float = Field(-220.0, alias="A_hf_MHz")
    D: float = Field(707.0, alias="D_MHz")
    B_z: float = Field(0.3443, alias="B_z_T")

    @field_validator("gamma_S", "gamma_I", "A_hf", "D", "B_z")
    @classmethod
    def validate_finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("must be finite")
        return v

    @field_validator("B_z")
    @classmethod
    def validate_field(cls, v: float) -> float:
        if v < 0:
            raise ValueError("static field must be non-negative")
        return v

    @property
    def gamma_S_MHz(self) -> float:
        return self.gamma_S * 1000.0


class TransitionLabel(BaseModel):
    """A two-level transition between product-state labels (m_S, m_I)."""

    model_config = ConfigDict(frozen=True)

    bra: Label
    ket: Label
    frequency: Optional[float] = None

    @model_validator(mode="after")
    def check_addressable(self) -> "TransitionLabel":
        if self.delta_m_S == 0 and self.delta_m_I == 0:
            raise ValueError(f"transition {self.bra} <-> {self.ket} connects a level to itself")
        if self.delta_m_S > 1 or self.delta_m_I > 2:
            raise ValueError(f"transition {self.bra} <-> {self.ket} is not addressable")
        if self.frequency is not None and not (math.isfinite(self.frequency) and self.frequency >= 0):
            raise ValueError("frequency must be finite and non-negative")
        return self

    @property
    def delta_m_S(self) -> float:
        return abs(self.ket[0] - self.bra[0])

    @property
    def delta_m_I(self) -> float:
        return abs(self.ket[1] - self.bra[1])

    @property
    def kind(self) -> str:
        return "MW" if self.delta_m_S else "RF"

    def __str__(self) -> str:
        def fmt(label: Label) -> str:
            return f"|{label[0]:+g},{label[1]:+g}>"
        return f"{fmt(self.bra)}<->{fmt(self.ket)}"


def transition(bra: Label, ket: Label) -> TransitionLabel:
    return TransitionLabel(bra=bra, ket=ket)


# Lines driven by the experiment, named as in the pulse table.
F1 = transition((-0.5, -1.5), (-0.5, -0.5))
F2 = transition((-0.5, -0.5), (-0.5, 0.5))
F3 = transition((-0.5, 0.5), (-0.5, 1.5))
MW = transition((-0.5, -0.5), (0.5, -0.5))

FREQUENCY_LABELS = {"f1": F1, "f2": F2, "f3": F3, "MW": MW}

"""State vectors and density matrices over a LevelView.

Amplitude arrays may carry leading ensemble axes: shape (..., dim).
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..core.errors import InvalidArgumentError, InvalidStateError
from .spin_system import EXPERIMENT_VIEW, LevelView, SpinSystem

# h / k_B in kelvin per MHz
KELVIN_PER_MHZ = 4.799243073e-5


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    view: LevelView

    def __post_init__(self):
        amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if amplitudes.ndim == 0 or amplitudes.shape[-1] != self.view.dim:
            raise InvalidArgumentError(
                f"Amplitudes of shape {amplitudes.shape} do not match a {self.view.dim}-level view",
                view=self.view.name,
            )
        object.__setattr__(self, "amplitudes", amplitudes)

    @classmethod
    def basis_state(cls, view: LevelView, label) -> "StateVector":
        amplitudes = np.zeros(view.dim, dtype=complex)
        amplitudes[view.index(label)] = 1.0
        return cls(amplitudes, view)

    @property
    def shots(self) -> Optional[int]:
        return self.amplitudes.shape[0] if self.amplitudes.ndim > 1 else None

    def norm(self) -> np.ndarray:
        return np.linalg.norm(self.amplitudes, axis=-1)

    def normalized(self) -> "StateVector":
        return StateVector(self.amplitudes / self.norm()[..., None], self.view)

    def amplitude(self, label) -> np.ndarray:
        return self.amplitudes[..., self.view.index(label)]

    def embed(self, view: LevelView) -> "StateVector":
        """Zero-pad into a larger view containing every level of this one."""
        out = np.zeros(self.amplitudes.shape[:-1] + (view.dim,), dtype=complex)
        for k, label in enumerate(self.view.labels):
            out[..., view.index(label)] = self.amplitudes[..., k]
        return StateVector(out, view)

    def restrict(self, view: LevelView) -> "StateVector":
        """Project onto a smaller view (unnormalised)."""
        indices = [self.view.index(label) for label in view.labels]
        return StateVector(self.amplitudes[..., indices], view)

    def density(self) -> "DensityMatrix":
        """Pure-state projector, averaged over any ensemble axis."""
        psi = self.amplitudes.reshape(-1, self.view.dim)
        rho = np.einsum("si,sj->ij", psi, psi.conj()) / psi.shape[0]
        return DensityMatrix(rho, self.view)


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray
    view: LevelView

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=complex)
        if matrix.shape[-2:] != (self.view.dim, self.view.dim):
            raise InvalidArgumentError(
                f"Density matrix of shape {matrix.shape} does not match a {self.view.dim}-level view"
            )
        object.__setattr__(self, "matrix", matrix)

    def trace(self) -> np.ndarray:
        return np.trace(self.matrix, axis1=-2, axis2=-1)

    def validate(self, tolerance: float = 1e-9) -> "DensityMatrix":
        matrix = self.matrix
        if not np.all(np.isfinite(matrix)):
            raise InvalidStateError("Density matrix has non-finite entries")
        hermitian_gap = np.max(np.abs(matrix - np.swapaxes(matrix.conj(), -1, -2)))
        if hermitian_gap > tolerance:
            raise InvalidStateError("Density matrix is not Hermitian", gap=float(hermitian_gap))
        trace_gap = np.max(np.abs(self.trace() - 1.0))
        if trace_gap > tolerance:
            raise InvalidStateError("Density matrix does not have unit trace", gap=float(trace_gap))
        lowest = np.min(np.linalg.eigvalsh((matrix + np.swapaxes(matrix.conj(), -1, -2)) / 2))
        if lowest < -tolerance:
            raise InvalidStateError("Density matrix is not positive semidefinite", eigenvalue=float(lowest))
        return self

    def element(self, row_label, column_label) -> np.ndarray:
        return self.matrix[..., self.view.index(row_label), self.view.index(column_label)]

    def conjugate_by(self, unitary: np.ndarray) -> "DensityMatrix":
        """U rho U^dagger; U may carry the same leading axes as rho."""
        u_dag = np.swapaxes(np.conj(unitary), -1, -2)
        return DensityMatrix(unitary @ self.matrix @ u_dag, self.view)


def fidelity(a: StateVector, b: StateVector) -> float:
    """Global-phase invariant overlap |<a|b>|^2 / (|a|^2 |b|^2)."""
    if a.view != b.view:
        raise InvalidArgumentError("States live in different views")
    overlap = np.vdot(a.amplitudes, b.amplitudes)
    return float(np.abs(overlap) ** 2 / (np.vdot(a.amplitudes, a.amplitudes).real * np.vdot(b.amplitudes, b.amplitudes).real))


def thermal_state(system: SpinSystem, temperature_K: float, view: LevelView = EXPERIMENT_VIEW) -> DensityMatrix:
    """Boltzmann populations of the view's eigenlevels, renormalised within the view."""
    if not temperature_K > 0:
        raise InvalidArgumentError("Temperature must be positive", temperature_K=temperature_K)
    energies = np.array([system.energy(label) for label in view.labels])
    weights = np.exp(-(energies - energies.min()) * KELVIN_PER_MHZ / temperature_K)
    return DensityMatrix(np.diag(weights / weights.sum()), view)


def pseudo_pure_decomposition(rho: DensityMatrix) -> Tuple[float, float, int, float]:
    """Split a diagonal state into c*identity + w*|k><k|.

    Returns (c, w, k, residual) where k is the level standing out from the rest and
    residual the largest deviation of the remaining populations from c.
    """
    matrix = rho.matrix
    if matrix.ndim != 2:
        raise InvalidArgumentError("Decomposition needs a single density matrix")
    if np.max(np.abs(matrix - np.diag(np.diag(matrix)))) > 1e-12:
        raise InvalidStateError("Pseudo-pure decomposition needs a diagonal state")

    populations = np.diag(matrix).real
    k = int(np.argmax(np.abs(populations - np.median(populations))))
    others = np.delete(populations, k)
    c = float(others.mean())
    w = float(populations[k] - c)
    residual = float(np.max(np.abs(others - c))) if others.size else 0.0
    return c, w, k, residual

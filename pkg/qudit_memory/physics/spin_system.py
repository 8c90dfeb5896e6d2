"""Spin operators, the static electron-nuclear Hamiltonian and its labelled eigensystem.

Product basis ordering is m_S ascending (outer) then m_I ascending (inner). Energies are
linear frequencies in MHz.
"""
import itertools
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from ..core.errors import InvalidArgumentError, InvalidSequenceError, LabelingError
from ..models.spin import Label, SpinParams, TransitionLabel

logger = logging.getLogger(__name__)

LABEL_OVERLAP_THRESHOLD = 0.5


def spin_operators(s: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Angular momentum matrices (Sx, Sy, Sz) with Sz = diag(s, s-1, ..., -s)."""
    two_s = 2 * s
    if not np.isfinite(two_s) or s < 0 or abs(two_s - round(two_s)) > 1e-12:
        raise InvalidArgumentError(f"Spin quantum number must be a non-negative half-integer, got {s}", s=s)

    m = s - np.arange(int(round(two_s)) + 1)
    s_plus = np.diag(np.sqrt(s * (s + 1) - m[1:] * (m[1:] + 1)), k=1).astype(complex)
    s_minus = s_plus.conj().T
    sx = (s_plus + s_minus) / 2
    sy = (s_plus - s_minus) / 2j
    sz = np.diag(m).astype(complex)
    return sx, sy, sz


def _ascending(ops: Tuple[np.ndarray, ...]) -> Tuple[np.ndarray, ...]:
    return tuple(op[::-1, ::-1] for op in ops)


def magnetic_numbers(s: float) -> np.ndarray:
    return -s + np.arange(int(round(2 * s)) + 1)


@dataclass(frozen=True)
class LevelView:
    """An ordered selection of product-basis levels a state is expressed in."""

    labels: Tuple[Label, ...]
    name: str = ""

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise InvalidArgumentError("Level view contains duplicate labels", view=self.name)

    @property
    def dim(self) -> int:
        return len(self.labels)

    @cached_property
    def _lookup(self) -> Dict[Label, int]:
        return {label: k for k, label in enumerate(self.labels)}

    def __contains__(self, label: Label) -> bool:
        return tuple(label) in self._lookup

    def index(self, label: Label) -> int:
        try:
            return self._lookup[tuple(label)]
        except KeyError:
            raise InvalidSequenceError(
                f"Level {tuple(label)} is not part of the {self.name or 'current'} view",
                label=list(label),
                view=self.name,
            )

    @property
    def m_S(self) -> np.ndarray:
        return np.array([label[0] for label in self.labels])

    @property
    def m_I(self) -> np.ndarray:
        return np.array([label[1] for label in self.labels])


NUCLEAR_VIEW = LevelView(
    labels=((-0.5, -1.5), (-0.5, -0.5), (-0.5, 0.5), (-0.5, 1.5)),
    name="nuclear",
)
EXPERIMENT_VIEW = LevelView(labels=NUCLEAR_VIEW.labels + ((0.5, -0.5),), name="experiment")
# Experiment levels first so indices agree with EXPERIMENT_VIEW.
PROTOCOL_VIEW = LevelView(
    labels=EXPERIMENT_VIEW.labels + ((0.5, 0.5), (0.5, -1.5), (0.5, 1.5)),
    name="protocol",
)


def full_view(s: float = 2.5, i: float = 2.5) -> LevelView:
    labels = tuple(
        (float(ms), float(mi)) for ms, mi in itertools.product(magnetic_numbers(s), magnetic_numbers(i))
    )
    return LevelView(labels=labels, name="full")


@dataclass(frozen=True)
class SpinSystem:
    S: float
    I: float
    params: SpinParams
    hamiltonian: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    allow_double_quantum: bool = True
    basis: LevelView = field(default=None)

    def __post_init__(self):
        if self.basis is None:
            object.__setattr__(self, "basis", full_view(self.S, self.I))
        for array in (self.hamiltonian, self.eigenvalues, self.eigenvectors):
            array.flags.writeable = False

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    @cached_property
    def labels(self) -> Tuple[Label, ...]:
        """Dominant product label of every eigenvector, by eigen index."""
        weights = np.abs(self.eigenvectors) ** 2
        dominant = np.argmax(weights, axis=0)
        labels = []
        for j, k in enumerate(dominant):
            if weights[k, j] < LABEL_OVERLAP_THRESHOLD:
                raise LabelingError(j, float(weights[k, j]))
            labels.append(self.basis.labels[k])
        if len(set(labels)) != len(labels):
            # Two eigenvectors claim the same product state; report the weaker one.
            seen: Dict[Label, int] = {}
            for j, label in enumerate(labels):
                if label in seen:
                    clash = min((seen[label], j), key=lambda c: weights[dominant[c], c])
                    raise LabelingError(clash, float(weights[dominant[clash], clash]))
                seen[label] = j
        return tuple(labels)

    @cached_property
    def _eigen_lookup(self) -> Dict[Label, int]:
        return {label: j for j, label in enumerate(self.labels)}

    def eigen_index(self, label: Label) -> int:
        return self._eigen_lookup[tuple(label)]

    def label_of(self, eigen_index: int) -> Label:
        return self.labels[eigen_index]

    def energy(self, label: Label) -> float:
        return float(self.eigenvalues[self.eigen_index(label)])

    def eigenstate(self, label: Label) -> np.ndarray:
        return self.eigenvectors[:, self.eigen_index(label)]

    def frequency(self, bra: Label, ket: Label) -> float:
        return abs(self.energy(ket) - self.energy(bra))


def build_hamiltonian(
    params: Optional[SpinParams] = None,
    S: float = 2.5,
    I: float = 2.5,
    allow_double_quantum: bool = True,
) -> SpinSystem:
    params = params or SpinParams()
    sx, sy, sz = _ascending(spin_operators(S))
    ix, iy, iz = _ascending(spin_operators(I))
    e_s = np.eye(sz.shape[0])
    e_i = np.eye(iz.shape[0])

    zeeman = (params.gamma_S_MHz * np.kron(sz, e_i) + params.gamma_I * np.kron(e_s, iz)) * params.B_z
    hyperfine = params.A_hf * (np.kron(sx, ix) + np.kron(sy, iy) + np.kron(sz, iz))
    zero_field = params.D * np.kron(sz @ sz, e_i)
    hamiltonian = zeeman + hyperfine - zero_field
    hamiltonian = (hamiltonian + hamiltonian.conj().T) / 2

    eigenvalues, eigenvectors = linalg.eigh(hamiltonian)
    logger.debug(f"Diagonalised {hamiltonian.shape[0]}-level Hamiltonian at B_z={params.B_z} T")
    return SpinSystem(
        S=S,
        I=I,
        params=params,
        hamiltonian=hamiltonian,
        eigenvalues=eigenvalues,
        eigenvectors=eigenvectors,
        allow_double_quantum=allow_double_quantum,
    )


def _addressable(bra: Label, ket: Label) -> bool:
    d_s, d_i = abs(ket[0] - bra[0]), abs(ket[1] - bra[1])
    return bool(d_s or d_i) and d_s <= 1 and d_i <= 2


def transition_frequencies(system: SpinSystem, kind: str = "addressable") -> List[TransitionLabel]:
    """Labelled transition frequencies in MHz, ascending.

    kind: "addressable" (|dm_S| <= 1, |dm_I| <= 2), "nmr" (dm_S = 0, |dm_I| = 1) or
    "esr" (|dm_S| = 1, dm_I = 0).
    """
    selectors = {
        "addressable": lambda d_s, d_i: True,
        "nmr": lambda d_s, d_i: d_s == 0 and d_i == 1,
        "esr": lambda d_s, d_i: d_s == 1 and d_i == 0,
    }
    if kind not in selectors:
        raise InvalidArgumentError(f"Unknown transition filter {kind!r}", kind=kind)
    select = selectors[kind]

    labels = sorted(system.labels)
    lines = []
    for bra, ket in itertools.combinations(labels, 2):
        if not _addressable(bra, ket):
            continue
        if not select(abs(ket[0] - bra[0]), abs(ket[1] - bra[1])):
            continue
        lines.append(TransitionLabel(bra=bra, ket=ket, frequency=system.frequency(bra, ket)))
    return sorted(lines, key=lambda t: (t.frequency, t.bra, t.ket))


def esr_transitions(system: SpinSystem) -> List[TransitionLabel]:
    """Allowed electron lines (dm_S = 1, dm_I = 0), ascending."""
    return transition_frequencies(system, "esr")


def nmr_lines(system: SpinSystem, m_S: float = -0.5) -> Dict[str, TransitionLabel]:
    """The three I=3/2 nuclear lines f1, f2, f3 inside one electron manifold."""
    pairs = {"f1": (-1.5, -0.5), "f2": (-0.5, 0.5), "f3": (0.5, 1.5)}
    return {
        name: TransitionLabel(
            bra=(m_S, lo), ket=(m_S, hi), frequency=system.frequency((m_S, lo), (m_S, hi))
        )
        for name, (lo, hi) in pairs.items()
    }


@dataclass(frozen=True)
class SubspaceProjection:
    view: LevelView
    product_indices: Tuple[int, ...]
    eigen_indices: Tuple[int, ...]
    eigenbasis: np.ndarray

    def in_view_norms(self) -> np.ndarray:
        """Norm of each view eigenstate restricted to the view's product states."""
        block = self.eigenbasis[list(self.product_indices), :]
        return np.linalg.norm(block, axis=0)


def subspace_projection(system: SpinSystem, view: LevelView = EXPERIMENT_VIEW) -> SubspaceProjection:
    product_indices = tuple(system.basis.index(label) for label in view.labels)
    eigen_indices = tuple(system.eigen_index(label) for label in view.labels)
    return SubspaceProjection(
        view=view,
        product_indices=product_indices,
        eigen_indices=eigen_indices,
        eigenbasis=system.eigenvectors[:, list(eigen_indices)],
    )


def degenerate_groups(lines: Sequence[TransitionLabel], tolerance: float = 1e-6) -> List[Tuple[int, ...]]:
    """Groups of indices into `lines` whose frequencies agree within tolerance (MHz)."""
    groups: List[Tuple[int, ...]] = []
    order = sorted(range(len(lines)), key=lambda k: lines[k].frequency)
    current: List[int] = []
    for k in order:
        if current and lines[k].frequency - lines[current[-1]].frequency > tolerance:
            if len(current) > 1:
                groups.append(tuple(sorted(current)))
            current = []
        current.append(k)
    if len(current) > 1:
        groups.append(tuple(sorted(current)))
    return groups

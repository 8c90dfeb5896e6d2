import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from ..core.config import resolve_jobs, settings
from ..models.experiment import ExperimentConfig
from ..models.records import EchoRecord
from ..models.spin import FREQUENCY_LABELS, MW
from ..physics.decoherence import (
    ElectronRelaxationModel,
    InhomogeneityModel,
    LindbladModel,
    electron_relax,
    lindblad_evolve,
    z_error_exact,
)
from ..physics.pulses import (
    Detunings,
    PhaseCycle,
    Pulse,
    PulseSequence,
    ScaleSource,
    SpuriousSignals,
    apply_sequence,
    free_evolution_density,
    run_phase_cycle,
)
from ..physics.readout import echo_from_state, electron_coherence
from ..physics.sequences import (
    PATHWAYS,
    coherence_transfer_sequence,
    hahn_echo_sequence,
    inversion_recovery_sequence,
    qec_phase_cycle,
    qec_pulse_table,
)
from ..physics.spin_system import (
    EXPERIMENT_VIEW,
    NUCLEAR_VIEW,
    build_hamiltonian,
    degenerate_groups,
    esr_transitions,
    nmr_lines,
    transition_frequencies,
)
from ..physics.states import DensityMatrix, StateVector

logger = logging.getLogger(__name__)

# pseudo-pure start on |+1/2,-1/2>; the identity part never forms an echo
INITIAL_LEVEL = (0.5, -0.5)


class Ensemble:
    """Per-shot detunings and B1 scalings for one sweep point."""

    def __init__(self, model: InhomogeneityModel, rng: np.random.Generator, shots: int):
        self.shots = None
        self.det = Detunings.zero()
        self.scale: Optional[ScaleSource] = None
        if model.is_ideal:
            return
        self.shots = shots
        if any(model.detuning_sigma_MHz):
            self.det = model.draw_detunings(rng, shots)
        if model.sigma_MW or model.sigma_RF:
            self.scale = model.scale_source(rng, shots)

    def initial_state(self) -> StateVector:
        psi = StateVector.basis_state(EXPERIMENT_VIEW, INITIAL_LEVEL).amplitudes
        if self.shots is not None:
            psi = np.broadcast_to(psi, (self.shots, psi.size))
        return StateVector(np.array(psi), EXPERIMENT_VIEW)

    def initial_density(self) -> DensityMatrix:
        psi = self.initial_state().amplitudes
        if psi.ndim == 1:
            psi = psi[None, :]
        return DensityMatrix(psi[..., :, None] * psi.conj()[..., None, :], EXPERIMENT_VIEW)


def _inhomogeneity(config: ExperimentConfig) -> InhomogeneityModel:
    model = InhomogeneityModel.from_config(config.inhomogeneity)
    if config.ideal_pulses:
        model = replace(model, sigma_MW=0.0, sigma_RF=0.0)
    return model


def _cycle(config: ExperimentConfig) -> PhaseCycle:
    return qec_phase_cycle(config.refocus) if config.phase_cycling else PhaseCycle.single()


def _spurious(config: ExperimentConfig) -> Optional[SpuriousSignals]:
    offset = complex(*config.spurious.offset)
    electron = complex(*config.spurious.electron_echo)
    if not offset and not electron:
        return None
    return SpuriousSignals(offset=offset, electron_echo=electron)


def _acquire(
    config: ExperimentConfig,
    tau_us: float,
    initial,
    ensemble: Ensemble,
    after: Optional[Dict[str, Callable]] = None,
    free: Optional[Callable] = None,
) -> Dict[str, complex]:
    """Phase-cycled echoes of both readout pathways."""
    cycle, spurious = _cycle(config), _spurious(config)
    echoes = {}
    for variant in PATHWAYS:
        seq = qec_pulse_table(
            variant,
            U_us=config.timing.U_us,
            tau_us=tau_us,
            refocus=config.refocus,
            green=config.green_pulses,
        )

        def observable(step: PulseSequence, variant=variant) -> complex:
            final = apply_sequence(initial, step, ensemble.det, ensemble.scale, after=after, free=free)
            return echo_from_state(final, variant)

        echoes[variant] = run_phase_cycle(seq, cycle, observable, spurious)
    return echoes


def theta_point(task: Tuple[ExperimentConfig, float, np.random.SeedSequence]) -> EchoRecord:
    """Encode, Z(theta), refocus and read out both pathways at one theta."""
    config, theta, seed = task
    ensemble = Ensemble(_inhomogeneity(config), np.random.default_rng(seed), config.shots)
    after = {"rf4": lambda state: z_error_exact(state, theta)}
    echoes = _acquire(config, config.tau_us, ensemble.initial_state(), ensemble, after=after)
    return EchoRecord.from_echoes(theta, echoes["half"], echoes["threehalf"])


def storage_point(task: Tuple[ExperimentConfig, float, np.random.SeedSequence]) -> EchoRecord:
    """Unperturbed pipeline with nuclear dephasing over a total storage time 2 tau (ms)."""
    config, storage_ms, seed = task
    ensemble = Ensemble(_inhomogeneity(config), np.random.default_rng(seed), config.shots)
    lindblad = LindbladModel(config.relaxation.T2n_ms)

    def free(rho: DensityMatrix, gap_us: float) -> DensityMatrix:
        rho = free_evolution_density(rho, gap_us, ensemble.det)
        return lindblad_evolve(rho, gap_us / 1000.0, lindblad)

    echoes = _acquire(config, storage_ms * 1000.0 / 2, ensemble.initial_density(), ensemble, free=free)
    return EchoRecord.from_echoes(storage_ms, echoes["half"], echoes["threehalf"])


def _chunks(total: float, limit: float = math.pi) -> List[float]:
    count = max(1, math.ceil(abs(total) / limit - 1e-12))
    return [total / count] * count


def nutation_signal(angles: Sequence[float], sigma: float, shots: int, rng: np.random.Generator) -> np.ndarray:
    """In-phase electron coherence after one MW pulse of nominal angle Theta, B1-averaged."""
    model = InhomogeneityModel(sigma_MW=sigma)
    scaling = model.draw_scalings(rng, shots)["MW"]
    lower, upper = EXPERIMENT_VIEW.index(MW.bra), EXPERIMENT_VIEW.index(MW.ket)
    start = StateVector.basis_state(EXPERIMENT_VIEW, MW.bra)
    signal = np.empty(len(angles))
    for k, angle in enumerate(angles):
        # one long pulse split into pieces that share the shot's B1 factor
        pulses = tuple(Pulse(MW, piece, name=f"nut{m}") for m, piece in enumerate(_chunks(float(angle))))
        final = apply_sequence(start, PulseSequence(pulses=pulses), scale=lambda pulse: scaling)
        a, b = final.amplitudes[..., lower], final.amplitudes[..., upper]
        signal[k] = 2 * float(np.mean(np.conj(a) * b).real)
    return signal


def dd_signal(
    thetas: Sequence[float], n: int, sigma: float, line: str, shots: int, rng: np.random.Generator
) -> np.ndarray:
    """Final nuclear coherence after an ideal pi/2 and n pi(theta) pulses on one RF line."""
    transition = FREQUENCY_LABELS[line]
    model = InhomogeneityModel(sigma_RF=sigma)
    scaling = model.draw_scalings(rng, shots)["RF"]
    lower, upper = NUCLEAR_VIEW.index(transition.bra), NUCLEAR_VIEW.index(transition.ket)
    start = StateVector.basis_state(NUCLEAR_VIEW, transition.bra)

    def scale(pulse: Pulse):
        return 1.0 if pulse.name == "dd_pi2" else scaling

    signal = np.empty(len(thetas))
    for k, theta in enumerate(thetas):
        pulses = (Pulse(transition, math.pi / 2, name="dd_pi2"),) + tuple(
            Pulse(transition, math.pi, phase=float(theta), name=f"dd_pi_{m + 1}") for m in range(n)
        )
        final = apply_sequence(start, PulseSequence(pulses=pulses), scale=scale)
        a, b = final.amplitudes[..., lower], final.amplitudes[..., upper]
        signal[k] = 2 * float(np.mean(np.conj(a) * b).real)
    return signal


def _polarised_start() -> DensityMatrix:
    return StateVector.basis_state(EXPERIMENT_VIEW, INITIAL_LEVEL).density()


def inversion_recovery_signal(delays_ms: Sequence[float], model: ElectronRelaxationModel) -> np.ndarray:
    """Read-out polarisation after inversion and a recovery delay, relative to no inversion."""
    start = _polarised_start()

    def free(rho: DensityMatrix, gap_us: float) -> DensityMatrix:
        return electron_relax(rho, gap_us, model, start)

    reference = electron_coherence(apply_sequence(start, inversion_recovery_sequence().block(["mw_pi2"])))
    signal = np.empty(len(delays_ms))
    for k, delay in enumerate(delays_ms):
        final = apply_sequence(start, inversion_recovery_sequence(1000.0 * float(delay)), free=free)
        signal[k] = (electron_coherence(final) / reference).real
    return signal


def hahn_echo_signal(echo_times_us: Sequence[float], model: ElectronRelaxationModel) -> np.ndarray:
    """Echo magnitude at total echo time 2 tau, relative to the FID right after the pi/2 pulse."""
    start = _polarised_start()

    def free(rho: DensityMatrix, gap_us: float) -> DensityMatrix:
        return electron_relax(rho, gap_us, model, start)

    reference = abs(electron_coherence(apply_sequence(start, hahn_echo_sequence().block(["mw_pi2"]))))
    signal = np.empty(len(echo_times_us))
    for k, total in enumerate(echo_times_us):
        tau = float(total) / 2
        final = free(apply_sequence(start, hahn_echo_sequence(tau), free=free), tau)
        signal[k] = abs(electron_coherence(final)) / reference
    return signal


def coherence_transfer_signal(storage_ms: Sequence[float], T2n_ms: float) -> np.ndarray:
    """Echo magnitude of the coherence-transfer experiment against total storage 2 tau."""
    start = _polarised_start()
    lindblad = LindbladModel(T2n_ms)

    def free(rho: DensityMatrix, gap_us: float) -> DensityMatrix:
        return lindblad_evolve(rho, gap_us / 1000.0, lindblad)

    reference = abs(electron_coherence(apply_sequence(start, coherence_transfer_sequence(tau_us=0.0))))
    signal = np.empty(len(storage_ms))
    for k, total in enumerate(storage_ms):
        seq = coherence_transfer_sequence(tau_us=1000.0 * float(total) / 2)
        signal[k] = abs(electron_coherence(apply_sequence(start, seq, free=free))) / reference
    return signal


class ExperimentSimulator:
    """Runs the sweeps of one experiment configuration."""

    def __init__(self, config: ExperimentConfig, jobs: Optional[int] = None, progress: Optional[bool] = None):
        self.config = config
        self.jobs = resolve_jobs(jobs)
        self.progress = settings.SHOW_PROGRESS if progress is None else progress

    def _seeds(self, count: int, stream: int) -> List[np.random.SeedSequence]:
        # one child per point so results do not depend on the worker count
        return np.random.SeedSequence([self.config.seed, stream]).spawn(count)

    def _run(self, task: Callable, values: Iterable[float], stream: int, desc: str) -> List[EchoRecord]:
        values = [float(v) for v in values]
        tasks = list(zip([self.config] * len(values), values, self._seeds(len(values), stream)))
        logger.info(f"Simulating {len(tasks)} {desc} points on {self.jobs} worker(s)")
        if self.jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=min(self.jobs, len(tasks))) as pool:
                results = pool.map(task, tasks)
                return list(tqdm(results, total=len(tasks), desc=desc, disable=not self.progress))
        return [task(t) for t in tqdm(tasks, desc=desc, disable=not self.progress)]

    def frequency_table(self) -> List[Dict[str, object]]:
        """ESR and NMR lines with the experiment's line names and degeneracy flags."""
        system = build_hamiltonian(self.config.spin, allow_double_quantum=self.config.allow_double_quantum)
        named = {(t.bra, t.ket): name for name, t in nmr_lines(system).items()}
        lines = transition_frequencies(system, "nmr") + esr_transitions(system)
        degenerate = {k for group in degenerate_groups(lines) for k in group}
        rows = []
        for k, line in enumerate(lines):
            name = "MW" if (line.bra, line.ket) == (MW.bra, MW.ket) else named.get((line.bra, line.ket), "")
            rows.append(
                {
                    "name": name,
                    "kind": line.kind,
                    "bra": str(list(line.bra)),
                    "ket": str(list(line.ket)),
                    "frequency_MHz": line.frequency,
                    "degenerate": k in degenerate,
                }
            )
        return rows

    def sweep_theta(self, thetas: Optional[Sequence[float]] = None) -> List[EchoRecord]:
        thetas = self.config.theta_sweep.values() if thetas is None else thetas
        return self._run(theta_point, thetas, stream=0, desc="theta sweep")

    def sweep_storage(self, times_ms: Optional[Sequence[float]] = None) -> List[EchoRecord]:
        times_ms = self.config.storage_sweep.values() if times_ms is None else times_ms
        return self._run(storage_point, times_ms, stream=1, desc="storage sweep")

    def fidelity_data(self) -> Dict[str, Dict[str, np.ndarray]]:
        """Simulated nutation curve and DD phase sweeps at the sigmas implied by the config."""
        cfg = self.config.fidelity
        model = _inhomogeneity(self.config)
        rngs = iter(np.random.default_rng(s) for s in self._seeds(1 + 2 * len(cfg.dd_pulse_counts), stream=2))

        angles = np.linspace(0.0, cfg.nutation_max_turns * math.pi, cfg.nutation_points)
        data = {"nutation": {"angles": angles, "signal": nutation_signal(angles, model.sigma_MW, cfg.shots, next(rngs))}}
        thetas = np.linspace(0.0, math.pi, cfg.dd_points)
        for line in ("f1", "f2"):
            for n in cfg.dd_pulse_counts:
                data[f"dd_{line}_n{n}"] = {
                    "theta": thetas,
                    "signal": dd_signal(thetas, n, model.sigma_RF, line, cfg.shots, next(rngs)),
                }
        return data

    def relaxation_data(self) -> Dict[str, Dict[str, np.ndarray]]:
        """Inversion recovery (ms), Hahn echo (us) and coherence-transfer storage (ms) curves."""
        cfg = self.config.relaxation
        model = ElectronRelaxationModel(cfg.T1e_ms, cfg.T2e_us)
        rngs = [np.random.default_rng(s) for s in self._seeds(3, stream=3)]
        grids = {
            "T1e": np.linspace(0.0, cfg.span * cfg.T1e_ms, cfg.points),
            "T2e": np.linspace(0.0, cfg.span * cfg.T2e_us, cfg.points),
            "T2n": np.linspace(0.0, cfg.span * cfg.T2n_ms, cfg.points),
        }
        signals = {
            "T1e": inversion_recovery_signal(grids["T1e"], model),
            "T2e": hahn_echo_signal(grids["T2e"], model),
            "T2n": coherence_transfer_signal(grids["T2n"], cfg.T2n_ms),
        }
        data = {}
        for (name, signal), rng in zip(signals.items(), rngs):
            if cfg.noise:
                signal = signal + rng.normal(0.0, cfg.noise, size=signal.shape)
            data[name] = {"time": grids[name], "signal": signal}
        logger.info(f"Simulated relaxation curves with {cfg.points} points each")
        return data

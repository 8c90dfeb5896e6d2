import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..core.errors import FitError
from ..models.experiment import FitConfig
from ..models.records import EchoRecord, FitResult, records_to_frame
from ..physics.decoherence import fidelity_from_sigma
from ..physics.readout import (
    combine_corrupted_linear,
    combine_corrupted_square,
    combine_uncorrupted,
    storage_model,
)
from ..utils.fitting import (
    SigmaEstimate,
    fit_dd_fidelity,
    fit_exponential,
    fit_nutation_sigma,
    fit_series,
    fit_vertical_scale,
)

logger = logging.getLogger(__name__)

# time unit of each relaxation curve and the exponential form fitted to it
RELAXATION_CURVES = {"T1e": ("ms", "recovery"), "T2e": ("us", "decay"), "T2n": ("ms", "decay")}

COMBINATION_COLUMNS = [
    "sweep_var",
    "uncorrupted_sq",
    "corrupted_linear_half",
    "corrupted_linear_threehalf",
    "corrupted_sq",
]


@dataclass
class StorageAnalysis:
    """Combined echoes against storage time with the scaled dephasing-only prediction."""
    frame: pd.DataFrame
    uncorrupted_scale: FitResult
    corrupted_scale: FitResult


@dataclass
class FidelityReport:
    """Pulse fidelities recovered from simulated calibration data."""
    mw: SigmaEstimate
    rf: Dict[str, SigmaEstimate] = field(default_factory=dict)

    @property
    def rf_combined(self) -> SigmaEstimate:
        """Mean sigma over all DD estimates.

        The error is the standard error of their spread, added in quadrature to the mean fit
        error; fit errors alone vanish on noise-free simulated curves.
        """
        sigmas = np.array([e.sigma for e in self.rf.values()])
        fit_errors = np.array([e.sigma_err for e in self.rf.values()])
        spread = float(np.std(sigmas, ddof=1)) if sigmas.size > 1 else 0.0
        sigma = float(np.mean(sigmas))
        sigma_err = math.sqrt(spread ** 2 + float(np.mean(fit_errors ** 2))) / math.sqrt(sigmas.size)
        return SigmaEstimate(
            method="dd_combined",
            sigma=sigma,
            sigma_err=sigma_err,
            fidelity=fidelity_from_sigma(sigma),
            fidelity_err=2 * sigma * math.exp(-sigma ** 2) / 3 * sigma_err,
        )

    def to_payload(self) -> Dict[str, object]:
        payload: Dict[str, object] = {
            "fidelity_definition": "F = (2 + exp(-sigma^2)) / 3",
            "mw": self.mw.to_payload(),
            "rf": {name: est.to_payload() for name, est in sorted(self.rf.items())},
        }
        if self.rf:
            payload["rf_combined"] = self.rf_combined.to_payload()
        return payload


def combination_frame(records: Sequence[EchoRecord]) -> pd.DataFrame:
    """The uncorrupted and corrupted echo combinations at every sweep point."""
    frame = records_to_frame(records)
    linear_half, linear_threehalf = combine_corrupted_linear(frame)
    return pd.DataFrame(
        {
            "sweep_var": frame["sweep_var"],
            "uncorrupted_sq": combine_uncorrupted(frame),
            "corrupted_linear_half": linear_half,
            "corrupted_linear_threehalf": linear_threehalf,
            "corrupted_sq": combine_corrupted_square(frame),
        },
        columns=COMBINATION_COLUMNS,
    )


class ExperimentAnalysisService:
    def __init__(self, fit_config: Optional[FitConfig] = None):
        self.fit_config = fit_config or FitConfig()

    def analyze_theta(self, records: Sequence[EchoRecord], seed: Optional[int] = None) -> Tuple[pd.DataFrame, FitResult]:
        """Echo combinations plus the global A_n fit; a fit that cannot run is reported unconverged."""
        try:
            fit = fit_series(records, order=self.fit_config.order, weights=self.fit_config.weights, seed=seed)
        except FitError as e:
            fit = FitResult(kind="series", params={}, converged=False, seed=seed, message=e.detail)
        if fit.converged:
            logger.info(f"A_n fit converged: {fit.ratios()}")
        else:
            logger.warning(f"A_n fit did not converge: {fit.message}")
        return combination_frame(records), fit

    def analyze_storage(self, records: Sequence[EchoRecord], T2n_ms: float) -> StorageAnalysis:
        """Compare storage data with the dephasing-only model; the vertical scale is the only free parameter."""
        frame = combination_frame(records)
        times = frame["sweep_var"].to_numpy(dtype=float)
        model_uncorrupted, model_corrupted = storage_model(times, T2n_ms)
        uncorrupted_scale = fit_vertical_scale(frame["uncorrupted_sq"], model_uncorrupted)
        if np.any(model_corrupted):
            corrupted_scale = fit_vertical_scale(frame["corrupted_sq"], model_corrupted)
        else:
            corrupted_scale = FitResult(kind="vertical_scale", params={"scale": 0.0}, residual=0.0,
                                        converged=False, message="corrupted model vanishes on this grid")
        frame["model_uncorrupted_sq"] = uncorrupted_scale.params["scale"] * model_uncorrupted
        frame["model_corrupted_sq"] = corrupted_scale.params["scale"] * model_corrupted
        return StorageAnalysis(frame=frame, uncorrupted_scale=uncorrupted_scale, corrupted_scale=corrupted_scale)

    def fidelity_report(self, data: Dict[str, Dict[str, np.ndarray]]) -> FidelityReport:
        nutation = data["nutation"]
        report = FidelityReport(mw=fit_nutation_sigma(nutation["angles"], nutation["signal"]))
        for name, sweep in data.items():
            if not name.startswith("dd_"):
                continue
            n = int(name.rsplit("_n", 1)[1])
            report.rf[name] = fit_dd_fidelity(sweep["theta"], sweep["signal"], n)
        logger.info(
            f"MW fidelity {100 * report.mw.fidelity:.2f}%"
            + (f", RF fidelity {100 * report.rf_combined.fidelity:.2f}%" if report.rf else "")
        )
        return report

    def relaxation_report(self, data: Dict[str, Dict[str, np.ndarray]], seed: Optional[int] = None) -> Dict[str, FitResult]:
        """Exponential fits of the relaxation curves; T comes back in each curve's time unit."""
        fits = {}
        for name, curve in data.items():
            unit, kind = RELAXATION_CURVES[name]
            try:
                fits[name] = fit_exponential(curve["time"], curve["signal"], kind=kind, seed=seed)
            except FitError as e:
                fits[name] = FitResult(kind=f"exponential_{kind}", params={}, converged=False, seed=seed,
                                       message=e.detail)
            fit = fits[name]
            if fit.converged:
                logger.info(f"{name} = {fit.params['T']:.4g} {unit}")
            else:
                logger.warning(f"{name} fit did not converge: {fit.message}")
        return fits


def _row(name: str, estimate: SigmaEstimate) -> Dict[str, object]:
    row: Dict[str, object] = {"name": name, **estimate.to_payload()}
    row["ci95_low_percent"], row["ci95_high_percent"] = row.pop("ci95_percent")
    return row


def fidelity_rows(report: FidelityReport) -> List[Dict[str, object]]:
    """Flat table of the report, one row per estimate."""
    rows = [_row("mw_nutation", report.mw)]
    rows += [_row(name, est) for name, est in sorted(report.rf.items())]
    if report.rf:
        rows.append(_row("rf_combined", report.rf_combined))
    return rows


def relaxation_frame(data: Dict[str, Dict[str, np.ndarray]]) -> pd.DataFrame:
    """Long table of the relaxation curves: experiment, time, unit, signal."""
    parts = [
        pd.DataFrame({"experiment": name, "time": curve["time"], "unit": RELAXATION_CURVES[name][0],
                      "signal": curve["signal"]})
        for name, curve in data.items()
    ]
    return pd.concat(parts, ignore_index=True)

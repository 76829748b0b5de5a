"""
What-if setback assessment.

Steps inside the chosen hours where the HVAC runs in occupied mode while the
building is inferred empty are re-priced with the unoccupied spline:
adjusted = load - B_occupied(temp) + B_unoccupied(temp), clamped at 0.

Before re-pricing, each gate is refit on the inferred-empty steps that sit
closer to it, so empty hours spent in occupied operation do not leak into
the unoccupied curve the saving is measured against.
"""
import logging
from collections.abc import Iterable
from dataclasses import dataclass
import numpy as np
import pandas as pd
from occuload.exceptions import DataError, DimensionError, DomainError, UntrainedModelError
from occuload.schemas.config import Scenario
from occuload.schemas.params import DisaggregatorParams
from occuload.schemas.series import BuildingSeries
from occuload.services.disaggregator import system_means
from occuload.services.trainer import PosteriorSeries
from occuload.utils.gm import LevelSet
from occuload.utils.splines import bspline_basis

logger = logging.getLogger(__name__)

RECALIBRATION_ROUNDS = 3
RIDGE = 1e-3


@dataclass(frozen=True)
class WhatIfReport:
    interval: tuple[int, ...]
    before_kwh: float
    after_kwh: float
    flagged_steps: int
    adjusted_load: np.ndarray
    per_day: pd.DataFrame

    @property
    def saving_kwh(self) -> float:
        return self.before_kwh - self.after_kwh

    def summary(self) -> str:
        share = 100.0 * self.saving_kwh / self.before_kwh if self.before_kwh else 0.0
        return (
            f"setback over hours {list(self.interval)}: {self.before_kwh:.1f} kWh -> "
            f"{self.after_kwh:.1f} kWh (saving {self.saving_kwh:.1f} kWh, {share:.2f}%, "
            f"{self.flagged_steps} steps adjusted)"
        )


def most_probable_levels(posterior: PosteriorSeries, levels: LevelSet) -> np.ndarray:
    """One-hot (steps, levels) at each step's most probable level."""
    return np.eye(levels.n_levels)[posterior.flat().argmax(axis=1)]


def hvac_estimate(
    params: DisaggregatorParams,
    series: BuildingSeries,
    posterior: PosteriorSeries,
    levels: LevelSet,
) -> np.ndarray:
    """
    Metered HVAC when available, otherwise the load minus the occupant-driven
    load at each step's most probable level. Empty steps lose only the bases.
    """
    if "hvac" in series.systems:
        return np.asarray(series.systems["hvac"], dtype=float)
    expected = system_means(params, most_probable_levels(posterior, levels), None, levels)
    return series.load - expected["plug"] - expected["lighting"]


def _ridge_step(basis: np.ndarray, target: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    # shrinks toward the current coefficients, bases without support stay put
    residual = target - basis @ coeffs
    gram = basis.T @ basis + RIDGE * max(len(target), 1) * np.eye(basis.shape[1])
    return coeffs + np.linalg.solve(gram, basis.T @ residual)


def recalibrate_gates(
    basis: np.ndarray,
    hvac: np.ndarray,
    empty: np.ndarray,
    assessed: np.ndarray,
    unoccupied_coeffs,
    occupied_coeffs,
    rounds: int = RECALIBRATION_ROUNDS,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Two-cluster refit of the gate splines. The unoccupied gate learns from
    empty steps in setback operation, the occupied gate from assessed empty
    steps that kept running in occupied mode.
    """
    unoccupied = np.asarray(unoccupied_coeffs, dtype=float)
    occupied = np.asarray(occupied_coeffs, dtype=float)
    if np.allclose(basis @ unoccupied, basis @ occupied):
        return unoccupied, occupied

    for _ in range(rounds):
        closer_to_occupied = np.abs(hvac - basis @ occupied) < np.abs(hvac - basis @ unoccupied)
        setback = empty & ~closer_to_occupied
        running = empty & assessed & closer_to_occupied
        if setback.any():
            unoccupied = _ridge_step(basis[setback], hvac[setback], unoccupied)
        if running.any():
            occupied = _ridge_step(basis[running], hvac[running], occupied)
    return unoccupied, occupied


def whatif_setback(
    params: DisaggregatorParams,
    series: BuildingSeries,
    interval: Iterable[int],
    posterior: PosteriorSeries,
    levels: LevelSet,
    recalibrate: bool = True,
) -> WhatIfReport:
    if not params.trained:
        raise UntrainedModelError("what-if assessment needs trained parameters")
    if params.scenario is not Scenario.lumped:
        raise DataError("what-if assessment needs a model trained on whole-building (lumped) loads")

    hours = tuple(sorted(set(int(h) for h in interval)))
    if not hours or any(h < 0 or h > 23 for h in hours):
        raise DomainError(f"setback hours must be within 0-23, got {list(interval)}")

    series = series.whole_days()
    if series.temperature is None:
        raise DataError("what-if assessment needs an outdoor temperature column")
    if posterior.probs.shape[0] != series.n_days:
        raise DimensionError(
            f"posterior covers {posterior.probs.shape[0]} days, series has {series.n_days}"
        )

    basis = bspline_basis(params.normalize_temperature(series.temperature), params.spline)
    hvac = hvac_estimate(params, series, posterior, levels)
    inferred_empty = posterior.flat().argmax(axis=1) == 0
    in_interval = np.isin(series.hours, hours)

    unoccupied_coeffs, occupied_coeffs = params.coeffs_unoccupied, params.coeffs_occupied
    if recalibrate:
        unoccupied_coeffs, occupied_coeffs = recalibrate_gates(
            basis, hvac, inferred_empty, in_interval, unoccupied_coeffs, occupied_coeffs
        )
    unoccupied_curve = basis @ unoccupied_coeffs
    occupied_curve = basis @ occupied_coeffs

    occupied_operation = np.abs(hvac - occupied_curve) < np.abs(hvac - unoccupied_curve)
    flagged = occupied_operation & inferred_empty & in_interval

    adjusted = series.load.astype(float).copy()
    adjusted[flagged] = np.maximum(
        0.0, adjusted[flagged] - occupied_curve[flagged] + unoccupied_curve[flagged]
    )

    frame = pd.DataFrame(
        {
            "date": series.timestamps.normalize(),
            "before_kwh": series.load,
            "after_kwh": adjusted,
            "flagged_steps": flagged.astype(int),
        }
    )
    per_day = frame.groupby("date", sort=True).sum().reset_index()
    per_day["saving_kwh"] = per_day["before_kwh"] - per_day["after_kwh"]

    report = WhatIfReport(
        interval=hours,
        before_kwh=float(series.load.sum()),
        after_kwh=float(adjusted.sum()),
        flagged_steps=int(flagged.sum()),
        adjusted_load=adjusted,
        per_day=per_day,
    )
    logger.info(report.summary())
    return report

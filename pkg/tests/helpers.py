from dataclasses import dataclass
from datetime import date
import numpy as np
import pandas as pd
from occuload.schemas.config import (
    DayType,
    GeneratorConfig,
    HvacSpec,
    LevelConfig,
    RunConfig,
    Scenario,
    SimBuilding,
    SimulationConfig,
    SplineConfig,
    TrainConfig,
)
from occuload.schemas.params import DisaggregatorParams, GroundTruth
from occuload.schemas.series import BuildingSeries
from occuload.services.generator import ReferenceSchedule, assign_day_types, default_tau_upper
from occuload.services.synth import simulate_building
from occuload.utils.gm import LevelSet

WORKING_RATIOS = [0, 0, 0, 0, 0, 0, 0.1, 0.2, 0.95, 0.95, 0.95, 0.95, 0.55, 0.95, 0.95, 0.95, 0.95, 0.3, 0.1, 0.1, 0.1, 0.1, 0.05, 0.05]


@dataclass
class SimulatedBuilding:
    series: BuildingSeries
    truth: GroundTruth
    building: SimBuilding


class BaseTestHelpers:
    seed = 11

    # --- Helper Methods for Test Setup ---
    def _make_levels(self, **kwargs) -> LevelSet:
        return LevelSet.from_config(LevelConfig(**kwargs))

    def _make_params(
        self,
        plug_dynamic=16.0,
        plug_base=1.5,
        light_dynamic=20.0,
        light_base=2.0,
        occupied=None,
        unoccupied=None,
        scenario=Scenario.separate,
        obs_variance=0.04,
        temp_mean=15.0,
        temp_std=5.0,
        trained=False,
    ) -> DisaggregatorParams:
        n_basis = SplineConfig().n_basis
        return DisaggregatorParams(
            plug_dynamic=plug_dynamic,
            plug_base=plug_base,
            light_dynamic=light_dynamic,
            light_base=light_base,
            spline_coeffs_occupied=list(occupied if occupied is not None else np.linspace(8, 2, n_basis)),
            spline_coeffs_unoccupied=list(unoccupied if unoccupied is not None else np.linspace(4, 1, n_basis)),
            temp_mean=temp_mean,
            temp_std=temp_std,
            obs_variance=obs_variance,
            scenario=scenario,
            trained=trained,
        )

    def _make_schedules(self, cfg: GeneratorConfig = GeneratorConfig()) -> dict[DayType, list[ReferenceSchedule]]:
        working = np.asarray(WORKING_RATIOS, dtype=float)
        non_working = np.full(24, 0.05)
        return {
            DayType.working: [ReferenceSchedule(DayType.working, working, default_tau_upper(working, cfg))],
            DayType.non_working: [
                ReferenceSchedule(DayType.non_working, non_working, default_tau_upper(non_working, cfg))
            ],
        }

    def _make_series(
        self,
        days=3,
        start="2023-01-02",
        load=None,
        temperature=None,
        occupancy=None,
        systems=None,
    ) -> BuildingSeries:
        timestamps = pd.date_range(start, periods=days * 24, freq="h")
        rng = np.random.default_rng(self.seed)
        return BuildingSeries(
            timestamps=timestamps,
            load=np.asarray(load) if load is not None else rng.uniform(5, 30, len(timestamps)),
            working=assign_day_types(timestamps),
            temperature=None if temperature is None else np.asarray(temperature, dtype=float),
            occupancy=None if occupancy is None else np.asarray(occupancy, dtype=float),
            systems=systems or {},
        )

    def _make_building(self, **kwargs) -> SimBuilding:
        return SimBuilding(**kwargs)

    def _simulate(self, days=28, scenario=Scenario.lumped, seed=None, **building_kwargs) -> SimulatedBuilding:
        building = self._make_building(**building_kwargs)
        series, truth = simulate_building(
            building, days, self.seed if seed is None else seed, scenario=scenario, start=date(2023, 1, 2)
        )
        return SimulatedBuilding(series=series, truth=truth, building=building)

    def _small_config(self, tmp_path, scenario=Scenario.separate, **overrides) -> RunConfig:
        raw = {
            "scenario": scenario,
            "seed": 3,
            "out_dir": tmp_path / "out",
            "generator": GeneratorConfig(working_size=240, non_working_size=80),
            "train": TrainConfig(epochs=3, inner_iterations=60, top_k=16),
            "simulation": SimulationConfig(
                buildings=[
                    SimBuilding(hvac=HvacSpec(cooling_slope=2.0, heating_slope=1.0)),
                ],
                train_days=28,
                test_days=14,
            ),
        }
        raw.update(overrides)
        return RunConfig(**raw)

    def _one_hot_posterior(self, ratios, levels: LevelSet) -> np.ndarray:
        """(days, 24, levels) one-hot at the level bin each ratio falls into."""
        ratios = np.asarray(ratios, dtype=float)
        index = np.clip(np.digitize(ratios, levels.bin_edges[1:-1]), 0, levels.n_levels - 1)
        probs = np.eye(levels.n_levels)[index]
        return probs.reshape(-1, 24, levels.n_levels)

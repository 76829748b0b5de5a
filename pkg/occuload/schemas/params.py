import numpy as np
from pathlib import Path
from pydantic import BaseModel, ConfigDict, Field, model_validator
from occuload.schemas.config import LevelConfig, Scenario, SplineConfig


class DisaggregatorParams(BaseModel):
    """
    Load disaggregator parameters. Capacities are stored unconstrained and
    clamped at use, so a negative raw value means a zero capacity.
    All loads are in kW, temperature constants in degC.
    """

    plug_dynamic: float
    plug_base: float
    light_dynamic: float
    light_base: float
    spline_coeffs_occupied: list[float]
    spline_coeffs_unoccupied: list[float]
    temp_mean: float = 0.0
    temp_std: float = Field(default=1.0, gt=0)
    obs_variance: float = Field(default=0.0, ge=0)
    spline: SplineConfig = SplineConfig()
    levels: LevelConfig = LevelConfig()
    scenario: Scenario = Scenario.separate
    trained: bool = False

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def coefficient_lengths_match_spline(self):
        n_basis = self.spline.n_basis
        for name in ("spline_coeffs_occupied", "spline_coeffs_unoccupied"):
            if len(getattr(self, name)) != n_basis:
                raise ValueError(
                    f"{name} needs {n_basis} coefficients, got {len(getattr(self, name))}"
                )
        return self

    # Effective (clamped) capacities
    @property
    def plug_dynamic_kw(self) -> float:
        return max(0.0, self.plug_dynamic)

    @property
    def plug_base_kw(self) -> float:
        return max(0.0, self.plug_base)

    @property
    def light_dynamic_kw(self) -> float:
        return max(0.0, self.light_dynamic)

    @property
    def light_base_kw(self) -> float:
        return max(0.0, self.light_base)

    @property
    def coeffs_occupied(self) -> np.ndarray:
        return np.asarray(self.spline_coeffs_occupied, dtype=float)

    @property
    def coeffs_unoccupied(self) -> np.ndarray:
        return np.asarray(self.spline_coeffs_unoccupied, dtype=float)

    def normalize_temperature(self, temp) -> np.ndarray:
        lo, hi = self.spline.domain
        z = (np.asarray(temp, dtype=float) - self.temp_mean) / self.temp_std
        return np.clip(z, lo, hi)

    def capacities(self) -> dict[str, float]:
        return {
            "plug_dynamic": self.plug_dynamic_kw,
            "plug_base": self.plug_base_kw,
            "light_dynamic": self.light_dynamic_kw,
            "light_base": self.light_base_kw,
        }

    def save(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.model_dump_json(indent=2))
        return path

    @classmethod
    def load(cls, path: Path) -> "DisaggregatorParams":
        return cls.model_validate_json(Path(path).read_text())


class GroundTruth(BaseModel):
    """Sidecar written next to a simulated series."""

    building: str
    scenario: Scenario
    seed: int
    floor_area: float
    capacities: dict[str, float]
    hvac: dict[str, float | list[int]]
    occupant_count: int
    zone_count: int
    regular_share: float
    thresholds: tuple[float, float] | None = None

    def save(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.model_dump_json(indent=2))
        return path

    @classmethod
    def load(cls, path: Path) -> "GroundTruth":
        return cls.model_validate_json(Path(path).read_text())

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from datetime import date
from enum import Enum
from pathlib import Path
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)
from occuload.exceptions import ConfigError, config_error_from_validation

DATA_DIR = Path(__file__).resolve().parent.parent / "data"
DEFAULT_SCHEDULES = DATA_DIR / "reference_schedules.csv"
DEMO_CONFIG = DATA_DIR / "demo.toml"


# Enums
class DayType(str, Enum):
    working = "working"
    non_working = "non_working"


class Scenario(str, Enum):
    separate = "separate"
    lumped = "lumped"


class System(str, Enum):
    plug = "plug"
    lighting = "lighting"


class Climate(str, Enum):
    mild = "mild"
    hot = "hot"
    cold = "cold"


# Model configuration
class LevelConfig(BaseModel):
    centroids: list[float] = [0.0, 1 / 3, 2 / 3, 1.0]
    boundary_offset: float = Field(default=0.02, gt=0, lt=0.5)
    boundary_std: float = Field(default=0.02, gt=0)


class GeneratorConfig(BaseModel):
    working_size: int = Field(default=1500, ge=1)
    non_working_size: int = Field(default=500, ge=1)
    tau_min: float = Field(default=0.01, gt=0)
    # default per-hour upper bound of the temperature draw
    inactive_ratio: float = Field(default=0.05, ge=0, le=1)
    tau_inactive: float = Field(default=0.05, gt=0)
    tau_active: float = Field(default=0.5, gt=0)


class SplineConfig(BaseModel):
    order: int = Field(default=2, ge=1)
    domain: tuple[float, float] = (-2.0, 2.0)
    grid_count: int = Field(default=5, ge=1)

    model_config = ConfigDict(frozen=True)

    @field_validator("domain")
    def domain_is_ordered(cls, v):
        if v[0] >= v[1]:
            raise ValueError("domain lower bound must be below the upper bound")
        return v

    @property
    def n_basis(self) -> int:
        return self.grid_count + self.order


class TrainConfig(BaseModel):
    top_k: int = Field(default=32, ge=1)
    beta: float = Field(default=0.5, ge=0, le=1)
    epochs: int = Field(default=8, ge=1)
    learning_rate: float = Field(default=0.01, gt=0)
    inner_iterations: int = Field(default=200, ge=1)
    min_days: int = Field(default=14, ge=1)
    seed: int = 0
    # lumped only: occupant base loads held at this fraction of their dynamic capacity (None leaves them free)
    lumped_base_fraction: float | None = Field(default=0.1, ge=0)
    # lumped only: both HVAC gates meet at the minimum of their difference over the observed temperatures
    anchor_gates: bool = True


class InitConfig(BaseModel):
    floor_area: float = 2000.0  # m2, checked by init_params
    light_intensity: float = Field(default=8.0, ge=0)  # W/m2
    plug_intensity: float = Field(default=8.0, ge=0)  # W/m2
    base_fraction: float = Field(default=0.1, ge=0)
    noise_fraction: float = Field(default=0.01, gt=0)


class HmmPriorConfig(BaseModel):
    stay: float = Field(default=0.8, gt=0, lt=1)
    night_hours: list[int] = [0, 1, 2, 3, 4, 5, 21, 22, 23]
    night_low: float = Field(default=0.9, gt=0, lt=1)
    arrival_hours: list[int] = [7, 8, 9]
    departure_hours: list[int] = [17, 18, 19]
    shift: float = Field(default=0.5, gt=0, lt=1)
    non_working_low: float = Field(default=0.8, gt=0, lt=1)
    # Dirichlet weight of the prior in the transition update; 0 is plain Baum-Welch
    pseudo_count: float = Field(default=1.0, ge=0)
    max_iter: int = Field(default=100, ge=1)
    tol: float = Field(default=1e-6, gt=0)


class BaselineConfig(BaseModel):
    n_clusters: int = Field(default=5, ge=1, le=8)
    hmm_states: int = Field(default=5, ge=2, le=6)
    scaler_grid: list[float] = [0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 1.0]
    es_max_breakpoints: int = Field(default=2, ge=0, le=2)
    es_resolution: float = Field(default=0.5, gt=0)
    hmm: HmmPriorConfig = HmmPriorConfig()
    seed: int = 0


class EvaluationConfig(BaseModel):
    kmeans_restarts: int = Field(default=50, ge=1)
    count_quantile: float = Field(default=0.999, gt=0, le=1)
    es_grid_points: int = Field(default=50, ge=2)


# Synthetic buildings
class HvacSpec(BaseModel):
    breakpoint: float = 16.0  # degC
    cooling_slope: float = Field(default=1.5, ge=0)  # kW/degC
    heating_slope: float = Field(default=0.8, ge=0)  # kW/degC
    base: float = Field(default=5.0, ge=0)  # kW
    setback: float = Field(default=0.3, ge=0, le=1)
    occupied_threshold: float = Field(default=0.1, ge=0, le=1)
    always_on_hours: list[int] = []

    @field_validator("always_on_hours")
    def hours_in_day(cls, v):
        if any(h < 0 or h > 23 for h in v):
            raise ValueError("hours must be within 0-23")
        return v


class SystemNoise(BaseModel):
    plug: float = Field(default=0.3, ge=0)
    lighting: float = Field(default=0.3, ge=0)
    hvac: float = Field(default=0.5, ge=0)


class SimBuilding(BaseModel):
    name: str = "bldg-a"
    floor_area: float = Field(default=2000.0, gt=0)
    zone_count: int = Field(default=8, ge=1)
    occupant_count: int = Field(default=80, ge=1)
    regular_share: float = Field(default=0.6, ge=0, le=1)
    light_intensity: float = Field(default=10.0, ge=0)
    plug_intensity: float = Field(default=8.0, ge=0)
    light_base: float = Field(default=2.0, ge=0)
    plug_base: float = Field(default=1.5, ge=0)
    hvac: HvacSpec = HvacSpec()
    noise_std: SystemNoise = SystemNoise()
    climate: Climate = Climate.mild

    @property
    def light_dynamic(self) -> float:
        return self.light_intensity * self.floor_area / 1000.0

    @property
    def plug_dynamic(self) -> float:
        return self.plug_intensity * self.floor_area / 1000.0


def default_buildings() -> list[SimBuilding]:
    return [
        SimBuilding(),
        SimBuilding(
            name="bldg-b",
            floor_area=3500.0,
            occupant_count=120,
            light_intensity=9.0,
            plug_intensity=7.0,
            hvac=HvacSpec(breakpoint=18.0, cooling_slope=3.0, heating_slope=0.2, base=8.0, setback=0.2),
            climate=Climate.hot,
        ),
        SimBuilding(
            name="bldg-c",
            floor_area=1200.0,
            occupant_count=48,
            light_intensity=11.0,
            plug_intensity=9.0,
            hvac=HvacSpec(breakpoint=14.0, cooling_slope=0.6, heating_slope=1.2, base=3.0, setback=0.5),
            climate=Climate.cold,
        ),
    ]


class SimulationConfig(BaseModel):
    buildings: list[SimBuilding] = Field(default_factory=default_buildings)
    train_days: int = Field(default=180, ge=1)
    test_days: int = Field(default=60, ge=0)
    start: date = date(2023, 1, 2)
    weather_rho: float = Field(default=0.8, ge=0, lt=1)
    weather_noise_std: float = Field(default=1.5, ge=0)
    weather_csv: Path | None = None


class RunConfig(BaseModel):
    scenario: Scenario = Scenario.separate
    seed: int = 0
    input: Path | None = None
    schedules: Path = DEFAULT_SCHEDULES
    holidays: Path | None = None
    out_dir: Path = Path("out")
    building: int = Field(default=0, ge=0)
    train_fraction: float = Field(default=0.75, gt=0, lt=1)
    levels: LevelConfig = LevelConfig()
    generator: GeneratorConfig = GeneratorConfig()
    spline: SplineConfig = SplineConfig()
    train: TrainConfig = TrainConfig()
    init: InitConfig = InitConfig()
    baselines: BaselineConfig = BaselineConfig()
    evaluation: EvaluationConfig = EvaluationConfig()
    simulation: SimulationConfig = SimulationConfig()

    @field_validator("input", "schedules", "holidays")
    def referenced_file_exists(cls, v):
        if v is not None and not Path(v).is_file():
            raise ValueError(f"file not found: {v}")
        return v

    @model_validator(mode="after")
    def building_index_in_range(self):
        if self.input is None and self.building >= len(self.simulation.buildings):
            raise ValueError(
                f"building index {self.building} out of range "
                f"({len(self.simulation.buildings)} simulated buildings)"
            )
        return self


def load_run_config(path: Path | None = None, **overrides) -> RunConfig:
    """
    Load a TOML run configuration and apply CLI overrides.
    Relative paths inside the file resolve against the file's directory.
    """
    raw: dict = {}
    source = "<defaults>"
    if path is not None:
        path = Path(path)
        source = str(path)
        try:
            with path.open("rb") as fh:
                raw = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"could not parse {path}: {e}")

        for key in ("input", "schedules", "holidays"):
            if raw.get(key):
                candidate = Path(raw[key])
                if not candidate.is_absolute():
                    raw[key] = str(path.parent / candidate)
        simulation = raw.get("simulation") or {}
        if simulation.get("weather_csv") and not Path(simulation["weather_csv"]).is_absolute():
            simulation["weather_csv"] = str(path.parent / simulation["weather_csv"])

    raw.update({k: v for k, v in overrides.items() if v is not None})

    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        raise config_error_from_validation(e, source)

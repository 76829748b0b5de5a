from dataclasses import dataclass, field
import numpy as np
import pandas as pd
from occuload.exceptions import DataError, DimensionError
from occuload.schemas.config import DayType

STEPS_PER_DAY = 24
SYSTEM_COLUMNS = ("plug", "lighting", "hvac")


@dataclass(frozen=True)
class BuildingSeries:
    """
    Aligned hourly series for one building. `load` is the observed meter
    (occupant-driven loads in the separate scenario, the whole building in
    the lumped one). Optional per-system loads and ground-truth occupancy
    ride along for evaluation.
    """

    timestamps: pd.DatetimeIndex
    load: np.ndarray
    working: np.ndarray
    temperature: np.ndarray | None = None
    occupancy: np.ndarray | None = None
    systems: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.timestamps)
        arrays = {"load": self.load, "working": self.working}
        if self.temperature is not None:
            arrays["temperature"] = self.temperature
        if self.occupancy is not None:
            arrays["occupancy"] = self.occupancy
        arrays.update(self.systems)

        for name, values in arrays.items():
            if len(values) != n:
                raise DimensionError(f"{name} has {len(values)} steps, expected {n}")

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def has_temperature(self) -> bool:
        return self.temperature is not None

    @property
    def hours(self) -> np.ndarray:
        return np.asarray(self.timestamps.hour)

    @property
    def day_types(self) -> np.ndarray:
        return np.where(self.working, DayType.working.value, DayType.non_working.value)

    @property
    def n_days(self) -> int:
        return len(self) // STEPS_PER_DAY

    def whole_days(self) -> "BuildingSeries":
        """Trims to complete calendar days starting at hour 0."""
        starts = np.flatnonzero(self.hours == 0)
        if len(starts) == 0:
            raise DataError("series does not contain a full calendar day")
        first = starts[0]
        n_days = (len(self) - first) // STEPS_PER_DAY
        if n_days == 0:
            raise DataError("series does not contain a full calendar day")
        return self.slice(first, first + n_days * STEPS_PER_DAY)

    def slice(self, start: int, stop: int) -> "BuildingSeries":
        return BuildingSeries(
            timestamps=self.timestamps[start:stop],
            load=self.load[start:stop],
            working=self.working[start:stop],
            temperature=None if self.temperature is None else self.temperature[start:stop],
            occupancy=None if self.occupancy is None else self.occupancy[start:stop],
            systems={k: v[start:stop] for k, v in self.systems.items()},
        )

    def slice_days(self, start_day: int, stop_day: int) -> "BuildingSeries":
        return self.slice(start_day * STEPS_PER_DAY, stop_day * STEPS_PER_DAY)

    def daily(self, values: np.ndarray) -> np.ndarray:
        """Reshapes a per-step array of a whole-day series to (days, 24, ...)."""
        values = np.asarray(values)
        return values.reshape((self.n_days, STEPS_PER_DAY) + values.shape[1:])

    def day_is_working(self) -> np.ndarray:
        return self.daily(self.working)[:, 0].astype(bool)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({"timestamp": self.timestamps, "load": self.load})
        if self.temperature is not None:
            frame["temperature"] = self.temperature
        if self.occupancy is not None:
            frame["occupancy"] = self.occupancy
        for name in SYSTEM_COLUMNS:
            if name in self.systems:
                frame[name] = self.systems[name]
        frame["day_type"] = self.day_types
        return frame

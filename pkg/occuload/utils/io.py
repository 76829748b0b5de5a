"""CSV contracts for series, schedules, weather, holidays and occupancy outputs."""
import logging
from datetime import date
from pathlib import Path
import numpy as np
import pandas as pd
from occuload.exceptions import DataError
from occuload.schemas.config import DayType, GeneratorConfig
from occuload.schemas.series import STEPS_PER_DAY, SYSTEM_COLUMNS, BuildingSeries
from occuload.services.generator import ReferenceSchedule, assign_day_types, default_tau_upper
from occuload.services.trainer import PosteriorSeries
from occuload.utils.gm import LevelSet

logger = logging.getLogger(__name__)

MAX_GAP_HOURS = 3
OPTIONAL_COLUMNS = ("temperature", "occupancy") + SYSTEM_COLUMNS


def _read_csv(path: Path) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    try:
        return pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataError(f"could not parse {path}: {e}")


def _require_columns(frame: pd.DataFrame, required: tuple[str, ...], path: Path) -> None:
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise DataError(f"{path}: missing required column(s) {', '.join(missing)}")


def _hourly_frame(frame: pd.DataFrame, value_columns: list[str], path: Path) -> pd.DataFrame:
    """
    Parses timestamps, rejects duplicates and disorder, and reindexes to an
    hourly grid. Runs of up to MAX_GAP_HOURS missing hours are linearly
    interpolated, longer ones are rejected.
    """
    try:
        stamps = pd.to_datetime(frame["timestamp"], format="ISO8601")
    except (ValueError, TypeError) as e:
        raise DataError(f"{path}: timestamps must be ISO-8601: {e}")

    duplicated = stamps.duplicated()
    if duplicated.any():
        row = int(np.flatnonzero(duplicated)[0])
        # +2: header line and 1-based numbering
        raise DataError(f"{path}: duplicated timestamp {stamps.iloc[row]} at row {row + 2}")
    if not stamps.is_monotonic_increasing:
        row = int(np.flatnonzero(np.diff(stamps.values.astype("int64")) < 0)[0]) + 1
        raise DataError(f"{path}: timestamps are not increasing at row {row + 2}")

    values = frame[value_columns].apply(pd.to_numeric, errors="coerce")
    values.index = pd.DatetimeIndex(stamps)
    offsets = values.index - values.index[0]
    if (offsets % pd.Timedelta(hours=1) != pd.Timedelta(0)).any():
        raise DataError(f"{path}: timestamps must be on an hourly grid")

    grid = pd.date_range(values.index[0], values.index[-1], freq="h")
    values = values.reindex(grid)

    missing = values.isna().any(axis=1).to_numpy()
    if missing.any():
        runs = np.diff(np.flatnonzero(np.diff(np.concatenate([[0], missing.astype(int), [0]]))))[::2]
        if runs.max() > MAX_GAP_HOURS:
            raise DataError(
                f"{path}: gap of {runs.max()} hours exceeds the {MAX_GAP_HOURS} hour limit"
            )
        if missing[0] or missing[-1]:
            raise DataError(f"{path}: series cannot start or end with missing values")
        logger.warning("%s: interpolated %d missing hour(s) in %d gap(s)", path, missing.sum(), len(runs))
        values = values.interpolate(method="linear", limit_area="inside")
    return values


def load_series_csv(path: Path, holidays=()) -> BuildingSeries:
    """Reads `timestamp,load[,temperature][,occupancy][,plug,lighting,hvac][,day_type]`."""
    path = Path(path)
    frame = _read_csv(path)
    _require_columns(frame, ("timestamp", "load"), path)
    if frame.empty:
        raise DataError(f"{path}: no rows")

    value_columns = ["load"] + [c for c in OPTIONAL_COLUMNS if c in frame.columns]
    values = _hourly_frame(frame, value_columns, path)
    timestamps = pd.DatetimeIndex(values.index)

    if "day_type" in frame.columns and len(frame) == len(values):
        try:
            working = np.array([DayType(v) is DayType.working for v in frame["day_type"]])
        except ValueError as e:
            raise DataError(f"{path}: {e}")
    else:
        working = assign_day_types(timestamps, holidays)

    column = lambda name: values[name].to_numpy(dtype=float) if name in values else None
    series = BuildingSeries(
        timestamps=timestamps,
        load=column("load"),
        working=working,
        temperature=column("temperature"),
        occupancy=column("occupancy"),
        systems={name: column(name) for name in SYSTEM_COLUMNS if name in values},
    )
    if np.any(series.load < 0):
        raise DataError(f"{path}: loads must be non-negative")
    logger.info("Loaded %s: %d hourly steps", path, len(series))
    return series


def write_series_csv(series: BuildingSeries, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = series.to_frame()
    frame["timestamp"] = frame["timestamp"].dt.strftime("%Y-%m-%dT%H:%M:%S")
    frame.to_csv(path, index=False, float_format="%.15g")
    return path


def load_schedules_csv(
    path: Path, cfg: GeneratorConfig = GeneratorConfig()
) -> dict[DayType, list[ReferenceSchedule]]:
    """
    Reads `day_type,hour,ratio[,tau_upper][,schedule]`. A blank tau_upper
    takes the default bound for that hour's ratio.
    """
    path = Path(path)
    frame = _read_csv(path)
    _require_columns(frame, ("day_type", "hour", "ratio"), path)
    if "schedule" not in frame.columns:
        frame["schedule"] = "default"
    if "tau_upper" not in frame.columns:
        frame["tau_upper"] = np.nan

    schedules: dict[DayType, list[ReferenceSchedule]] = {}
    for (day_type, name), group in frame.groupby(["day_type", "schedule"], sort=False):
        group = group.sort_values("hour")
        if list(group["hour"]) != list(range(STEPS_PER_DAY)):
            raise DataError(f"{path}: schedule '{name}' ({day_type}) must list hours 0-23 once each")
        ratios = group["ratio"].to_numpy(dtype=float)
        tau = group["tau_upper"].to_numpy(dtype=float)
        tau = np.where(np.isnan(tau), default_tau_upper(ratios, cfg), tau)
        try:
            schedule = ReferenceSchedule(DayType(day_type), ratios, tau, str(name))
        except ValueError as e:
            raise DataError(f"{path}: schedule '{name}': {e}")
        schedules.setdefault(schedule.day_type, []).append(schedule)

    for day_type in DayType:
        if day_type not in schedules:
            raise DataError(f"{path}: no schedule for {day_type.value} days")
    return schedules


def load_weather_csv(path: Path) -> pd.Series:
    """Reads `timestamp,temperature` into an hourly series."""
    path = Path(path)
    frame = _read_csv(path)
    _require_columns(frame, ("timestamp", "temperature"), path)
    return _hourly_frame(frame, ["temperature"], path)["temperature"]


def load_holidays(path: Path | None) -> list[date]:
    if path is None:
        return []
    frame = _read_csv(path)
    _require_columns(frame, ("date",), path)
    try:
        return [d.date() for d in pd.to_datetime(frame["date"], format="ISO8601")]
    except (ValueError, TypeError) as e:
        raise DataError(f"{path}: dates must be ISO-8601: {e}")


def level_columns(levels: LevelSet) -> list[str]:
    return [f"p_level_{k}" for k in range(levels.n_levels)]


def write_occupancy_csv(
    timestamps: pd.DatetimeIndex,
    posterior: PosteriorSeries,
    levels: LevelSet,
    path: Path,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(posterior.flat(), columns=level_columns(levels))
    frame.insert(0, "expected_ratio", posterior.expected_ratio(levels))
    frame.insert(0, "timestamp", pd.DatetimeIndex(timestamps).strftime("%Y-%m-%dT%H:%M:%S"))
    frame.to_csv(path, index=False, float_format="%.15g")
    return path


def read_occupancy_csv(path: Path) -> tuple[pd.DatetimeIndex, PosteriorSeries]:
    path = Path(path)
    frame = _read_csv(path)
    _require_columns(frame, ("timestamp", "expected_ratio"), path)
    columns = sorted(
        (c for c in frame.columns if c.startswith("p_level_")), key=lambda c: int(c.rsplit("_", 1)[1])
    )
    if not columns or len(frame) % STEPS_PER_DAY:
        raise DataError(f"{path}: expected whole days of p_level_* columns")

    timestamps = pd.DatetimeIndex(pd.to_datetime(frame["timestamp"], format="ISO8601"))
    probs = frame[columns].to_numpy(dtype=float).reshape(-1, STEPS_PER_DAY, len(columns))
    probs = probs / probs.sum(axis=-1, keepdims=True)
    return timestamps, PosteriorSeries(probs=probs, day_starts=timestamps[::STEPS_PER_DAY])

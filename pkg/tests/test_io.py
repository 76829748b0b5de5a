from datetime import date
import numpy as np
import pandas as pd
import pytest
from tests.helpers import BaseTestHelpers
from occuload.exceptions import DataError
from occuload.schemas.config import DayType, Scenario
from occuload.services.trainer import PosteriorSeries
from occuload.utils.io import (
    load_holidays,
    load_schedules_csv,
    load_series_csv,
    load_weather_csv,
    read_occupancy_csv,
    write_occupancy_csv,
    write_series_csv,
)


class TestSeriesCsv(BaseTestHelpers):
    def _write(self, tmp_path, rows, name="series.csv"):
        path = tmp_path / name
        pd.DataFrame(rows).to_csv(path, index=False)
        return path

    def _hourly_rows(self, hours=48, start="2023-01-02"):
        stamps = pd.date_range(start, periods=hours, freq="h")
        return {
            "timestamp": stamps.strftime("%Y-%m-%dT%H:%M:%S"),
            "load": np.linspace(10.0, 20.0, hours),
        }

    def test_simulated_round_trip(self, tmp_path):
        sim = self._simulate(days=3, scenario=Scenario.lumped)
        path = write_series_csv(sim.series, tmp_path / "bldg.csv")
        loaded = load_series_csv(path)

        assert len(loaded) == len(sim.series)
        np.testing.assert_allclose(loaded.load, sim.series.load, atol=1e-9)
        np.testing.assert_allclose(loaded.temperature, sim.series.temperature, atol=1e-9)
        np.testing.assert_allclose(loaded.systems["hvac"], sim.series.systems["hvac"], atol=1e-9)
        np.testing.assert_array_equal(loaded.working, sim.series.working)

    def test_two_column_file(self, tmp_path):
        loaded = load_series_csv(self._write(tmp_path, self._hourly_rows()))
        assert loaded.temperature is None
        assert loaded.occupancy is None
        assert loaded.systems == {}
        # 2023-01-02 is a Monday
        assert loaded.working.all()

    def test_holidays_set_day_types(self, tmp_path):
        loaded = load_series_csv(self._write(tmp_path, self._hourly_rows()), holidays=[date(2023, 1, 3)])
        assert loaded.working[:24].all()
        assert not loaded.working[24:].any()

    def test_day_type_column_wins(self, tmp_path):
        rows = self._hourly_rows(hours=24)
        rows["day_type"] = ["non_working"] * 24
        loaded = load_series_csv(self._write(tmp_path, rows))
        assert not loaded.working.any()

    def test_duplicated_timestamp_names_row(self, tmp_path):
        rows = pd.DataFrame(self._hourly_rows(hours=6))
        rows.loc[3, "timestamp"] = rows.loc[2, "timestamp"]
        with pytest.raises(DataError, match="row 5"):
            load_series_csv(self._write(tmp_path, rows))

    def test_decreasing_timestamps(self, tmp_path):
        rows = pd.DataFrame(self._hourly_rows(hours=6)).iloc[[0, 1, 3, 2, 4, 5]]
        with pytest.raises(DataError, match="not increasing"):
            load_series_csv(self._write(tmp_path, rows))

    def test_short_gap_is_interpolated(self, tmp_path):
        rows = pd.DataFrame(self._hourly_rows(hours=12)).drop(index=[4, 5])
        loaded = load_series_csv(self._write(tmp_path, rows))
        assert len(loaded) == 12
        np.testing.assert_allclose(loaded.load, np.linspace(10.0, 20.0, 12))

    def test_long_gap_is_rejected(self, tmp_path):
        rows = pd.DataFrame(self._hourly_rows(hours=12)).drop(index=[3, 4, 5, 6])
        with pytest.raises(DataError, match="gap of 4 hours"):
            load_series_csv(self._write(tmp_path, rows))

    def test_missing_value_at_edges(self, tmp_path):
        rows = pd.DataFrame(self._hourly_rows(hours=12))
        rows.loc[11, "load"] = np.nan
        with pytest.raises(DataError, match="start or end"):
            load_series_csv(self._write(tmp_path, rows))

    def test_off_grid_timestamps(self, tmp_path):
        rows = pd.DataFrame(self._hourly_rows(hours=4))
        rows.loc[2, "timestamp"] = "2023-01-02T02:30:00"
        with pytest.raises(DataError, match="hourly grid"):
            load_series_csv(self._write(tmp_path, rows))

    def test_negative_load(self, tmp_path):
        rows = pd.DataFrame(self._hourly_rows(hours=4))
        rows.loc[1, "load"] = -1.0
        with pytest.raises(DataError, match="non-negative"):
            load_series_csv(self._write(tmp_path, rows))

    def test_missing_columns_and_files(self, tmp_path):
        with pytest.raises(DataError, match="load"):
            load_series_csv(self._write(tmp_path, {"timestamp": ["2023-01-02T00:00:00"]}))
        with pytest.raises(DataError, match="not found"):
            load_series_csv(tmp_path / "absent.csv")


class TestAuxiliaryFiles(BaseTestHelpers):
    def _schedule_frame(self, **extra):
        rows = []
        for day_type, ratio in (("working", 0.6), ("non_working", 0.05)):
            for hour in range(24):
                rows.append({"day_type": day_type, "hour": hour, "ratio": ratio, **extra})
        return pd.DataFrame(rows)

    def test_schedules_with_default_tau(self, tmp_path):
        path = tmp_path / "schedules.csv"
        self._schedule_frame().to_csv(path, index=False)
        schedules = load_schedules_csv(path)
        assert set(schedules) == set(DayType)
        working = schedules[DayType.working][0]
        assert working.name == "default"
        assert np.all(working.tau_upper > 0)

    def test_schedules_keep_given_tau(self, tmp_path):
        path = tmp_path / "schedules.csv"
        self._schedule_frame(tau_upper=0.3).to_csv(path, index=False)
        np.testing.assert_allclose(load_schedules_csv(path)[DayType.non_working][0].tau_upper, 0.3)

    def test_schedules_need_every_hour_and_day_type(self, tmp_path):
        path = tmp_path / "schedules.csv"
        self._schedule_frame().drop(index=5).to_csv(path, index=False)
        with pytest.raises(DataError, match="hours 0-23"):
            load_schedules_csv(path)

        frame = self._schedule_frame()
        frame[frame["day_type"] == "working"].to_csv(path, index=False)
        with pytest.raises(DataError, match="non_working"):
            load_schedules_csv(path)

    def test_schedule_ratio_out_of_range(self, tmp_path):
        path = tmp_path / "schedules.csv"
        frame = self._schedule_frame()
        frame.loc[0, "ratio"] = 1.4
        frame.to_csv(path, index=False)
        with pytest.raises(DataError):
            load_schedules_csv(path)

    def test_bundled_schedules_load(self):
        from pathlib import Path
        import occuload

        path = Path(occuload.__file__).parent / "data" / "reference_schedules.csv"
        schedules = load_schedules_csv(path)
        assert len(schedules[DayType.working]) >= 1
        assert len(schedules[DayType.non_working]) >= 1

    def test_weather(self, tmp_path):
        path = tmp_path / "weather.csv"
        pd.DataFrame(
            {
                "timestamp": pd.date_range("2023-01-02", periods=5, freq="h").strftime("%Y-%m-%dT%H:%M:%S"),
                "temperature": [1.0, 2.0, np.nan, 4.0, 5.0],
            }
        ).to_csv(path, index=False)
        temps = load_weather_csv(path)
        np.testing.assert_allclose(temps.to_numpy(), [1.0, 2.0, 3.0, 4.0, 5.0])

    def test_holidays(self, tmp_path):
        assert load_holidays(None) == []
        path = tmp_path / "holidays.csv"
        pd.DataFrame({"date": ["2023-01-03", "2023-12-25"]}).to_csv(path, index=False)
        assert load_holidays(path) == [date(2023, 1, 3), date(2023, 12, 25)]

    def test_occupancy_round_trip(self, tmp_path, levels):
        stamps = pd.date_range("2023-01-02", periods=48, freq="h")
        probs = np.random.default_rng(self.seed).dirichlet(np.ones(4), size=(2, 24))
        posterior = PosteriorSeries(probs=probs, day_starts=stamps[::24])

        path = write_occupancy_csv(stamps, posterior, levels, tmp_path / "occupancy.csv")
        frame = pd.read_csv(path)
        assert list(frame.columns) == ["timestamp", "expected_ratio"] + [f"p_level_{k}" for k in range(4)]

        loaded_stamps, loaded = read_occupancy_csv(path)
        assert loaded_stamps.equals(stamps)
        np.testing.assert_allclose(loaded.probs, probs, atol=1e-12)

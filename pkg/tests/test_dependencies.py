import argparse
from pathlib import Path
import pytest
from tests.helpers import BaseTestHelpers
from occuload.dependencies import get_run_config, load_params_file, parse_hours
from occuload.exceptions import ConfigError, DataError, DomainError
from occuload.schemas.config import DEFAULT_SCHEDULES, DEMO_CONFIG, Scenario, load_run_config
from occuload.settings import Settings


def _args(**kwargs) -> argparse.Namespace:
    defaults = {"config": None, "seed": None, "scenario": None, "out": None, "input": None}
    defaults.update(kwargs)
    return argparse.Namespace(**defaults)


class TestRunConfig(BaseTestHelpers):
    def test_defaults(self):
        config = load_run_config()
        assert config.scenario is Scenario.separate
        assert config.schedules == DEFAULT_SCHEDULES
        assert config.train.top_k == 32
        assert len(config.simulation.buildings) == 3

    def test_demo_config(self):
        config = load_run_config(DEMO_CONFIG)
        assert config.scenario is Scenario.lumped
        assert config.seed == 7
        assert config.schedules.is_file()
        assert config.baselines.hmm.arrival_hours == [7, 8, 9]
        assert [b.name for b in config.simulation.buildings] == ["bldg-a"]

    def test_overrides_win_and_none_is_ignored(self):
        config = load_run_config(DEMO_CONFIG, seed=3, scenario=None)
        assert config.seed == 3
        assert config.scenario is Scenario.lumped

    def test_relative_paths_resolve_against_file(self, tmp_path):
        (tmp_path / "holidays.csv").write_text("date\n2023-01-03\n")
        path = tmp_path / "run.toml"
        path.write_text('holidays = "holidays.csv"\n\n[simulation]\nweather_csv = "weather.csv"\n')
        config = load_run_config(path)
        assert config.holidays == tmp_path / "holidays.csv"
        assert config.simulation.weather_csv == tmp_path / "weather.csv"

    def test_invalid_values_name_the_field(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text("[train]\ntop_k = 0\n")
        with pytest.raises(ConfigError, match="train.top_k"):
            load_run_config(path)

    def test_missing_referenced_file(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text('schedules = "nowhere.csv"\n')
        with pytest.raises(ConfigError, match="schedules"):
            load_run_config(path)

    def test_unreadable_files(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_run_config(tmp_path / "missing.toml")
        path = tmp_path / "broken.toml"
        path.write_text("seed = = 3\n")
        with pytest.raises(ConfigError, match="could not parse"):
            load_run_config(path)

    def test_building_index_out_of_range(self):
        with pytest.raises(ConfigError, match="building index"):
            load_run_config(building=5)


class TestCommandPlumbing(BaseTestHelpers):
    def test_settings_fallbacks(self, tmp_path):
        config = get_run_config(_args())
        assert config.out_dir == tmp_path / "out"

    def test_flags_override_config_file(self, tmp_path):
        config = get_run_config(_args(config=DEMO_CONFIG, seed=9, out=tmp_path / "x"))
        assert config.seed == 9
        assert config.out_dir == tmp_path / "x"
        assert config.scenario is Scenario.lumped

    def test_environment_settings(self, monkeypatch):
        monkeypatch.setenv("OCCULOAD_WORKERS", "4")
        monkeypatch.setenv("OCCULOAD_LOG_LEVEL", "debug")
        settings = Settings()
        assert settings.WORKERS == 4
        assert settings.LOG_LEVEL == "debug"

    def test_params_file(self, tmp_path):
        params = self._make_params(trained=True)
        path = params.save(tmp_path / "params.json")
        assert load_params_file(path) == params
        with pytest.raises(DataError):
            load_params_file(Path(tmp_path / "absent.json"))

    @pytest.mark.parametrize(
        "text, hours",
        [
            ("20-23", [20, 21, 22, 23]),
            ("20,21", [20, 21]),
            ("22-1", [0, 1, 22, 23]),
            ("0-2, 23", [0, 1, 2, 23]),
        ],
    )
    def test_parse_hours(self, text, hours):
        assert parse_hours(text) == hours

    @pytest.mark.parametrize("text", ["", "24", "a-b", "20-25"])
    def test_parse_hours_rejects(self, text):
        with pytest.raises(DomainError):
            parse_hours(text)

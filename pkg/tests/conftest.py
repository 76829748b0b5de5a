import pytest
from unittest.mock import patch
from occuload.schemas.config import LevelConfig
from occuload.utils.gm import LevelSet


# Keep every run's output inside the test's temporary directory
@pytest.fixture(autouse=True)
def isolated_settings(tmp_path):
    with patch("occuload.settings.settings.OUT_DIR", tmp_path / "out"), patch(
        "occuload.settings.settings.CONFIG", None
    ):
        yield


@pytest.fixture
def levels():
    return LevelSet.from_config(LevelConfig())


@pytest.fixture
def out_dir(tmp_path):
    path = tmp_path / "out"
    path.mkdir()
    return path

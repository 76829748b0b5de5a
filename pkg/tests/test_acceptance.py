from pathlib import Path
import pandas as pd
import pytest
import occuload
from tests.helpers import BaseTestHelpers
from occuload.schemas.config import Scenario, default_buildings, load_run_config
from occuload.services.pipeline import MODEL_METHOD, run_portfolio

DEMO_CONFIG = Path(occuload.__file__).parent / "data" / "demo.toml"
BASELINES = ("kmeans", "gmm", "hmm")


def _demo_portfolio(out_dir: Path, scenario: Scenario) -> pd.DataFrame:
    """Demo run over the three bundled buildings, one row per (building, method)."""
    config = load_run_config(DEMO_CONFIG, scenario=scenario, out_dir=out_dir)
    simulation = config.simulation.model_copy(update={"buildings": default_buildings()})
    metrics = run_portfolio(config.model_copy(update={"simulation": simulation}))
    metrics = metrics.dropna(subset=["value"]).astype({"value": float})
    return metrics.pivot(index=["building", "method"], columns="metric", values="value")


@pytest.fixture(scope="module")
def separate_table(tmp_path_factory):
    return _demo_portfolio(tmp_path_factory.mktemp("separate"), Scenario.separate)


@pytest.fixture(scope="module")
def lumped_table(tmp_path_factory):
    return _demo_portfolio(tmp_path_factory.mktemp("lumped"), Scenario.lumped)


@pytest.mark.slow
class TestDemoBuildings(BaseTestHelpers):
    buildings = [b.name for b in default_buildings()]

    def test_separate_meter_accuracy(self, separate_table):
        model = separate_table.xs(MODEL_METHOD, level="method")
        assert sorted(model.index) == sorted(self.buildings)
        assert (model["f1_macro"] >= 0.70).all(), model["f1_macro"]
        assert (model["rmse_overall"] <= 0.15).all(), model["rmse_overall"]

    def test_lumped_meter_accuracy(self, lumped_table):
        model = lumped_table.xs(MODEL_METHOD, level="method")
        assert (model["f1_macro"] >= 0.60).all(), model["f1_macro"]
        assert (model["rmse_overall"] <= 0.20).all(), model["rmse_overall"]

    def test_lumped_model_beats_clustering_baselines(self, lumped_table):
        for building in self.buildings:
            model_f1 = lumped_table.loc[(building, MODEL_METHOD), "f1_macro"]
            for method in BASELINES:
                assert model_f1 > lumped_table.loc[(building, method), "f1_macro"], (building, method)

    def test_lumped_capacity_and_signature(self, lumped_table):
        model = lumped_table.xs(MODEL_METHOD, level="method")
        within = model["capacity_error_dynamic_total"].abs() <= 25.0
        assert within.mean() >= 0.8, model["capacity_error_dynamic_total"]
        assert (model["es_r2_grid_aligned"] >= 0.8).all(), model["es_r2_grid_aligned"]

"""
End-to-end runs for one building or a portfolio.

Stages: load (or simulate) -> generate -> train -> infer -> evaluate ->
baselines -> emit. A failure inside a stage is re-raised as StageError
carrying the stage name.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
import numpy as np
import pandas as pd
from occuload.exceptions import DataError, StageError
from occuload.schemas.config import DayType, RunConfig, Scenario, SimBuilding
from occuload.schemas.params import DisaggregatorParams, GroundTruth
from occuload.schemas.series import STEPS_PER_DAY, BuildingSeries
from occuload.services import baselines, evaluation
from occuload.services.disaggregator import gate_splines, init_params, system_means
from occuload.services.generator import CandidatePool, generate_pool
from occuload.services.synth import hourly_index, hvac_curve, simulate_building
from occuload.services.trainer import InferenceResult, TrainResult, infer, train
from occuload.utils.gm import LevelSet
from occuload.utils.io import (
    load_holidays,
    load_schedules_csv,
    load_series_csv,
    load_weather_csv,
    write_occupancy_csv,
    write_series_csv,
)

logger = logging.getLogger(__name__)

MODEL_METHOD = "occuload"
METRIC_COLUMNS = ["building", "method", "metric", "value"]


@contextmanager
def stage(name: str):
    logger.info("stage %s", name)
    try:
        yield
    except StageError:
        raise
    except Exception as e:
        raise StageError(name, e) from e


@dataclass(frozen=True)
class PreparedData:
    name: str
    series: BuildingSeries
    train: BuildingSeries
    evaluation: BuildingSeries
    eval_start_day: int
    truth: GroundTruth | None = None
    building: SimBuilding | None = None


@dataclass
class PipelineResult:
    name: str
    out_dir: Path
    params: DisaggregatorParams
    metrics: pd.DataFrame
    artifacts: dict[str, Path] = field(default_factory=dict)


def building_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def weather_for_period(weather: pd.Series, start, days: int) -> np.ndarray:
    values = weather.reindex(hourly_index(start, days))
    if values.isna().any():
        raise DataError(f"weather file does not cover {days} days from {start}")
    return values.to_numpy(dtype=float)


# --- Stages ---
def prepare_data(config: RunConfig) -> PreparedData:
    holidays = load_holidays(config.holidays)
    truth, building = None, None

    if config.input is not None:
        series = load_series_csv(config.input, holidays).whole_days()
        n_train = int(round(config.train_fraction * series.n_days))
        name = Path(config.input).stem
    else:
        sim = config.simulation
        building = sim.buildings[config.building]
        days = sim.train_days + sim.test_days
        temperature = None
        if sim.weather_csv is not None:
            temperature = weather_for_period(load_weather_csv(sim.weather_csv), sim.start, days)
        series, truth = simulate_building(
            building,
            days,
            building_seed(config.seed, config.building),
            scenario=config.scenario,
            start=sim.start,
            rho=sim.weather_rho,
            noise_std=sim.weather_noise_std,
            temperature=temperature,
            holidays=holidays,
        )
        n_train = sim.train_days
        name = building.name

    if config.scenario is Scenario.lumped and not series.has_temperature:
        raise DataError("the lumped scenario needs a temperature column")

    n_train = min(max(n_train, 1), series.n_days)
    if n_train < series.n_days:
        evaluation_window, eval_start = series.slice_days(n_train, series.n_days), n_train
    else:
        logger.warning("no held-out days, evaluating on the training period")
        evaluation_window, eval_start = series, 0

    return PreparedData(
        name=name,
        series=series,
        train=series.slice_days(0, n_train),
        evaluation=evaluation_window,
        eval_start_day=eval_start,
        truth=truth,
        building=building,
    )


def build_pool(config: RunConfig) -> CandidatePool:
    schedules = load_schedules_csv(config.schedules, config.generator)
    sizes = {
        DayType.working: config.generator.working_size,
        DayType.non_working: config.generator.non_working_size,
    }
    return generate_pool(
        schedules,
        LevelSet.from_config(config.levels),
        sizes,
        seed=config.seed,
        tau_min=config.generator.tau_min,
    )


def initial_params(config: RunConfig, data: PreparedData) -> DisaggregatorParams:
    metadata = config.init
    if data.building is not None:
        metadata = metadata.model_copy(update={"floor_area": data.building.floor_area})
    lumped = config.scenario is Scenario.lumped
    return init_params(
        metadata,
        temperature=data.train.temperature if lumped else None,
        load=data.train.load,
        spline=config.spline,
        levels=config.levels,
        scenario=config.scenario,
    )


def truth_ratios(series: BuildingSeries, quantile: float) -> np.ndarray | None:
    """Ground-truth ratios, normalizing occupant counts when the column holds counts."""
    if series.occupancy is None:
        return None
    occupancy = np.asarray(series.occupancy, dtype=float)
    if np.nanmax(occupancy) > 1.0:
        return evaluation.normalize_counts(occupancy, quantile)
    return occupancy


def _rows(name: str, method: str, metrics: dict[str, float | None]) -> list[dict]:
    return [
        {"building": name, "method": method, "metric": metric, "value": value}
        for metric, value in metrics.items()
    ]


def _level_metrics(f1: evaluation.F1Report, rmse: evaluation.RmseReport | None = None) -> dict:
    metrics = {f"f1_{lvl}": float(v) for lvl, v in zip(evaluation.LEVEL_NAMES, f1.per_level)}
    metrics["f1_macro"] = f1.macro
    metrics["f1_weighted"] = f1.weighted
    if rmse is not None:
        metrics.update({f"rmse_{lvl}": v for lvl, v in rmse.per_level.items()})
        metrics["rmse_overall"] = rmse.overall
    return metrics


@dataclass(frozen=True)
class TruthLabels:
    ratios: np.ndarray
    thresholds: evaluation.LevelThresholds
    labels: np.ndarray


def truth_labels(config: RunConfig, data: PreparedData) -> TruthLabels | None:
    ratios = truth_ratios(data.evaluation, config.evaluation.count_quantile)
    if ratios is None:
        logger.warning("%s has no occupancy column, skipping accuracy metrics", data.name)
        return None
    thresholds, labels = evaluation.discretize_truth(
        ratios, restarts=config.evaluation.kmeans_restarts, seed=config.seed
    )
    return TruthLabels(ratios=ratios, thresholds=thresholds, labels=labels)


def evaluate_model(
    config: RunConfig,
    data: PreparedData,
    inference: InferenceResult,
    params: DisaggregatorParams,
    truth: TruthLabels | None,
) -> list[dict]:
    offset = data.eval_start_day * STEPS_PER_DAY
    predicted = inference.expected_ratio[offset : offset + len(data.evaluation)]

    capacities = params.capacities()
    metrics = {
        "identified_capacity_kw": capacities["plug_dynamic"] + capacities["light_dynamic"],
        "empirical_capacity_kw": evaluation.empirical_capacity(data.evaluation.load),
    }
    if truth is not None:
        f1 = evaluation.f1_report(truth.thresholds.apply(predicted), truth.labels)
        rmse = evaluation.rmse_by_level(predicted, truth.ratios, truth.thresholds)
        metrics.update(_level_metrics(f1, rmse))

    if data.truth is not None:
        errors = evaluation.capacity_error(params, data.truth.capacities)
        metrics.update({f"capacity_error_{name}": value for name, value in errors.items()})
        true_dynamic = data.truth.capacities["plug_dynamic"] + data.truth.capacities["light_dynamic"]
        metrics["capacity_error_dynamic_total"] = (
            100.0 * (metrics["identified_capacity_kw"] - true_dynamic) / true_dynamic
        )

    lumped = config.scenario is Scenario.lumped
    window = data.evaluation
    if lumped and "hvac" in window.systems and window.occupancy is not None and data.building is not None:
        hvac = data.building.hvac
        occupied = np.asarray(window.occupancy) >= hvac.occupied_threshold
        for suffix, align in (("", False), ("_aligned", True)):
            metrics[f"es_r2_heldout{suffix}"] = evaluation.es_r2(
                params, window.systems["hvac"], window.temperature, occupied, align=align
            )

        # the splines are only defined over the span they were trained on
        lo, hi = np.quantile(data.train.temperature, [0.05, 0.95])
        grid = np.linspace(lo, hi, config.evaluation.es_grid_points)
        unoccupied_truth = hvac_curve(hvac, grid, np.zeros_like(grid, dtype=bool))
        occupied_truth = hvac_curve(hvac, grid, np.ones_like(grid, dtype=bool))
        for suffix, align in (("", False), ("_aligned", True)):
            metrics[f"es_r2_grid{suffix}"] = evaluation.curve_r2(
                params, grid, unoccupied_truth, occupied_truth, align=align
            )

    return _rows(data.name, MODEL_METHOD, metrics)


@dataclass(frozen=True)
class BaselineOutput:
    rows: list[dict]
    frame: pd.DataFrame


def run_baselines(config: RunConfig, data: PreparedData, truth: TruthLabels | None) -> BaselineOutput:
    cfg = config.baselines
    window = data.evaluation
    residual = np.asarray(window.load, dtype=float)
    if config.scenario is Scenario.lumped:
        es = baselines.fit_piecewise_es(
            data.train.load,
            data.train.temperature,
            max_breakpoints=cfg.es_max_breakpoints,
            resolution=cfg.es_resolution,
        )
        logger.info("energy signature: breakpoints %s, slopes %s", es.breakpoints, es.slopes)
        residual = baselines.remove_weather_trend(window.load, window.temperature, es=es)

    rows = []
    timestamps = window.timestamps.strftime("%Y-%m-%dT%H:%M:%S")

    z_max = max(cfg.scaler_grid)
    if truth is not None:
        sweep = baselines.scaler_sweep(residual, truth.ratios, cfg.scaler_grid)
        z_max = sweep.best_z_max
    ratios = baselines.linear_scaler(residual, z_max)
    frames = [pd.DataFrame({"timestamp": timestamps, "method": "linear_scaler", "ratio": ratios})]
    if truth is not None:
        f1 = evaluation.f1_report(truth.thresholds.apply(ratios), truth.labels)
        rmse = evaluation.rmse_by_level(ratios, truth.ratios, truth.thresholds)
        rows += _rows(data.name, "linear_scaler", {"z_max": z_max, **_level_metrics(f1, rmse)})

    clusterings = {
        "kmeans": baselines.kmeans_levels(residual, cfg.n_clusters, seed=cfg.seed),
        "gmm": baselines.gmm_levels(residual, cfg.n_clusters, seed=cfg.seed),
        "hmm": baselines.hmm_levels(residual, window.hours, window.working, cfg.hmm_states, cfg.hmm),
    }
    for method, result in clusterings.items():
        frame = pd.DataFrame({"timestamp": timestamps, "method": method, "cluster": result.labels})
        if result.probs is not None:
            for k in range(result.probs.shape[1]):
                frame[f"p_cluster_{k}"] = result.probs[:, k]
        if truth is not None:
            mapped = evaluation.map_clusters(result.labels, truth.labels, result.centers)
            frame["level"] = np.asarray(mapped.mapping)[result.labels]
            rows += _rows(data.name, method, _level_metrics(mapped.f1))
            logger.info("%s mapping %s: macro F1 %.3f", method, mapped.mapping, mapped.f1.macro)
        frames.append(frame)

    return BaselineOutput(rows=rows, frame=pd.concat(frames, ignore_index=True))


# --- Emitters ---
def systems_frame(
    params: DisaggregatorParams,
    series: BuildingSeries,
    inference: InferenceResult,
    levels: LevelSet,
) -> pd.DataFrame:
    expected = system_means(params, inference.posterior.flat(), series.temperature, levels)
    frame = pd.DataFrame({"timestamp": series.timestamps.strftime("%Y-%m-%dT%H:%M:%S"), "load": series.load})
    for name, values in expected.items():
        frame[name] = values
    return frame


def es_curves_frame(
    params: DisaggregatorParams,
    series: BuildingSeries,
    inference: InferenceResult,
    levels: LevelSet,
    points: int,
) -> pd.DataFrame:
    """
    Both gate splines over the normalization domain. Lumped runs add curves
    offset by the mean occupant-driven load of inferred unoccupied and
    occupied hours so they overlay a whole-building load/temperature scatter.
    """
    lo, hi = params.spline.domain
    temps = params.temp_mean + params.temp_std * np.linspace(lo, hi, points)
    unoccupied, occupied = gate_splines(params, temps)
    frame = pd.DataFrame({"temperature": temps, "unoccupied": unoccupied, "occupied": occupied})

    if params.scenario is Scenario.lumped:
        probs = inference.posterior.flat()
        expected = system_means(params, probs, None, levels)
        occupant_load = expected["plug"] + expected["lighting"]
        empty = probs[:, 0] >= 0.5
        offset_empty = float(occupant_load[empty].mean()) if empty.any() else 0.0
        offset_busy = float(occupant_load[~empty].mean()) if (~empty).any() else 0.0
        frame["unoccupied_aligned"] = unoccupied + offset_empty
        frame["occupied_aligned"] = occupied + offset_busy
    return frame


def metrics_frame(rows: list[dict]) -> pd.DataFrame:
    return pd.DataFrame(rows, columns=METRIC_COLUMNS)


def write_metrics(frame: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.8f")
    return path


def summary_table(frame: pd.DataFrame) -> str:
    if frame.empty:
        return "no metrics"
    table = frame.pivot_table(index="method", columns="metric", values="value", aggfunc="first", sort=True)
    return table.to_string(float_format=lambda v: f"{v:.4f}", na_rep="-")


def emit(
    config: RunConfig,
    data: PreparedData,
    result: TrainResult,
    inference: InferenceResult,
    metrics: pd.DataFrame,
    baseline_frame: pd.DataFrame | None,
    out_dir: Path,
) -> dict[str, Path]:
    levels = LevelSet.from_config(config.levels)
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts = {
        "occupancy": write_occupancy_csv(
            inference.timestamps, inference.posterior, levels, out_dir / "occupancy.csv"
        ),
        "params": result.params.save(out_dir / "params.json"),
        "metrics": write_metrics(metrics, out_dir / "metrics.csv"),
    }

    path = out_dir / "systems.csv"
    systems_frame(result.params, data.series, inference, levels).to_csv(path, index=False, float_format="%.8f")
    artifacts["systems"] = path

    path = out_dir / "es_curves.csv"
    es_curves_frame(result.params, data.series, inference, levels, config.evaluation.es_grid_points).to_csv(
        path, index=False, float_format="%.8f"
    )
    artifacts["es_curves"] = path

    path = out_dir / "training_log.csv"
    result.history_frame().to_csv(path, index=False)
    artifacts["training_log"] = path

    if baseline_frame is not None:
        path = out_dir / "baselines.csv"
        baseline_frame.to_csv(path, index=False, float_format="%.8f")
        artifacts["baselines"] = path

    if data.truth is not None:
        artifacts["series"] = write_series_csv(data.series, out_dir / "series.csv")
        artifacts["ground_truth"] = data.truth.save(out_dir / "ground_truth.json")

    path = out_dir / "summary.txt"
    path.write_text(summary_table(metrics) + "\n")
    artifacts["summary"] = path

    for name, artifact in artifacts.items():
        logger.info("wrote %s: %s", name, artifact)
    return artifacts


def run_pipeline(config: RunConfig, out_dir: Path | None = None) -> PipelineResult:
    out_dir = Path(out_dir or config.out_dir)
    levels = LevelSet.from_config(config.levels)

    with stage("load"):
        data = prepare_data(config)
    with stage("generate"):
        pool = build_pool(config)
    with stage("train"):
        result = train(data.train, pool, initial_params(config, data), config.train, levels)
    with stage("infer"):
        inference = infer(data.series, pool, result.params, levels, config.train.top_k)
    with stage("evaluate"):
        truth = truth_labels(config, data)
        rows = evaluate_model(config, data, inference, result.params, truth)
    with stage("baselines"):
        baseline = run_baselines(config, data, truth)
        rows += baseline.rows
    with stage("emit"):
        metrics = metrics_frame(rows)
        artifacts = emit(config, data, result, inference, metrics, baseline.frame, out_dir)

    logger.info("%s summary\n%s", data.name, summary_table(metrics))
    return PipelineResult(
        name=data.name, out_dir=out_dir, params=result.params, metrics=metrics, artifacts=artifacts
    )


# --- Portfolio ---
def _run_metrics(config: RunConfig) -> pd.DataFrame:
    return run_pipeline(config).metrics


def portfolio_configs(config: RunConfig, directory: Path | None = None) -> list[RunConfig]:
    """One config per building CSV in directory, or per simulated building without one."""
    root = Path(config.out_dir)
    if directory is None:
        return [
            config.model_copy(update={"building": i, "out_dir": root / b.name})
            for i, b in enumerate(config.simulation.buildings)
        ]
    paths = sorted(Path(directory).glob("*.csv"))
    if not paths:
        raise DataError(f"no building CSV files in {directory}")
    return [config.model_copy(update={"input": p, "out_dir": root / p.stem}) for p in paths]


def run_portfolio(config: RunConfig, directory: Path | None = None, workers: int = 1) -> pd.DataFrame:
    configs = portfolio_configs(config, directory)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            frames = list(pool.map(_run_metrics, configs))
    else:
        frames = [_run_metrics(c) for c in configs]

    merged = pd.concat(frames, ignore_index=True)
    write_metrics(merged, Path(config.out_dir) / "portfolio_metrics.csv")
    logger.info("portfolio of %d buildings written to %s", len(configs), config.out_dir)
    return merged

import argparse
import logging
from pathlib import Path
from occuload.dependencies import add_common_arguments, get_levels, get_run_config, load_params_file
from occuload.exceptions import DimensionError
from occuload.services.pipeline import (
    evaluate_model,
    metrics_frame,
    prepare_data,
    stage,
    summary_table,
    truth_labels,
    write_metrics,
)
from occuload.services.trainer import InferenceResult
from occuload.utils.io import read_occupancy_csv

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("evaluate", help="score inferred occupancy against ground truth")
    add_common_arguments(parser)
    parser.add_argument("--params", type=Path, required=True, help="params.json from train")
    parser.add_argument("--occupancy", type=Path, required=True, help="occupancy.csv from infer")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = get_run_config(args)
    out_dir = Path(config.out_dir)
    levels = get_levels(config)

    with stage("load"):
        params = load_params_file(args.params)
        data = prepare_data(config)
        timestamps, posterior = read_occupancy_csv(args.occupancy)
        if len(timestamps) != len(data.series):
            raise DimensionError(
                f"occupancy file has {len(timestamps)} steps, the series has {len(data.series)}"
            )
    with stage("evaluate"):
        inference = InferenceResult(
            posterior=posterior,
            expected_ratio=posterior.expected_ratio(levels),
            timestamps=timestamps,
        )
        metrics = metrics_frame(evaluate_model(config, data, inference, params, truth_labels(config, data)))
    with stage("emit"):
        write_metrics(metrics, out_dir / "metrics.csv")
        (out_dir / "summary.txt").write_text(summary_table(metrics) + "\n")

    logger.info("%s metrics\n%s", data.name, summary_table(metrics))
    return 0

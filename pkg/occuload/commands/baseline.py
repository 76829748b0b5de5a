import argparse
import logging
from pathlib import Path
from occuload.dependencies import add_common_arguments, get_run_config
from occuload.services.pipeline import (
    metrics_frame,
    prepare_data,
    run_baselines,
    stage,
    summary_table,
    truth_labels,
    write_metrics,
)

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("baseline", help="run the linear scaler, k-means, GMM and HMM baselines")
    add_common_arguments(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = get_run_config(args)
    out_dir = Path(config.out_dir)

    with stage("load"):
        data = prepare_data(config)
    with stage("baselines"):
        output = run_baselines(config, data, truth_labels(config, data))
    with stage("emit"):
        out_dir.mkdir(parents=True, exist_ok=True)
        output.frame.to_csv(out_dir / "baselines.csv", index=False, float_format="%.8f")
        metrics = metrics_frame(output.rows)
        write_metrics(metrics, out_dir / "baseline_metrics.csv")

    logger.info("%s baselines\n%s", data.name, summary_table(metrics))
    return 0

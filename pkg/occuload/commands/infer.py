import argparse
import logging
from pathlib import Path
from occuload.dependencies import add_common_arguments, get_levels, get_run_config, load_params_file
from occuload.services.pipeline import build_pool, es_curves_frame, prepare_data, stage, systems_frame
from occuload.services.trainer import infer
from occuload.utils.io import write_occupancy_csv

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("infer", help="infer hourly occupancy with trained parameters")
    add_common_arguments(parser)
    parser.add_argument("--params", type=Path, required=True, help="params.json from train")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = get_run_config(args)
    out_dir = Path(config.out_dir)
    levels = get_levels(config)

    with stage("load"):
        params = load_params_file(args.params)
        data = prepare_data(config)
    with stage("generate"):
        pool = build_pool(config)
    with stage("infer"):
        inference = infer(data.series, pool, params, levels, config.train.top_k)
    with stage("emit"):
        write_occupancy_csv(inference.timestamps, inference.posterior, levels, out_dir / "occupancy.csv")
        systems_frame(params, data.series, inference, levels).to_csv(
            out_dir / "systems.csv", index=False, float_format="%.8f"
        )
        es_curves_frame(params, data.series, inference, levels, config.evaluation.es_grid_points).to_csv(
            out_dir / "es_curves.csv", index=False, float_format="%.8f"
        )

    logger.info("occupancy written to %s", out_dir / "occupancy.csv")
    return 0

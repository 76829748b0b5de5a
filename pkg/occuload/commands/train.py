import argparse
import logging
from pathlib import Path
from occuload.dependencies import add_common_arguments, get_levels, get_run_config
from occuload.services.pipeline import build_pool, initial_params, prepare_data, stage
from occuload.services.trainer import train

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("train", help="fit the load disaggregator on the training period")
    add_common_arguments(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = get_run_config(args)
    out_dir = Path(config.out_dir)

    with stage("load"):
        data = prepare_data(config)
    with stage("generate"):
        pool = build_pool(config)
    with stage("train"):
        result = train(data.train, pool, initial_params(config, data), config.train, get_levels(config))
    with stage("emit"):
        out_dir.mkdir(parents=True, exist_ok=True)
        result.params.save(out_dir / "params.json")
        result.history_frame().to_csv(out_dir / "training_log.csv", index=False)

    logger.info("final loss %.6f, parameters written to %s", result.losses[-1], out_dir / "params.json")
    return 0

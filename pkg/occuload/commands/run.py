import argparse
import logging
from occuload.dependencies import add_common_arguments, get_run_config
from occuload.services.pipeline import run_pipeline, run_portfolio
from occuload.settings import settings

logger = logging.getLogger(__name__)

SIMULATED = "simulated"


def register(subparsers) -> None:
    parser = subparsers.add_parser("run", help="full pipeline: load, train, infer, evaluate, baselines")
    add_common_arguments(parser)
    parser.add_argument(
        "--portfolio",
        nargs="?",
        const=SIMULATED,
        default=None,
        help="run every building CSV in a directory (or every simulated building when no directory is given)",
    )
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = get_run_config(args)
    if args.portfolio is None:
        run_pipeline(config)
        return 0

    directory = None if args.portfolio == SIMULATED else args.portfolio
    run_portfolio(config, directory, workers=settings.WORKERS)
    return 0

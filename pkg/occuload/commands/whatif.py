import argparse
import logging
from pathlib import Path
from occuload.dependencies import (
    add_common_arguments,
    get_levels,
    get_run_config,
    load_params_file,
    parse_hours,
)
from occuload.exceptions import DimensionError
from occuload.services.pipeline import prepare_data, stage
from occuload.services.whatif import whatif_setback
from occuload.utils.io import read_occupancy_csv

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("whatif", help="estimate savings from HVAC setback in unoccupied hours")
    add_common_arguments(parser)
    parser.add_argument("--params", type=Path, required=True, help="params.json from a lumped train")
    parser.add_argument("--occupancy", type=Path, required=True, help="occupancy.csv from infer")
    parser.add_argument("--hours", required=True, help="setback hours, e.g. 20-23 or 0-5,22,23")
    parser.add_argument(
        "--no-recalibrate",
        dest="recalibrate",
        action="store_false",
        help="price with the trained gate splines as they are",
    )
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = get_run_config(args)
    out_dir = Path(config.out_dir)

    with stage("load"):
        hours = parse_hours(args.hours)
        params = load_params_file(args.params)
        data = prepare_data(config)
        timestamps, posterior = read_occupancy_csv(args.occupancy)
        if len(timestamps) != len(data.series):
            raise DimensionError(
                f"occupancy file has {len(timestamps)} steps, the series has {len(data.series)}"
            )
    with stage("whatif"):
        report = whatif_setback(
            params, data.series, hours, posterior, get_levels(config), recalibrate=args.recalibrate
        )
    with stage("emit"):
        out_dir.mkdir(parents=True, exist_ok=True)
        per_day = report.per_day.assign(date=report.per_day["date"].dt.strftime("%Y-%m-%d"))
        per_day.to_csv(out_dir / "whatif.csv", index=False, float_format="%.6f")
        (out_dir / "whatif.txt").write_text(report.summary() + "\n")
    return 0

import argparse
import logging
from pathlib import Path
from occuload.dependencies import add_common_arguments, get_run_config
from occuload.services.pipeline import building_seed, stage, weather_for_period
from occuload.services.synth import simulate_building
from occuload.utils.io import load_holidays, load_weather_csv, write_series_csv

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("simulate", help="write synthetic building series with ground truth")
    add_common_arguments(parser)
    parser.add_argument(
        "--building", type=int, default=None, help="index of one configured building (default: all)"
    )
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = get_run_config(args)
    sim = config.simulation
    out_dir = Path(config.out_dir)
    indices = range(len(sim.buildings)) if args.building is None else [args.building]
    days = sim.train_days + sim.test_days

    with stage("simulate"):
        holidays = load_holidays(config.holidays)
        temperature = None
        if sim.weather_csv is not None:
            temperature = weather_for_period(load_weather_csv(sim.weather_csv), sim.start, days)

        for index in indices:
            building = sim.buildings[index]
            series, truth = simulate_building(
                building,
                days,
                building_seed(config.seed, index),
                scenario=config.scenario,
                start=sim.start,
                rho=sim.weather_rho,
                noise_std=sim.weather_noise_std,
                temperature=temperature,
                holidays=holidays,
            )
            path = write_series_csv(series, out_dir / f"{building.name}.csv")
            truth.save(out_dir / f"{building.name}_truth.json")
            logger.info("wrote %s", path)
    return 0

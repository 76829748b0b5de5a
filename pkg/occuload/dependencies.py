"""Shared command plumbing: common flags, config resolution and artifact loading."""
import argparse
import logging
from pathlib import Path
from occuload.exceptions import DataError, DomainError
from occuload.schemas.config import RunConfig, Scenario, load_run_config
from occuload.schemas.params import DisaggregatorParams
from occuload.settings import settings
from occuload.utils.gm import LevelSet

logger = logging.getLogger(__name__)


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="TOML run configuration")
    parser.add_argument("--seed", type=int, default=None, help="override the run seed")
    parser.add_argument(
        "--scenario", choices=[s.value for s in Scenario], default=None, help="metering scenario"
    )
    parser.add_argument("--out", type=Path, default=None, help="output directory")
    parser.add_argument("--input", type=Path, default=None, help="building series CSV")


def get_run_config(args: argparse.Namespace) -> RunConfig:
    """Config file (flag, then OCCULOAD_CONFIG) with command-line overrides on top."""
    path = args.config or settings.CONFIG
    out_dir = args.out
    if out_dir is None and path is None:
        out_dir = settings.OUT_DIR
    config = load_run_config(
        path,
        seed=args.seed,
        scenario=args.scenario,
        out_dir=out_dir,
        input=getattr(args, "input", None),
    )
    logger.debug("run config: %s", config.model_dump_json())
    return config


def get_levels(config: RunConfig) -> LevelSet:
    return LevelSet.from_config(config.levels)


def load_params_file(path: Path) -> DisaggregatorParams:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"parameter file not found: {path}")
    return DisaggregatorParams.load(path)


def parse_hours(text: str) -> list[int]:
    """'20-23' or '20,21,22,23' or a mix such as '0-5,22,23'. Ranges may wrap midnight."""
    hours = []
    try:
        for part in text.split(","):
            part = part.strip()
            if "-" in part:
                start, stop = (int(v) for v in part.split("-", 1))
                span = range(start, stop + 1) if start <= stop else [*range(start, 24), *range(0, stop + 1)]
                hours.extend(span)
            elif part:
                hours.append(int(part))
    except ValueError:
        raise DomainError(f"could not parse hours '{text}'")
    if not hours or any(h < 0 or h > 23 for h in hours):
        raise DomainError(f"hours must be within 0-23, got '{text}'")
    return sorted(set(hours))

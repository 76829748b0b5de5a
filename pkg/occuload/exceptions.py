import logging
from pydantic import ValidationError


logger = logging.getLogger(__name__)


class OccuLoadError(Exception):
    """Base class for every error raised by the package."""


class DimensionError(OccuLoadError, ValueError):
    pass


class DomainError(OccuLoadError, ValueError):
    pass


class AlignmentError(OccuLoadError, ValueError):
    pass


class DegenerateInputError(OccuLoadError, ValueError):
    pass


class DataError(OccuLoadError):
    pass


class TrainingError(OccuLoadError):
    def __init__(self, message: str, epoch: int | None = None, step: int | None = None):
        self.epoch = epoch
        self.step = step
        context = []
        if epoch is not None:
            context.append(f"epoch {epoch}")
        if step is not None:
            context.append(f"step {step}")
        if context:
            message = f"{message} ({', '.join(context)})"
        super().__init__(message)


class UntrainedModelError(OccuLoadError):
    pass


class ConfigError(OccuLoadError):
    pass


class StageError(OccuLoadError):
    """Wraps a failure with the pipeline stage it happened in."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")


def clean_validation_errors(exc: ValidationError) -> list[str]:
    """
    Flatten pydantic errors into one readable line per field.
    Raw inputs and ctx are dropped so large arrays never end up in messages.
    """
    cleaned = []
    for err in exc.errors():
        err.pop("ctx", None)
        err.pop("input", None)
        location = ".".join(str(part) for part in err.get("loc", ())) or "<root>"
        cleaned.append(f"{location}: {err.get('msg', 'invalid value')}")
    return cleaned


def config_error_from_validation(exc: ValidationError, source: str) -> ConfigError:
    details = "; ".join(clean_validation_errors(exc))
    return ConfigError(f"invalid configuration in {source}: {details}")


def handle_cli_error(exc: Exception) -> int:
    """Report an error raised by a subcommand and return the process exit code."""
    if isinstance(exc, StageError):
        logger.error("stage %s failed: %s", exc.stage, exc.cause)
        return 2
    if isinstance(exc, ConfigError):
        logger.error("configuration error: %s", exc)
        return 3
    if isinstance(exc, OccuLoadError):
        logger.error("%s: %s", type(exc).__name__, exc)
        return 1

    logger.exception("unexpected error")
    return 1

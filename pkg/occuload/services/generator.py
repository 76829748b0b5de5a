"""
Candidate occupancy profile generator.

Each candidate is a day of per-hour categorical distributions over the
occupancy levels, obtained by perturbing a deterministic reference schedule:
the distance of the reference ratio to every level centroid is turned into
logits with a randomly drawn temperature and normalized with a softmax.
Small temperatures give sharp (near one-hot) hours, large ones spread mass
over neighbouring levels.
"""
import logging
from collections.abc import Iterable
from dataclasses import dataclass
from datetime import date
import numpy as np
import pandas as pd
from scipy.special import softmax
from occuload.exceptions import DimensionError, DomainError
from occuload.schemas.config import DayType, GeneratorConfig
from occuload.schemas.series import STEPS_PER_DAY
from occuload.utils.gm import CategoricalProfile, LevelSet, validate_categorical

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReferenceSchedule:
    day_type: DayType
    ratios: np.ndarray
    tau_upper: np.ndarray
    name: str = "default"

    def __post_init__(self):
        ratios = np.asarray(self.ratios, dtype=float)
        tau_upper = np.asarray(self.tau_upper, dtype=float)
        if ratios.shape != (STEPS_PER_DAY,) or tau_upper.shape != (STEPS_PER_DAY,):
            raise DimensionError("reference schedules need 24 hourly ratios and tau bounds")
        if np.any((ratios < 0) | (ratios > 1)):
            raise DomainError("reference ratios must be within [0, 1]")
        if np.any(tau_upper <= 0):
            raise DomainError("tau upper bounds must be positive")
        object.__setattr__(self, "ratios", ratios)
        object.__setattr__(self, "tau_upper", tau_upper)
        object.__setattr__(self, "day_type", DayType(self.day_type))


@dataclass(frozen=True)
class CandidatePool:
    """Stacked candidate profiles, shape (count, 24, levels) per day type."""

    working: np.ndarray
    non_working: np.ndarray
    rng_seed: int

    def for_day_type(self, day_type: DayType | str) -> np.ndarray:
        return self.working if DayType(day_type) == DayType.working else self.non_working

    def profile(self, day_type: DayType | str, index: int) -> CategoricalProfile:
        return CategoricalProfile(self.for_day_type(day_type)[index], DayType(day_type))

    @property
    def size(self) -> int:
        return len(self.working) + len(self.non_working)


def default_tau_upper(ratios, cfg: GeneratorConfig) -> np.ndarray:
    """Low bound for inactive hours, a much larger one otherwise."""
    ratios = np.asarray(ratios, dtype=float)
    return np.where(ratios <= cfg.inactive_ratio, cfg.tau_inactive, cfg.tau_active)


# --- Sampling mechanics ---
def level_distance_scores(r_ref: float, levels: LevelSet) -> np.ndarray:
    if not 0.0 <= r_ref <= 1.0:
        raise DomainError(f"reference ratio must be within [0, 1], got {r_ref}")
    return np.abs(r_ref - levels.centroids)


def logits_from_scores(scores, tau: float) -> np.ndarray:
    if tau <= 0:
        raise DomainError(f"tau must be positive, got {tau}")
    return -np.asarray(scores, dtype=float) / tau


def softmax_probs(logits) -> np.ndarray:
    return softmax(np.asarray(logits, dtype=float), axis=-1)


def sample_daily_profile(
    schedule: ReferenceSchedule,
    levels: LevelSet,
    rng: np.random.Generator,
    tau_min: float = 0.01,
) -> CategoricalProfile:
    # tau ~ U(tau_min, T_t); when T_t itself is below tau_min the draw is pinned near T_t
    low = np.minimum(tau_min, schedule.tau_upper)
    taus = rng.uniform(low, schedule.tau_upper)

    scores = np.abs(schedule.ratios[:, None] - levels.centroids[None, :])
    probs = softmax_probs(-scores / taus[:, None])
    return CategoricalProfile(probs, schedule.day_type)


def _split_sizes(total: int, n_schedules: int) -> list[int]:
    base, remainder = divmod(total, n_schedules)
    return [base + (1 if i < remainder else 0) for i in range(n_schedules)]


def generate_pool(
    schedules: dict[DayType, list[ReferenceSchedule]],
    levels: LevelSet,
    sizes: dict[DayType, int],
    seed: int,
    tau_min: float = 0.01,
) -> CandidatePool:
    """
    Builds the candidate pool once. Every profile draws from its own child of
    the seed sequence, so profile i is the same whatever order or worker
    produced it.
    """
    stacks = {}
    for offset, day_type in enumerate((DayType.working, DayType.non_working)):
        size = sizes[day_type]
        day_schedules = schedules.get(day_type) or []
        if size <= 0:
            raise DomainError(f"pool size for {day_type.value} days must be positive")
        if not day_schedules:
            raise DomainError(f"no reference schedule for {day_type.value} days")

        children = np.random.SeedSequence([seed, offset]).spawn(size)
        profiles = []
        child_iter = iter(children)
        for schedule, count in zip(day_schedules, _split_sizes(size, len(day_schedules))):
            for _ in range(count):
                rng = np.random.default_rng(next(child_iter))
                profiles.append(sample_daily_profile(schedule, levels, rng, tau_min).probs)

        stack = np.stack(profiles)
        validate_categorical(stack)
        stack.setflags(write=False)
        stacks[day_type] = stack

    logger.info(
        "Generated candidate pool: %d working, %d non-working profiles (seed %d)",
        len(stacks[DayType.working]),
        len(stacks[DayType.non_working]),
        seed,
    )
    return CandidatePool(
        working=stacks[DayType.working],
        non_working=stacks[DayType.non_working],
        rng_seed=seed,
    )


# --- Calendar ---
def assign_day_types(timestamps: pd.DatetimeIndex, holidays: Iterable[date] = ()) -> np.ndarray:
    """True for working steps: weekdays that are not listed holidays."""
    holiday_days = pd.DatetimeIndex([pd.Timestamp(h) for h in holidays]).normalize()
    weekday = np.asarray(timestamps.dayofweek) < 5
    is_holiday = np.asarray(timestamps.normalize().isin(holiday_days))
    return weekday & ~is_holiday

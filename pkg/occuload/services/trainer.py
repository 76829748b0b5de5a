"""
Alternating trainer.

Step I scores every candidate profile of a day's type against that day's
observed loads, keeps the top-K log-likelihoods and averages those
candidates with softmax weights into the day's posterior. Step II holds the
posterior fixed and fits the disaggregator by minimizing the beta-weighted
expected negative log-likelihood with Adam.
"""
import logging
import time
from dataclasses import dataclass
import numpy as np
import pandas as pd
import torch
from scipy.special import logsumexp, softmax
from occuload.exceptions import DataError, DomainError, TrainingError
from occuload.schemas.config import DayType, Scenario, TrainConfig
from occuload.schemas.params import DisaggregatorParams
from occuload.schemas.series import STEPS_PER_DAY, BuildingSeries
from occuload.services.disaggregator import (
    DisaggregatorModule,
    LoadDesign,
    build_design,
    gate_anchor_basis,
    total_forward,
)
from occuload.services.generator import CandidatePool
from occuload.utils.gm import (
    CategoricalProfile,
    LevelSet,
    component_logpdf,
    gm_from_categorical,
    gm_logpdf,
    validate_categorical,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PosteriorSeries:
    """Optimal per-day, per-hour level distributions, shape (days, 24, levels)."""

    probs: np.ndarray
    day_starts: pd.DatetimeIndex

    def __post_init__(self):
        validate_categorical(self.probs)

    def flat(self) -> np.ndarray:
        return self.probs.reshape(-1, self.probs.shape[-1])

    def expected_ratio(self, levels: LevelSet) -> np.ndarray:
        return self.flat() @ levels.centroids


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    loss: float
    wall_time: float


@dataclass(frozen=True)
class TrainResult:
    params: DisaggregatorParams
    posterior: PosteriorSeries
    history: list[EpochLog]

    @property
    def losses(self) -> list[float]:
        return [entry.loss for entry in self.history]

    def history_frame(self) -> pd.DataFrame:
        return pd.DataFrame([vars(entry) for entry in self.history])


@dataclass(frozen=True)
class InferenceResult:
    posterior: PosteriorSeries
    expected_ratio: np.ndarray
    timestamps: pd.DatetimeIndex


# --- Step I ---
def candidate_loglik(
    candidate: CategoricalProfile,
    day: BuildingSeries,
    params: DisaggregatorParams,
    levels: LevelSet,
) -> float:
    """Sum over the day of the total-load mixture log-density at the observed load."""
    if len(day) != STEPS_PER_DAY:
        raise DataError(f"a scoring window needs {STEPS_PER_DAY} steps, got {len(day)}")
    if np.any(~np.isfinite(day.load)):
        raise DataError("missing load observations in scoring window")
    lumped = params.scenario is Scenario.lumped
    if lumped and (day.temperature is None or np.any(~np.isfinite(day.temperature))):
        raise DataError("missing temperature observations in scoring window")

    total = 0.0
    for t in range(STEPS_PER_DAY):
        z = gm_from_categorical(candidate.probs[t], levels)
        temp = day.temperature[t] if lumped else None
        loads = total_forward(z, temp, params, levels, params.scenario)
        total += gm_logpdf(loads.total, day.load[t])
    return total


def level_logpdf(module: DisaggregatorModule, design: LoadDesign) -> np.ndarray:
    """log N(P_t | mu_k, var_k) for every day, hour and level, in load-scale units."""
    with torch.no_grad():
        means, variances = module.moments(design)
    return component_logpdf(design.load.numpy()[..., None], means.numpy(), variances.numpy())


def score_candidates(day_logpdf: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """Log-likelihood of each candidate (count, 24, levels) for one day's (24, levels) densities."""
    per_step = logsumexp(day_logpdf[None, :, :], b=candidates, axis=-1)
    return per_step.sum(axis=-1)


def matching_scores(logliks, top_k: int) -> np.ndarray:
    """Softmax weights over the top_k log-likelihoods; every other candidate gets 0."""
    logliks = np.asarray(logliks, dtype=float)
    if logliks.size == 0:
        raise DomainError("need at least one candidate to score")
    keep = np.argsort(-logliks, kind="stable")[: min(top_k, logliks.size)]
    weights = np.zeros_like(logliks)
    weights[keep] = softmax(logliks[keep])
    return weights


def combine_candidates(candidates: np.ndarray, weights) -> np.ndarray:
    """Weighted average of candidate profiles, (count, 24, levels) -> (24, levels)."""
    weights = np.asarray(weights, dtype=float)
    if abs(weights.sum() - 1.0) > 1e-9:
        raise DomainError("candidate weights must sum to 1")
    return np.tensordot(weights, candidates, axes=1)


def build_posterior(
    module: DisaggregatorModule,
    design: LoadDesign,
    pool: CandidatePool,
    top_k: int,
    day_starts: pd.DatetimeIndex,
) -> PosteriorSeries:
    logpdf = level_logpdf(module, design)
    days = []
    for d in range(len(logpdf)):
        day_type = DayType.working if design.working[d] else DayType.non_working
        candidates = pool.for_day_type(day_type)
        weights = matching_scores(score_candidates(logpdf[d], candidates), top_k)
        kept = np.flatnonzero(weights)
        days.append(combine_candidates(candidates[kept], weights[kept]))

    probs = np.stack(days)
    # renormalize away float drift from the weighted sum
    probs = probs / probs.sum(axis=-1, keepdims=True)
    return PosteriorSeries(probs=probs, day_starts=day_starts)


# --- Step II ---
def _beta_nll(
    module: DisaggregatorModule,
    design: LoadDesign,
    posterior: torch.Tensor,
    beta: float,
    weight_variances: torch.Tensor | None = None,
) -> torch.Tensor:
    """
    -sum pi * stopgrad(var**beta) * log N(P | mu, var). weight_variances
    pins the variance weights to given values instead of the current ones.
    """
    means, variances = module.moments(design)
    log_density = -0.5 * (
        torch.log(2 * torch.pi * variances) + (design.load[..., None] - means) ** 2 / variances
    )
    pinned = variances if weight_variances is None else weight_variances
    weight = posterior * pinned.detach() ** beta
    return -(weight * log_density).sum()


def beta_nll_loss(
    posterior: PosteriorSeries,
    series: BuildingSeries,
    params: DisaggregatorParams,
    beta: float,
    levels: LevelSet,
    weight_params: DisaggregatorParams | None = None,
) -> float:
    """
    beta-NLL of a whole-day series under a fixed posterior, in kW units.
    With weight_params the variance weights come from that parameter set,
    which is the function whose gradient Step II follows.
    """
    series = series.whole_days()
    design = build_design(series, params, levels)
    module = DisaggregatorModule(params)
    with torch.no_grad():
        pinned = None
        if weight_params is not None:
            _, pinned = DisaggregatorModule(weight_params).moments(design)
        loss = _beta_nll(module, design, torch.as_tensor(posterior.probs), beta, pinned)
    return float(loss)


def beta_nll_gradients(
    posterior: PosteriorSeries,
    series: BuildingSeries,
    params: DisaggregatorParams,
    beta: float,
    levels: LevelSet,
) -> dict[str, np.ndarray]:
    """Gradients of beta_nll_loss with respect to each raw parameter, in kW units."""
    series = series.whole_days()
    design = build_design(series, params, levels)
    module = DisaggregatorModule(params)
    loss = _beta_nll(module, design, torch.as_tensor(posterior.probs), beta)
    loss.backward()
    return {name: p.grad.detach().numpy().copy() for name, p in module.named_parameters()}


def _day_starts(series: BuildingSeries) -> pd.DatetimeIndex:
    return series.timestamps[::STEPS_PER_DAY]


def _load_scale(series: BuildingSeries) -> float:
    peak = float(np.nanmax(np.abs(series.load)))
    return peak if peak > 0 else 1.0


def _lumped_constraints(series: BuildingSeries, params: DisaggregatorParams, config: TrainConfig) -> dict:
    if params.scenario is not Scenario.lumped:
        return {}
    return {
        "gate_anchor": gate_anchor_basis(params, series.temperature) if config.anchor_gates else None,
        "base_fraction": config.lumped_base_fraction,
    }


def train(
    series: BuildingSeries,
    pool: CandidatePool,
    params: DisaggregatorParams,
    config: TrainConfig,
    levels: LevelSet,
) -> TrainResult:
    """Alternates Step I and Step II for config.epochs epochs."""
    series = series.whole_days()
    if series.n_days < config.min_days:
        raise DataError(
            f"training needs at least {config.min_days} days of data, got {series.n_days}"
        )
    if np.any(~np.isfinite(series.load)):
        raise DataError("training series contains missing loads")

    torch.manual_seed(config.seed)
    load_scale = _load_scale(series)
    design = build_design(series, params, levels, load_scale)
    module = DisaggregatorModule(params, load_scale, **_lumped_constraints(series, params, config))
    optimizer = torch.optim.Adam(module.parameters(), lr=config.learning_rate)
    day_starts = _day_starts(series)

    history = []
    started = time.perf_counter()
    for epoch in range(config.epochs):
        posterior = build_posterior(module, design, pool, config.top_k, day_starts)
        posterior_t = torch.as_tensor(posterior.probs)

        loss = None
        for step in range(config.inner_iterations):
            optimizer.zero_grad()
            loss = _beta_nll(module, design, posterior_t, config.beta)
            if not torch.isfinite(loss):
                raise TrainingError("loss became non-finite", epoch=epoch, step=step)
            loss.backward()
            optimizer.step()

        with torch.no_grad():
            epoch_loss = float(_beta_nll(module, design, posterior_t, config.beta))
        if not np.isfinite(epoch_loss):
            raise TrainingError("loss became non-finite", epoch=epoch, step=config.inner_iterations)

        history.append(
            EpochLog(epoch=epoch, loss=epoch_loss, wall_time=time.perf_counter() - started)
        )
        logger.info("epoch %d: loss %.6f", epoch, epoch_loss)

    final = module.to_params(params, trained=True)
    posterior = build_posterior(module, design, pool, config.top_k, day_starts)
    return TrainResult(params=final, posterior=posterior, history=history)


def infer(
    series: BuildingSeries,
    pool: CandidatePool,
    params: DisaggregatorParams,
    levels: LevelSet,
    top_k: int = 32,
) -> InferenceResult:
    """Step I only: posterior and expected occupancy ratio under fixed parameters."""
    series = series.whole_days()
    if np.any(~np.isfinite(series.load)):
        raise DataError("inference series contains missing loads")

    load_scale = _load_scale(series)
    design = build_design(series, params, levels, load_scale)
    module = DisaggregatorModule(params, load_scale)
    posterior = build_posterior(module, design, pool, top_k, _day_starts(series))
    return InferenceResult(
        posterior=posterior,
        expected_ratio=posterior.expected_ratio(levels),
        timestamps=series.timestamps,
    )

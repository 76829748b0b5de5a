"""
Reference occupancy inference methods: linear scaler, k-means, Gaussian
mixture and an hour/day-type conditioned HMM, plus the piecewise-linear
energy-signature fit used to strip the weather trend from lumped loads
before any of them run.
"""
import logging
from dataclasses import dataclass
from itertools import combinations
import numpy as np
import pandas as pd
from scipy.special import logsumexp
from sklearn.cluster import KMeans
from occuload.exceptions import DataError, DegenerateInputError, DimensionError
from occuload.schemas.config import HmmPriorConfig
from occuload.utils.gm import VARIANCE_FLOOR, component_logpdf

logger = logging.getLogger(__name__)

DEFAULT_SCALER_GRID = tuple(np.round(np.arange(0.7, 1.0 + 1e-9, 0.05), 2))


# -------- LINEAR SCALER ----------
def linear_scaler(load, z_max: float) -> np.ndarray:
    load = np.asarray(load, dtype=float)
    p_min, p_max = np.min(load), np.max(load)
    if p_max <= p_min:
        raise DegenerateInputError("constant load series cannot be scaled")
    return np.clip(z_max * (load - p_min) / (p_max - p_min), 0.0, 1.0)


@dataclass(frozen=True)
class ScalerSweep:
    best_z_max: float
    table: pd.DataFrame


def scaler_sweep(load, truth, grid=DEFAULT_SCALER_GRID) -> ScalerSweep:
    truth = np.asarray(truth, dtype=float)
    rows = []
    for z_max in grid:
        error = linear_scaler(load, z_max) - truth
        rows.append({"z_max": float(z_max), "rmse": float(np.sqrt(np.mean(error**2)))})
    table = pd.DataFrame(rows)
    best = table.loc[table["rmse"].idxmin(), "z_max"]
    return ScalerSweep(best_z_max=float(best), table=table)


# -------- ENERGY SIGNATURE ----------
@dataclass(frozen=True)
class PiecewiseES:
    """Continuous piecewise-linear load vs temperature curve."""

    breakpoints: tuple[float, ...]
    slopes: tuple[float, ...]
    intercept: float

    def predict(self, temps) -> np.ndarray:
        temps = np.asarray(temps, dtype=float)
        result = self.intercept + self.slopes[0] * temps
        for j, b in enumerate(self.breakpoints):
            result = result + (self.slopes[j + 1] - self.slopes[j]) * np.maximum(0.0, temps - b)
        return result

    def minimum_on(self, lo: float, hi: float) -> float:
        # a piecewise-linear curve attains its minimum at an end or a breakpoint
        points = [lo, hi] + [b for b in self.breakpoints if lo <= b <= hi]
        return float(np.min(self.predict(points)))


def _hinge_design(temps: np.ndarray, breakpoints: tuple[float, ...]) -> np.ndarray:
    columns = [np.ones_like(temps), temps]
    columns += [np.maximum(0.0, temps - b) for b in breakpoints]
    return np.column_stack(columns)


def _fit_hinge(temps, loads, breakpoints):
    design = _hinge_design(temps, breakpoints)
    coeffs, *_ = np.linalg.lstsq(design, loads, rcond=None)
    sse = float(np.sum((loads - design @ coeffs) ** 2))
    return coeffs, sse


def fit_piecewise_es(
    loads,
    temps,
    max_breakpoints: int = 2,
    resolution: float = 0.5,
    min_observations: int = 50,
    min_span: float = 5.0,
) -> PiecewiseES:
    """
    Grid search over breakpoints at the given resolution; 0, 1 or 2
    breakpoints are compared by BIC.
    """
    loads = np.asarray(loads, dtype=float)
    temps = np.asarray(temps, dtype=float)
    if loads.shape != temps.shape:
        raise DimensionError("loads and temperatures must align")
    mask = np.isfinite(loads) & np.isfinite(temps)
    loads, temps = loads[mask], temps[mask]

    n = len(loads)
    if n < min_observations:
        raise DataError(f"energy signature fit needs {min_observations} observations, got {n}")
    if np.ptp(temps) < min_span:
        raise DataError(
            f"temperature span {np.ptp(temps):.2f} degC is below the required {min_span} degC"
        )

    lo, hi = np.quantile(temps, [0.05, 0.95])
    grid = np.arange(np.ceil(lo / resolution) * resolution, hi + 1e-9, resolution)
    candidates = {0: [()]}
    if max_breakpoints >= 1:
        candidates[1] = [(b,) for b in grid]
    if max_breakpoints >= 2:
        candidates[2] = [pair for pair in combinations(grid, 2) if pair[1] - pair[0] >= 2 * resolution]

    sse_floor = 1e-12 * max(float(np.sum((loads - loads.mean()) ** 2)), 1.0)
    best = None
    for count, options in candidates.items():
        if not options:
            continue
        fits = [(bps, *_fit_hinge(temps, loads, bps)) for bps in options]
        bps, coeffs, sse = min(fits, key=lambda item: item[2])
        n_params = 2 + 2 * count
        bic = n * np.log(max(sse, sse_floor) / n) + n_params * np.log(n)
        logger.debug("ES fit with %d breakpoints: sse=%.6g bic=%.6g", count, sse, bic)
        if best is None or bic < best[0]:
            best = (bic, bps, coeffs)

    _, bps, coeffs = best
    slopes = tuple(float(s) for s in np.cumsum(coeffs[1:]))
    return PiecewiseES(
        breakpoints=tuple(float(b) for b in bps),
        slopes=slopes,
        intercept=float(coeffs[0]),
    )


def remove_weather_trend(loads, temps, es: PiecewiseES | None = None, **fit_kwargs) -> np.ndarray:
    """Subtracts the fitted trend above its minimum so the base level survives."""
    loads = np.asarray(loads, dtype=float)
    temps = np.asarray(temps, dtype=float)
    if es is None:
        es = fit_piecewise_es(loads, temps, **fit_kwargs)
    trend = es.predict(temps) - es.minimum_on(float(np.min(temps)), float(np.max(temps)))
    return loads - trend


# -------- CLUSTERING ----------
@dataclass(frozen=True)
class ClusterResult:
    """Cluster labels ordered by center, 0 being the lowest center."""

    labels: np.ndarray
    centers: np.ndarray
    probs: np.ndarray | None = None
    loglik_trace: tuple[float, ...] = ()


def _check_cluster_input(values, k: int) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if np.any(~np.isfinite(values)):
        raise DataError("clustering input contains missing values")
    if len(values) < 10 * k:
        raise DataError(f"need at least {10 * k} observations for {k} clusters, got {len(values)}")
    if k > len(np.unique(values)):
        raise DegenerateInputError(f"cannot form {k} clusters from {len(np.unique(values))} distinct values")
    return values


def _canonical_order(centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(centers, kind="stable")
    relabel = np.empty_like(order)
    relabel[order] = np.arange(len(order))
    return order, relabel


CENTER_SHIFT_TOL = 1e-6


def kmeans_tolerance(values, center_shift: float = CENTER_SHIFT_TOL) -> float:
    """
    sklearn stops once the squared center shift falls below tol times the
    mean feature variance. This returns the tol that stops at an absolute
    center shift instead.
    """
    return center_shift**2 / max(float(np.var(values)), VARIANCE_FLOOR)


def kmeans_levels(values, k: int, seed: int = 0, n_init: int = 10) -> ClusterResult:
    values = _check_cluster_input(values, k)
    model = KMeans(
        n_clusters=k,
        init="k-means++",
        n_init=n_init,
        max_iter=300,
        tol=kmeans_tolerance(values),
        random_state=seed,
    ).fit(values.reshape(-1, 1))

    order, relabel = _canonical_order(model.cluster_centers_.ravel())
    return ClusterResult(
        labels=relabel[model.labels_],
        centers=model.cluster_centers_.ravel()[order],
    )


def gmm_levels(
    values,
    k: int,
    seed: int = 0,
    tol: float = 1e-7,
    max_iter: int = 500,
) -> ClusterResult:
    """EM for a scalar Gaussian mixture, started from k-means clusters."""
    x = _check_cluster_input(values, k)
    n = len(x)

    start = kmeans_levels(x, k, seed=seed)
    means = start.centers.copy()
    weights = np.bincount(start.labels, minlength=k) / n
    variances = np.array(
        [np.var(x[start.labels == j]) if np.any(start.labels == j) else np.var(x) for j in range(k)]
    )
    variances = np.maximum(variances, VARIANCE_FLOOR)

    trace = []
    resp = None
    for _ in range(max_iter):
        log_joint = np.log(weights) + component_logpdf(x[:, None], means, variances)
        log_norm = logsumexp(log_joint, axis=1)
        loglik = float(log_norm.sum())
        resp = np.exp(log_joint - log_norm[:, None])

        converged = bool(trace) and abs(loglik - trace[-1]) < tol
        trace.append(loglik)
        if converged:
            break

        counts = resp.sum(axis=0) + 1e-300
        weights = counts / n
        means = resp.T @ x / counts
        variances = np.maximum((resp * (x[:, None] - means) ** 2).sum(axis=0) / counts, VARIANCE_FLOOR)
    else:
        logger.warning("GMM did not converge within %d iterations", max_iter)

    order, _ = _canonical_order(means)
    probs = resp[:, order]
    return ClusterResult(
        labels=np.argmax(probs, axis=1),
        centers=means[order],
        probs=probs,
        loglik_trace=tuple(trace),
    )


# -------- HMM ----------
@dataclass(frozen=True)
class HmmModel:
    """Scalar-Gaussian HMM whose transitions depend on (hour, working day)."""

    means: np.ndarray
    variances: np.ndarray
    initial: np.ndarray
    transitions: np.ndarray  # (24, 2, states, states), row-stochastic

    @property
    def n_states(self) -> int:
        return len(self.means)


def prior_transitions(n_states: int, cfg: HmmPriorConfig) -> np.ndarray:
    """
    Transition prior: quiet hours and non-working days pull toward the lowest
    state, arrival hours push one state up, departure hours one state down.
    """
    s = n_states
    base = np.full((s, s), (1 - cfg.stay) / (s - 1))
    np.fill_diagonal(base, cfg.stay)

    down = np.zeros((s, s))
    down[np.arange(s), np.maximum(np.arange(s) - 1, 0)] = 1.0
    up = np.zeros((s, s))
    up[np.arange(s), np.minimum(np.arange(s) + 1, s - 1)] = 1.0
    lowest = np.zeros((s, s))
    lowest[:, 0] = 1.0

    transitions = np.empty((24, 2, s, s))
    for hour in range(24):
        transitions[hour, 0] = (1 - cfg.non_working_low) * base + cfg.non_working_low * lowest
        if hour in cfg.night_hours:
            working = (1 - cfg.night_low) * base + cfg.night_low * lowest
        elif hour in cfg.arrival_hours:
            working = (1 - cfg.shift) * base + cfg.shift * up
        elif hour in cfg.departure_hours:
            working = (1 - cfg.shift) * base + cfg.shift * down
        else:
            working = base
        transitions[hour, 1] = working
    return transitions


def forward_backward(
    log_emission: np.ndarray,
    initial: np.ndarray,
    step_transitions: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, float]:
    """
    Scaled forward-backward pass. step_transitions[t] moves from step t to t+1.
    Returns state posteriors (T, S), pair posteriors (T-1, S, S) and the log-likelihood.
    """
    n_steps, n_states = log_emission.shape
    offsets = log_emission.max(axis=1)
    emission = np.exp(log_emission - offsets[:, None])

    alpha = np.empty((n_steps, n_states))
    scale = np.empty(n_steps)
    alpha[0] = initial * emission[0]
    scale[0] = alpha[0].sum()
    alpha[0] /= scale[0]
    for t in range(1, n_steps):
        alpha[t] = (alpha[t - 1] @ step_transitions[t - 1]) * emission[t]
        scale[t] = alpha[t].sum()
        alpha[t] /= scale[t]

    beta = np.empty((n_steps, n_states))
    beta[-1] = 1.0
    for t in range(n_steps - 2, -1, -1):
        beta[t] = step_transitions[t] @ (emission[t + 1] * beta[t + 1]) / scale[t + 1]

    gamma = alpha * beta
    gamma /= gamma.sum(axis=1, keepdims=True)

    xi = (
        alpha[:-1, :, None]
        * step_transitions
        * (emission[1:] * beta[1:])[:, None, :]
        / scale[1:, None, None]
    )
    loglik = float(np.log(scale).sum() + offsets.sum())
    return gamma, xi, loglik


def _step_transitions(model: HmmModel, hours: np.ndarray, working: np.ndarray) -> np.ndarray:
    return model.transitions[hours[1:], working[1:].astype(int)]


def hmm_decode(model: HmmModel, values, hours, working) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    hours = np.asarray(hours, dtype=int)
    working = np.asarray(working, dtype=bool)
    log_emission = component_logpdf(values[:, None], model.means, model.variances)
    gamma, _, _ = forward_backward(log_emission, model.initial, _step_transitions(model, hours, working))
    return gamma


def hmm_fit(values, hours, working, n_states: int, cfg: HmmPriorConfig) -> HmmModel:
    """Baum-Welch with transitions tied per (hour, day type) slot across days."""
    x = np.asarray(values, dtype=float)
    hours = np.asarray(hours, dtype=int)
    working = np.asarray(working, dtype=bool)
    if not (len(x) == len(hours) == len(working)):
        raise DimensionError("values and calendar features must align")
    if np.any(~np.isfinite(x)):
        raise DataError("HMM input contains missing values")

    prior = prior_transitions(n_states, cfg)
    model = HmmModel(
        means=np.quantile(x, (np.arange(n_states) + 0.5) / n_states),
        variances=np.full(n_states, max(np.var(x) / n_states, VARIANCE_FLOOR)),
        initial=np.full(n_states, 1.0 / n_states),
        transitions=prior,
    )
    slots = (hours[1:], working[1:].astype(int))

    best, best_loglik, previous = model, -np.inf, None
    for iteration in range(cfg.max_iter):
        log_emission = component_logpdf(x[:, None], model.means, model.variances)
        gamma, xi, loglik = forward_backward(
            log_emission, model.initial, _step_transitions(model, hours, working)
        )
        if loglik > best_loglik:
            best, best_loglik = model, loglik
        if previous is not None and abs(loglik - previous) < cfg.tol * max(1.0, abs(loglik)):
            logger.debug("HMM converged after %d iterations", iteration)
            break
        previous = loglik

        occupancy = gamma.sum(axis=0)
        means = gamma.T @ x / occupancy
        variances = np.maximum((gamma * (x[:, None] - means) ** 2).sum(axis=0) / occupancy, VARIANCE_FLOOR)

        counts = np.zeros_like(prior)
        np.add.at(counts, slots, xi)
        counts += cfg.pseudo_count * prior
        totals = counts.sum(axis=-1, keepdims=True)
        transitions = np.where(totals > 0, counts / np.where(totals > 0, totals, 1.0), prior)

        model = HmmModel(means=means, variances=variances, initial=gamma[0], transitions=transitions)
    else:
        logger.warning(
            "HMM did not converge within %d iterations, returning best-so-far model", cfg.max_iter
        )

    order = np.argsort(best.means, kind="stable")
    return HmmModel(
        means=best.means[order],
        variances=best.variances[order],
        initial=best.initial[order],
        transitions=best.transitions[..., order, :][..., :, order],
    )


def hmm_levels(values, hours, working, n_states: int, cfg: HmmPriorConfig) -> ClusterResult:
    model = hmm_fit(values, hours, working, n_states, cfg)
    probs = hmm_decode(model, values, hours, working)
    return ClusterResult(labels=np.argmax(probs, axis=1), centers=model.means, probs=probs)

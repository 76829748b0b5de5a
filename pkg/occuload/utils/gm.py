"""
Gaussian-mixture algebra for level-aligned scalar mixtures.

A mixture built from a categorical occupancy distribution keeps one component
per occupancy level. Every load quantity derived from it (affine capacities,
spline shifts, system sums) keeps the same component weights, so sums can be
taken component by component.
"""
from dataclasses import dataclass
import numpy as np
from scipy.special import logsumexp
from scipy.stats import norm
from occuload.exceptions import AlignmentError, DimensionError, DomainError
from occuload.schemas.config import DayType

VARIANCE_FLOOR = 1e-8
PROB_TOL = 1e-9


def _frozen(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float, ndmin=1)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def validate_categorical(probs: np.ndarray, tol: float = PROB_TOL) -> None:
    """Checks that the last axis of probs holds valid categorical distributions."""
    probs = np.asarray(probs, dtype=float)
    if np.any(~np.isfinite(probs)):
        raise DomainError("probabilities must be finite")
    if np.any(probs < -tol):
        raise DomainError("probabilities must be non-negative")
    sums = probs.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > tol):
        raise DomainError(f"probabilities must sum to 1 (worst sum {sums.flat[np.argmax(np.abs(sums - 1.0))]:.12g})")


@dataclass(frozen=True)
class GaussianMixture1D:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        weights = _frozen(self.weights, "weights")
        means = _frozen(self.means, "means")
        variances = _frozen(self.variances, "variances")

        if not (len(weights) == len(means) == len(variances)) or len(weights) < 1:
            raise DimensionError(
                f"weights, means and variances need equal length >= 1 "
                f"(got {len(weights)}, {len(means)}, {len(variances)})"
            )
        validate_categorical(weights)
        if np.any(~np.isfinite(means)):
            raise DomainError("component means must be finite")
        if np.any(~(variances > 0)):
            raise DomainError("component variances must be strictly positive")

        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)

    @property
    def n_components(self) -> int:
        return len(self.weights)

    def mean(self) -> float:
        return float(np.dot(self.weights, self.means))

    def variance(self) -> float:
        second = np.dot(self.weights, self.variances + self.means**2)
        return float(second - self.mean() ** 2)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        components = rng.choice(self.n_components, size=n, p=self.weights)
        return rng.normal(self.means[components], np.sqrt(self.variances[components]))


@dataclass(frozen=True)
class LevelSet:
    """
    Ordered occupancy-level centroids. The first and last centroids are the
    mandatory zero and full occupancy levels.
    """

    centroids: np.ndarray
    boundary_offset: float = 0.02
    boundary_std: float = 0.02

    def __post_init__(self):
        centroids = _frozen(self.centroids, "centroids")
        if len(centroids) < 2:
            raise DimensionError("a level set needs at least the two boundary levels")
        if centroids[0] != 0.0 or centroids[-1] != 1.0:
            raise DomainError("first centroid must be 0 and last centroid must be 1")
        if np.any(np.diff(centroids) <= 0):
            raise DomainError("centroids must be strictly increasing")
        if not 0 < self.boundary_offset < 0.5 or self.boundary_std <= 0:
            raise DomainError("boundary offset must be in (0, 0.5) and boundary std positive")
        object.__setattr__(self, "centroids", centroids)

    @classmethod
    def uniform(cls, n_levels: int, **kwargs) -> "LevelSet":
        return cls(np.linspace(0.0, 1.0, n_levels), **kwargs)

    @classmethod
    def from_config(cls, cfg) -> "LevelSet":
        return cls(
            centroids=cfg.centroids,
            boundary_offset=cfg.boundary_offset,
            boundary_std=cfg.boundary_std,
        )

    @property
    def n_levels(self) -> int:
        return len(self.centroids)

    @property
    def bin_edges(self) -> np.ndarray:
        mids = (self.centroids[:-1] + self.centroids[1:]) / 2
        return np.concatenate([[0.0], mids, [1.0]])

    @property
    def component_means(self) -> np.ndarray:
        means = self.centroids.copy()
        means[0] = self.boundary_offset
        means[-1] = 1.0 - self.boundary_offset
        return means

    @property
    def component_variances(self) -> np.ndarray:
        # interior levels: variance of a uniform distribution over the bin
        variances = np.diff(self.bin_edges) ** 2 / 12
        variances[0] = variances[-1] = self.boundary_std**2
        return variances

    def collapsed_means(self) -> np.ndarray:
        means = self.component_means
        means[1:] = means[-1]
        return means

    def collapsed_variances(self) -> np.ndarray:
        variances = self.component_variances
        variances[1:] = variances[-1]
        return variances


@dataclass(frozen=True)
class CategoricalProfile:
    """A day of hourly categorical distributions over the occupancy levels."""

    probs: np.ndarray
    day_type: DayType

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 2 or probs.shape[0] != 24:
            raise DimensionError(f"profiles need shape (24, levels), got {probs.shape}")
        validate_categorical(probs)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "day_type", DayType(self.day_type))

    @property
    def n_levels(self) -> int:
        return self.probs.shape[1]


# --- Construction ---
def gm_from_categorical(probs, levels: LevelSet) -> GaussianMixture1D:
    probs = np.asarray(probs, dtype=float)
    if probs.shape != (levels.n_levels,):
        raise DimensionError(
            f"expected {levels.n_levels} level probabilities, got shape {probs.shape}"
        )
    validate_categorical(probs)
    return GaussianMixture1D(probs, levels.component_means, levels.component_variances)


# --- Transformations ---
def gm_affine(gm: GaussianMixture1D, scale: float, offset: float) -> GaussianMixture1D:
    if scale < 0:
        raise DomainError(f"affine scale must be non-negative, got {scale}")
    return GaussianMixture1D(
        gm.weights,
        scale * gm.means + offset,
        np.maximum(scale**2 * gm.variances, VARIANCE_FLOOR),
    )


def gm_shift_components(gm: GaussianMixture1D, shifts) -> GaussianMixture1D:
    shifts = np.asarray(shifts, dtype=float)
    if shifts.shape != (gm.n_components,):
        raise DimensionError(
            f"expected {gm.n_components} shifts, got shape {shifts.shape}"
        )
    return GaussianMixture1D(gm.weights, gm.means + shifts, gm.variances)


def gm_sum_aligned(gms: list[GaussianMixture1D]) -> GaussianMixture1D:
    """Component-aligned sum: means and variances add, weights are shared."""
    if not gms:
        raise DimensionError("need at least one mixture to sum")

    first = gms[0]
    for other in gms[1:]:
        if other.n_components != first.n_components:
            raise AlignmentError(
                f"component counts differ ({first.n_components} vs {other.n_components})"
            )
        if np.max(np.abs(other.weights - first.weights)) > PROB_TOL:
            raise AlignmentError("mixtures do not share component weights")

    means = np.sum([gm.means for gm in gms], axis=0)
    variances = np.sum([gm.variances for gm in gms], axis=0)
    return GaussianMixture1D(first.weights, means, variances)


def gm_binary_collapse(gm: GaussianMixture1D, levels: LevelSet) -> GaussianMixture1D:
    """Overwrite every non-zero level with the full-occupancy component."""
    if gm.n_components < 2:
        raise DomainError("binary collapse needs at least two components")
    if gm.n_components != levels.n_levels:
        raise DimensionError(
            f"mixture has {gm.n_components} components but the level set has {levels.n_levels}"
        )
    means = gm.means.copy()
    variances = gm.variances.copy()
    means[1:] = gm.means[-1]
    variances[1:] = gm.variances[-1]
    return GaussianMixture1D(gm.weights, means, variances)


# --- Densities ---
def component_logpdf(x, means, variances) -> np.ndarray:
    """Per-component Gaussian log-densities, broadcasting x against the components."""
    return norm.logpdf(x, loc=means, scale=np.sqrt(variances))


def gm_logpdf(gm: GaussianMixture1D, x):
    """log sum_k w_k N(x | mu_k, var_k), evaluated with log-sum-exp."""
    x = np.asarray(x, dtype=float)
    comp = component_logpdf(x[..., None], gm.means, gm.variances)
    result = logsumexp(comp, b=gm.weights, axis=-1)
    return float(result) if result.ndim == 0 else result

import logging
from dataclasses import dataclass
from itertools import combinations
import numpy as np
from sklearn.cluster import KMeans
from sklearn.metrics import precision_recall_fscore_support, r2_score
from occuload.exceptions import DegenerateInputError, DimensionError, DomainError
from occuload.schemas.params import DisaggregatorParams
from occuload.services.baselines import kmeans_tolerance
from occuload.services.disaggregator import gate_splines

logger = logging.getLogger(__name__)

LEVEL_NAMES = ("low", "medium", "high")


@dataclass(frozen=True)
class LevelThresholds:
    cut_low: float
    cut_high: float

    def __post_init__(self):
        if not 0 < self.cut_low < self.cut_high < 1:
            raise DomainError(f"thresholds must satisfy 0 < {self.cut_low} < {self.cut_high} < 1")

    def apply(self, ratios) -> np.ndarray:
        return np.digitize(np.asarray(ratios, dtype=float), [self.cut_low, self.cut_high])


@dataclass(frozen=True)
class F1Report:
    per_level: np.ndarray
    support: np.ndarray
    macro: float
    weighted: float


@dataclass(frozen=True)
class RmseReport:
    per_level: dict[str, float | None]
    support: dict[str, int]
    overall: float


@dataclass(frozen=True)
class ClusterMapping:
    mapping: tuple[int, ...]
    f1: F1Report


# --- Ground truth ---
def discretize_truth(truth, restarts: int = 50, seed: int = 0) -> tuple[LevelThresholds, np.ndarray]:
    """Three-level split of the truth ratios by 1-D k-means."""
    truth = np.asarray(truth, dtype=float)
    if np.any((truth < 0) | (truth > 1)):
        raise DomainError("truth ratios must be within [0, 1]")
    if len(np.unique(truth)) < 3:
        raise DegenerateInputError("need at least 3 distinct truth values to form 3 levels")

    model = KMeans(
        n_clusters=3, n_init=restarts, tol=kmeans_tolerance(truth), random_state=seed
    ).fit(truth.reshape(-1, 1))
    centers = np.sort(model.cluster_centers_.ravel())
    thresholds = LevelThresholds(
        cut_low=float((centers[0] + centers[1]) / 2),
        cut_high=float((centers[1] + centers[2]) / 2),
    )
    return thresholds, thresholds.apply(truth)


def normalize_counts(counts, quantile: float = 0.999) -> np.ndarray:
    counts = np.asarray(counts, dtype=float)
    if np.any(counts < 0):
        raise DomainError("occupant counts must be non-negative")
    scale = np.quantile(counts, quantile, method="linear")
    if scale <= 0:
        raise DegenerateInputError("cannot normalize all-zero occupant counts")
    return np.minimum(1.0, counts / scale)


# --- Classification metrics ---
def f1_report(pred, true, n_levels: int = 3) -> F1Report:
    pred = np.asarray(pred)
    true = np.asarray(true)
    if pred.shape != true.shape:
        raise DimensionError(f"prediction and truth lengths differ ({len(pred)} vs {len(true)})")

    levels = list(range(n_levels))
    _, _, f1, support = precision_recall_fscore_support(
        true, pred, labels=levels, zero_division=0
    )
    absent = [lvl for lvl in levels if support[lvl] == 0]
    if absent:
        logger.warning("levels %s absent from the truth labels; their F1 is reported as 0", absent)

    weighted = float(np.dot(f1, support) / support.sum()) if support.sum() else 0.0
    return F1Report(per_level=f1, support=support, macro=float(f1.mean()), weighted=weighted)


def rmse_by_level(pred, truth, thresholds: LevelThresholds) -> RmseReport:
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise DimensionError("predicted and true ratios must align")

    labels = thresholds.apply(truth)
    squared = (pred - truth) ** 2
    per_level, support = {}, {}
    for idx, name in enumerate(LEVEL_NAMES):
        mask = labels == idx
        support[name] = int(mask.sum())
        per_level[name] = float(np.sqrt(squared[mask].mean())) if mask.any() else None
    return RmseReport(per_level=per_level, support=support, overall=float(np.sqrt(squared.mean())))


def order_preserving_mappings(k: int, n_levels: int = 3) -> list[tuple[int, ...]]:
    """All surjections of k center-ordered clusters onto n ordered levels that keep order."""
    if k < n_levels:
        return [tuple(range(k))]
    mappings = []
    for cuts in combinations(range(1, k), n_levels - 1):
        mappings.append(tuple(int(np.searchsorted(cuts, c, side="right")) for c in range(k)))
    return mappings


def map_clusters(labels, true_labels, centers=None, n_levels: int = 3) -> ClusterMapping:
    """
    Best order-preserving cluster-to-level mapping by macro F1, ties broken by
    weighted F1. With centers given, clusters are first relabelled by center order.
    """
    labels = np.asarray(labels, dtype=int)
    if centers is not None:
        order = np.argsort(np.asarray(centers, dtype=float), kind="stable")
        relabel = np.empty_like(order)
        relabel[order] = np.arange(len(order))
        labels = relabel[labels]
        k = len(order)
    else:
        k = int(labels.max()) + 1
    if k > 8:
        raise DomainError(f"mapping search supports at most 8 clusters, got {k}")

    best = None
    for mapping in order_preserving_mappings(k, n_levels):
        report = f1_report(np.asarray(mapping)[labels], true_labels, n_levels)
        if best is None or (report.macro, report.weighted) > (best.f1.macro, best.f1.weighted):
            best = ClusterMapping(mapping=mapping, f1=report)
    return best


# --- Parameter recovery ---
def capacity_error(est: DisaggregatorParams, truth: dict[str, float]) -> dict[str, float | None]:
    """Percentage error per capacity; undefined (None) where the true capacity is 0."""
    estimated = est.capacities()
    errors = {}
    for name, true_value in truth.items():
        if name not in estimated or true_value == 0:
            errors[name] = None
            continue
        errors[name] = 100.0 * (estimated[name] - true_value) / true_value
    return errors


def gated_spline_prediction(params: DisaggregatorParams, temps, occupied) -> np.ndarray:
    unoccupied_curve, occupied_curve = gate_splines(params, temps)
    return np.where(np.asarray(occupied, dtype=bool), occupied_curve, unoccupied_curve)


def _shared_offset(truth: np.ndarray, predicted: np.ndarray, align: bool) -> np.ndarray:
    # a lumped meter leaves one constant unattributed between the occupant bases and both gates
    return predicted + np.mean(truth - predicted) if align else predicted


def es_r2(params: DisaggregatorParams, hvac_loads, temps, occupied, align: bool = False) -> float:
    """
    R2 of the occupancy-gated spline predictions against observed HVAC loads.
    With align, one constant shared by both gates is fitted first.
    """
    truth = np.asarray(hvac_loads, dtype=float)
    predicted = gated_spline_prediction(params, temps, occupied)
    return float(r2_score(truth, _shared_offset(truth, predicted, align)))


def empirical_capacity(loads, low_quantile: float = 0.05) -> float:
    """Capacity reference when no ground truth exists: peak minus a low quantile."""
    loads = np.asarray(loads, dtype=float)
    return float(np.nanmax(loads) - np.nanquantile(loads, low_quantile))


def curve_r2(params: DisaggregatorParams, temps, unoccupied_truth, occupied_truth, align: bool = False) -> float:
    """R2 of both gate splines against reference curves on a temperature grid, pooled."""
    unoccupied_curve, occupied_curve = gate_splines(params, temps)
    truth = np.concatenate([np.asarray(unoccupied_truth, float), np.asarray(occupied_truth, float)])
    predicted = np.concatenate([unoccupied_curve, occupied_curve])
    return float(r2_score(truth, _shared_offset(truth, predicted, align)))

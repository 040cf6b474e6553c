"""Statistics over prediction matrices: distance summaries, confusion
counts, softmax profiles, linear fits, nearest-distance and
misclassification-likelihood matrices, and perturbation-level trends.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .clustering import CentroidSet, pairwise_distances
from .errors import DimensionMismatch, ParameterError, SoftgateError
from .matrix import PredictionMatrix

GROUP_BY_PRED = "pred"
GROUP_BY_TRUE = "true"


@dataclass(frozen=True)
class SideStats:
    mean: float
    median: float
    min: float
    max: float
    sigma: float  # population standard deviation
    count: int

    @property
    def missing(self) -> bool:
        return self.count == 0


_MISSING_STATS = SideStats(float("nan"), float("nan"), float("nan"), float("nan"), float("nan"), 0)


@dataclass(frozen=True)
class DistanceStats:
    """Per class and correctness side: mean/median/min/max/sigma/count of
    distances to the class centroid."""

    group_by: str
    correct: list[SideStats]
    incorrect: list[SideStats]


def _side_stats(d: np.ndarray) -> SideStats:
    if d.size == 0:
        return _MISSING_STATS
    return SideStats(
        mean=float(d.mean()),
        median=float(np.median(d)),
        min=float(d.min()),
        max=float(d.max()),
        sigma=float(d.std(ddof=0)),
        count=int(d.size),
    )


def distance_stats(
    matrix: PredictionMatrix,
    centroids: CentroidSet,
    group_by: str = GROUP_BY_PRED,
) -> DistanceStats:
    """Distance summary per class, split by correctness.

    Rows group by predicted class by default (matching how thresholds are
    keyed); group_by="true" switches both the grouping and the measured
    centroid to the true class.
    """
    if group_by not in (GROUP_BY_PRED, GROUP_BY_TRUE):
        raise ParameterError(f"group_by must be 'pred' or 'true', got {group_by!r}")
    labels = matrix.pred_labels if group_by == GROUP_BY_PRED else matrix.true_labels
    dists = pairwise_distances(matrix.probs, centroids.centroids)
    d = dists[np.arange(matrix.n), labels]
    is_correct = matrix.true_labels == matrix.pred_labels
    correct, incorrect = [], []
    for c in range(matrix.k):
        sel = labels == c
        correct.append(_side_stats(d[sel & is_correct]))
        incorrect.append(_side_stats(d[sel & ~is_correct]))
    return DistanceStats(group_by, correct, incorrect)


def confusion_matrix(matrix: PredictionMatrix) -> np.ndarray:
    """(k, k) counts; cell (y, c) = rows with true=y predicted as c."""
    k = matrix.k
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (matrix.true_labels, matrix.pred_labels), 1)
    return cm


def class_accuracy(matrix: PredictionMatrix) -> np.ndarray:
    """Per-class accuracy over rows with that true label; NaN when absent."""
    cm = confusion_matrix(matrix)
    totals = cm.sum(axis=1)
    with np.errstate(invalid="ignore"):
        acc = np.where(totals > 0, np.diag(cm) / totals, np.nan)
    return acc


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r: float


def linear_fit(xs, ys) -> FitResult:
    """Ordinary least squares y = slope*x + intercept, with Pearson r."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DimensionMismatch("xs and ys must be 1-d and equal length")
    if x.size < 2 or np.all(x == x[0]):
        raise ParameterError("need at least two distinct x values")
    xm, ym = x.mean(), y.mean()
    sxx = ((x - xm) ** 2).sum()
    sxy = ((x - xm) * (y - ym)).sum()
    syy = ((y - ym) ** 2).sum()
    slope = sxy / sxx
    intercept = ym - slope * xm
    r = float(sxy / np.sqrt(sxx * syy)) if syy > 0 else 0.0
    return FitResult(float(slope), float(intercept), r)


@dataclass(frozen=True)
class MeanProfiles:
    """Per predicted class and correctness side: elementwise mean softmax."""

    correct: np.ndarray    # (k, k); row c = mean over correct rows predicted c
    incorrect: np.ndarray
    correct_counts: np.ndarray
    incorrect_counts: np.ndarray


def mean_softmax_profiles(matrix: PredictionMatrix) -> MeanProfiles:
    k = matrix.k
    is_correct = matrix.true_labels == matrix.pred_labels
    correct = np.full((k, k), np.nan)
    incorrect = np.full((k, k), np.nan)
    ccounts = np.zeros(k, dtype=np.int64)
    icounts = np.zeros(k, dtype=np.int64)
    for c in range(k):
        sel = matrix.pred_labels == c
        rows = matrix.probs[sel & is_correct]
        ccounts[c] = rows.shape[0]
        if rows.shape[0]:
            correct[c] = rows.mean(axis=0)
        rows = matrix.probs[sel & ~is_correct]
        icounts[c] = rows.shape[0]
        if rows.shape[0]:
            incorrect[c] = rows.mean(axis=0)
    return MeanProfiles(correct, incorrect, ccounts, icounts)


@dataclass(frozen=True)
class NearestDistanceMatrix:
    """D[y][c] = min distance from any true-class-y row to centroid c.

    The diagonal is a NaN sentinel and is excluded from all downstream
    sums; rows for classes with no examples are flagged missing.
    """

    D: np.ndarray
    missing_rows: frozenset[int]

    @property
    def k(self) -> int:
        return self.D.shape[0]


def nearest_distance_matrix(
    matrix: PredictionMatrix, centroids: CentroidSet
) -> NearestDistanceMatrix:
    k = matrix.k
    dists = pairwise_distances(matrix.probs, centroids.centroids)
    D = np.full((k, k), np.nan)
    missing = []
    for y in range(k):
        rows = dists[matrix.true_labels == y]
        if rows.shape[0] == 0:
            missing.append(y)
            continue
        mins = rows.min(axis=0)
        D[y] = mins
        D[y, y] = np.nan
    return NearestDistanceMatrix(D, frozenset(missing))


def misclassification_likelihood(nd: NearestDistanceMatrix) -> np.ndarray:
    """Row-normalized reciprocal distances; zero diagonal.

    L[y][c] = (1/D[y][c]) / sum over c != y of (1/D[y][c]). Every
    off-diagonal distance must be present and positive, since the
    reciprocal is undefined otherwise; the error names the first bad cell.
    """
    D = nd.D
    k = nd.k
    L = np.zeros((k, k))
    for y in range(k):
        off = [c for c in range(k) if c != y]
        row = D[y, off]
        bad = np.isnan(row) | (row <= 0)
        if bad.any():
            c = off[int(np.argmax(bad))]
            raise SoftgateError(
                f"nearest distance ({y}, {c}) is missing or non-positive; "
                "reciprocal undefined"
            )
        recip = 1.0 / row
        L[y, off] = recip / recip.sum()
    return L


@dataclass(frozen=True)
class LikelihoodAggregate:
    lbar: np.ndarray                 # elementwise mean across levels
    sigma: np.ndarray                # elementwise population std across levels
    top_pairs: list[tuple[int, int, float]]          # (true, misclassified-as, lbar)
    consistent_pairs: list[tuple[int, int, float]]   # off-diagonal cells with sigma below threshold
    levels: int


def aggregate_likelihoods(
    matrices: list[np.ndarray],
    consistency_threshold: float = 0.1,
    top_n: int = 5,
) -> LikelihoodAggregate:
    """Mean and population std of likelihood matrices across levels, the
    top pairs by mean likelihood, and the pairs stable across levels."""
    if not matrices:
        raise ParameterError("need at least one likelihood matrix")
    k = matrices[0].shape[0]
    for m in matrices:
        if m.shape != (k, k):
            raise DimensionMismatch(f"matrix shape {m.shape}, expected ({k}, {k})")
    stack = np.stack(matrices)
    lbar = stack.mean(axis=0)
    sigma = stack.std(axis=0, ddof=0)
    # cells constant across levels: the mean is that value and sigma is 0
    # exactly, not up to summation rounding
    same = np.ptp(stack, axis=0) == 0
    lbar[same] = stack[0][same]
    sigma[same] = 0.0
    offdiag = [(y, c) for y in range(k) for c in range(k) if y != c]
    ranked = sorted(offdiag, key=lambda yc: -lbar[yc])
    top_pairs = [(y, c, float(lbar[y, c])) for y, c in ranked[:top_n]]
    consistent = [
        (y, c, float(sigma[y, c])) for y, c in offdiag if sigma[y, c] < consistency_threshold
    ]
    return LikelihoodAggregate(lbar, sigma, top_pairs, consistent, len(matrices))


@dataclass(frozen=True)
class TrendSeries:
    """Per perturbation level: mean distance to the true-class centroid
    (d_true) and mean distance of rows misclassified as c to centroid c
    (d_mis); NaN where a group is empty."""

    levels: list[int]
    d_true: np.ndarray   # (levels, k)
    d_mis: np.ndarray    # (levels, k)
    d_true_deltas: np.ndarray = field(repr=False, default=None)
    d_mis_deltas: np.ndarray = field(repr=False, default=None)

    def trend_signs(self) -> list[int]:
        """Per class: sign of the overall d_true trend across levels
        (+1 rising, -1 falling, 0 flat), NaN-levels skipped."""
        signs = []
        for c in range(self.d_true.shape[1]):
            col = self.d_true[:, c]
            col = col[~np.isnan(col)]
            if col.size < 2:
                signs.append(0)
            else:
                delta = col[-1] - col[0]
                signs.append(0 if delta == 0 else (1 if delta > 0 else -1))
        return signs


def perturbation_distance_trends(
    level_matrices: list[tuple[int, PredictionMatrix]],
    centroids: CentroidSet,
) -> TrendSeries:
    """Distance trends across perturbation levels.

    Levels must be contiguous from 0. For each level and class y,
    d_true[level][y] averages the distance from rows with true label y to
    centroid y; d_mis[level][c] averages the distance from rows
    misclassified as c to centroid c.
    """
    if not level_matrices:
        raise ParameterError("need at least one level")
    level_matrices = sorted(level_matrices, key=lambda lm: lm[0])
    levels = [lv for lv, _ in level_matrices]
    if levels != list(range(len(levels))):
        raise ParameterError(f"levels must be contiguous from 0, got {levels}")
    k = centroids.k
    d_true = np.full((len(levels), k), np.nan)
    d_mis = np.full((len(levels), k), np.nan)
    for i, (_, m) in enumerate(level_matrices):
        if m.k != k:
            raise DimensionMismatch("matrix k does not match centroids")
        dists = pairwise_distances(m.probs, centroids.centroids)
        mis = m.true_labels != m.pred_labels
        for c in range(k):
            true_rows = dists[m.true_labels == c, c]
            if true_rows.size:
                d_true[i, c] = true_rows.mean()
            mis_rows = dists[(m.pred_labels == c) & mis, c]
            if mis_rows.size:
                d_mis[i, c] = mis_rows.mean()
    return TrendSeries(
        levels=levels,
        d_true=d_true,
        d_mis=d_mis,
        d_true_deltas=np.diff(d_true, axis=0),
        d_mis_deltas=np.diff(d_mis, axis=0),
    )

"""Per-class safety thresholds and the accept/defer gate.

The threshold for class c is the smallest distance from any prediction
*incorrectly* made as c to the class-c centroid. A live prediction is
accepted only while its distance stays strictly below that minimum;
distance equal to or beyond the threshold defers to a human.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import clustering
from .clustering import CentroidSet, pairwise_distances
from .errors import DimensionMismatch, FormatError, ParameterError
from .matrix import PredictionMatrix, partition

SGB_FORMAT = "SGB1"

FALLBACK_ACCEPT = "accept"           # unbounded classes accept everything (flagged)
FALLBACK_MAX_CORRECT = "max_correct"  # conservative: bound by max correct distance

VERDICT_ACCEPT = "accept"
VERDICT_DEFER = "defer"


@dataclass(frozen=True)
class ThresholdTable:
    t: np.ndarray              # (k,) float64, +inf for unbounded classes
    counts: np.ndarray         # (k,) incorrect rows per predicted class
    unbounded: frozenset[int]  # classes with no incorrect calibration rows
    fallback: str = FALLBACK_ACCEPT

    def __post_init__(self):
        t = np.ascontiguousarray(self.t, dtype=np.float64)
        counts = np.ascontiguousarray(self.counts, dtype=np.int64)
        t.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "counts", counts)

    @property
    def k(self) -> int:
        return self.t.shape[0]


@dataclass(frozen=True)
class GateDecision:
    verdict: str
    pred_label: int
    distance: float
    threshold_used: float
    unbounded_class: bool = False

    @property
    def accepted(self) -> bool:
        return self.verdict == VERDICT_ACCEPT


@dataclass(frozen=True)
class CalibrationBundle:
    """The deployable unit: centroids plus thresholds plus provenance."""

    centroids: CentroidSet
    thresholds: ThresholdTable
    k: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.centroids.k != self.k or self.thresholds.k != self.k:
            raise DimensionMismatch("bundle members disagree on k")


def predicted_class_distances(
    matrix: PredictionMatrix, centroids: CentroidSet
) -> np.ndarray:
    """Distance from each row to the centroid of its *predicted* class."""
    if matrix.k != centroids.k:
        raise DimensionMismatch("matrix and centroids disagree on k")
    dists = pairwise_distances(matrix.probs, centroids.centroids)
    return dists[np.arange(matrix.n), matrix.pred_labels]


def compute_thresholds(
    matrix: PredictionMatrix,
    centroids: CentroidSet,
    fallback: str = FALLBACK_ACCEPT,
    correct_matrix: PredictionMatrix | None = None,
) -> ThresholdTable:
    """Minimum incorrect-prediction distance per predicted class.

    ``matrix`` must hold the incorrect calibration rows only. Classes
    that never appear as a wrong prediction get the +inf sentinel and are
    listed as unbounded; with the max_correct fallback (and the correct
    rows supplied) they instead get the largest correct distance, which
    is the conservative deployable bound.
    """
    if fallback not in (FALLBACK_ACCEPT, FALLBACK_MAX_CORRECT):
        raise ParameterError(f"unknown fallback {fallback!r}")
    k = matrix.k
    t = np.full(k, np.inf)
    counts = np.zeros(k, dtype=np.int64)
    if matrix.n:
        d = predicted_class_distances(matrix, centroids)
        for c in range(k):
            sel = d[matrix.pred_labels == c]
            counts[c] = sel.size
            if sel.size:
                t[c] = sel.min()
    unbounded = frozenset(int(c) for c in range(k) if counts[c] == 0)
    for c in range(k):
        if counts[c] and t[c] == 0.0:
            warnings.warn(
                f"class {c} threshold is 0: an incorrect row coincides with "
                "the class centroid; every prediction for it will defer",
                stacklevel=2,
            )
    if fallback == FALLBACK_MAX_CORRECT and unbounded:
        if correct_matrix is None:
            raise ParameterError("max_correct fallback needs the correct rows")
        dc = predicted_class_distances(correct_matrix, centroids)
        for c in unbounded:
            sel = dc[correct_matrix.pred_labels == c]
            if sel.size:
                t[c] = sel.max()
    return ThresholdTable(t, counts, unbounded, fallback)


def gate(probs: np.ndarray, bundle: CalibrationBundle) -> GateDecision:
    """Accept/defer decision for one softmax vector.

    Accept iff distance to the predicted class centroid is strictly below
    the class threshold; equality defers. An unbounded class with the
    accept fallback accepts everything, flagged on the decision.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape != (bundle.k,):
        raise DimensionMismatch(f"probs shape {probs.shape}, expected ({bundle.k},)")
    pred = int(np.argmax(probs))
    distance = clustering.euclidean_distance(probs, bundle.centroids.centroids[pred])
    threshold = float(bundle.thresholds.t[pred])
    unbounded = pred in bundle.thresholds.unbounded
    verdict = VERDICT_ACCEPT if distance < threshold else VERDICT_DEFER
    return GateDecision(verdict, pred, distance, threshold, unbounded)


def gate_matrix(matrix: PredictionMatrix, bundle: CalibrationBundle) -> np.ndarray:
    """Vectorized gate over all rows: boolean accept mask."""
    d = predicted_class_distances(matrix, bundle.centroids)
    return d < bundle.thresholds.t[matrix.pred_labels]


@dataclass(frozen=True)
class OverlapRow:
    label: str
    count: int
    total: int
    percent: float


def overlap_stats(matrix: PredictionMatrix, bundle: CalibrationBundle) -> list[OverlapRow]:
    """Correct rows at or beyond their class threshold, per class plus totals.

    ``matrix`` must hold correct predictions only. These rows are the
    price of the gate: they get tagged unsafe despite being right. The
    input matrix is never mutated.
    """
    d = predicted_class_distances(matrix, bundle.centroids)
    t = bundle.thresholds.t
    rows = []
    grand_count = 0
    for c in range(matrix.k):
        sel = matrix.pred_labels == c
        total = int(sel.sum())
        count = int((d[sel] >= t[c]).sum())
        grand_count += count
        percent = 100.0 * count / total if total else 0.0
        rows.append(OverlapRow(str(c), count, total, percent))
    n = matrix.n
    rows.append(OverlapRow("total", grand_count, n, 100.0 * grand_count / n if n else 0.0))
    return rows


@dataclass(frozen=True)
class SweepPoint:
    label: str        # class index as text, or "all"
    factor: float
    coverage: float
    retained_accuracy: float


DEFAULT_SWEEP_FACTORS = tuple(round(0.1 * i, 1) for i in range(10))


def threshold_sweep(
    matrix: PredictionMatrix,
    bundle: CalibrationBundle,
    factors=DEFAULT_SWEEP_FACTORS,
) -> list[SweepPoint]:
    """Coverage and retained accuracy as thresholds shrink by (1 - f).

    ``matrix`` holds all evaluation rows, correct and incorrect. Both
    series are emitted: coverage is the accepted fraction, retained
    accuracy the fraction of accepted rows that are actually correct.
    """
    factors = [float(f) for f in factors]
    for f in factors:
        if not 0 <= f < 1:
            raise ParameterError(f"factor {f} outside [0, 1)")
    d = predicted_class_distances(matrix, bundle.centroids)
    correct = matrix.true_labels == matrix.pred_labels
    t = bundle.thresholds.t
    points = []
    for f in factors:
        scaled = (1.0 - f) * t
        accepted = d < scaled[matrix.pred_labels]
        for c in range(matrix.k):
            sel = matrix.pred_labels == c
            total = int(sel.sum())
            acc_sel = accepted & sel
            n_acc = int(acc_sel.sum())
            coverage = n_acc / total if total else 0.0
            retained = float(correct[acc_sel].mean()) if n_acc else float("nan")
            points.append(SweepPoint(str(c), f, coverage, retained))
        n_acc = int(accepted.sum())
        points.append(
            SweepPoint(
                "all", f,
                n_acc / matrix.n if matrix.n else 0.0,
                float(correct[accepted].mean()) if n_acc else float("nan"),
            )
        )
    return points


def calibrate(
    matrix: PredictionMatrix,
    use_fitted: bool = True,
    max_iter: int = 300,
    tol: float = 1e-6,
    fallback: str = FALLBACK_ACCEPT,
) -> CalibrationBundle:
    """Full calibration: partition, centroids (optionally K-Means-refined),
    thresholds from the incorrect rows, and provenance.

    Expects a validated matrix with at least one correct row per class
    (EmptyClassError otherwise).
    """
    part = partition(matrix)
    correct = matrix.take(part.correct)
    incorrect = matrix.take(part.incorrect)

    centroids = clustering.init_centroids(correct)
    if use_fitted:
        result = clustering.kmeans(correct.probs, centroids, max_iter=max_iter, tol=tol)
        clustering.check_label_integrity(correct, result.assignments)
        centroids = result.centroids

    thresholds = compute_thresholds(
        incorrect, centroids, fallback=fallback, correct_matrix=correct
    )
    meta = {
        "source_tag": matrix.source_tag,
        "centroid_provenance": centroids.provenance,
        "n_calibration": matrix.n,
        "n_correct": int(part.correct.size),
        "n_incorrect": int(part.incorrect.size),
        "kmeans_max_iter": max_iter if use_fitted else None,
        "kmeans_tol": tol if use_fitted else None,
        "threshold_fallback": fallback,
    }
    return CalibrationBundle(centroids, thresholds, matrix.k, meta)


# ---------------------------------------------------------------------------
# bundle file: a single self-describing JSON document tagged "SGB1"
# ---------------------------------------------------------------------------

def write_bundle(bundle: CalibrationBundle, path) -> None:
    doc = {
        "format": SGB_FORMAT,
        "k": bundle.k,
        "centroid_provenance": bundle.centroids.provenance,
        "centroids": [[float(v) for v in row] for row in bundle.centroids.centroids],
        "thresholds": [
            None if np.isinf(v) else float(v) for v in bundle.thresholds.t
        ],
        "incorrect_counts": [int(v) for v in bundle.thresholds.counts],
        "unbounded_classes": sorted(bundle.thresholds.unbounded),
        "threshold_fallback": bundle.thresholds.fallback,
        "meta": bundle.meta,
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def read_bundle(path) -> CalibrationBundle:
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"{path}: not a bundle document ({e})") from None
    if doc.get("format") != SGB_FORMAT:
        raise FormatError(f"{path}: format tag {doc.get('format')!r}, expected {SGB_FORMAT!r}")
    k = int(doc["k"])
    centroids = CentroidSet(
        np.array(doc["centroids"], dtype=np.float64), k, doc["centroid_provenance"]
    )
    t = np.array(
        [np.inf if v is None else float(v) for v in doc["thresholds"]], dtype=np.float64
    )
    thresholds = ThresholdTable(
        t,
        np.array(doc["incorrect_counts"], dtype=np.int64),
        frozenset(int(c) for c in doc["unbounded_classes"]),
        doc.get("threshold_fallback", FALLBACK_ACCEPT),
    )
    return CalibrationBundle(centroids, thresholds, k, doc.get("meta", {}))

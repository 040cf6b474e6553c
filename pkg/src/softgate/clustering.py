"""Class centroids in softmax space and Lloyd's K-Means refinement.

Cluster index equals class label throughout: centroid row c is the
centroid for class c, and every policy downstream depends on that
correspondence surviving refinement.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyClassError, FormatError, ParameterError
from .matrix import PredictionMatrix

PROVENANCE_INITIAL = "initial"
PROVENANCE_FITTED = "fitted"


@dataclass(frozen=True)
class CentroidSet:
    """k centroid vectors, row c = centroid of cluster/class c.

    The calibration pipeline always produces square (k, k) sets since the
    softmax space has one dimension per class; kmeans itself accepts any
    point dimension.
    """

    centroids: np.ndarray  # (k, dim) float64
    k: int
    provenance: str = PROVENANCE_INITIAL

    def __post_init__(self):
        c = np.ascontiguousarray(self.centroids, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] != self.k:
            raise DimensionMismatch(f"centroids shape {c.shape}, expected ({self.k}, dim)")
        c.setflags(write=False)
        object.__setattr__(self, "centroids", c)

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


@dataclass(frozen=True)
class KMeansResult:
    centroids: CentroidSet
    assignments: np.ndarray   # (n,) cluster index per row
    iterations: int
    final_shift: float        # max centroid movement in the last iteration
    history: list = field(default_factory=list, repr=False)


def pairwise_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """(n, k) matrix of Euclidean distances from each point to each centroid."""
    points = np.asarray(points, dtype=np.float64)
    centroids = np.asarray(centroids, dtype=np.float64)
    if points.shape[1] != centroids.shape[1]:
        raise DimensionMismatch(
            f"point dim {points.shape[1]} vs centroid dim {centroids.shape[1]}"
        )
    deltas = points[:, None, :] - centroids[None, :, :]
    return np.sqrt(np.einsum("nkd,nkd->nk", deltas, deltas))


def euclidean_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean distance between two equal-dimension vectors.

    Routed through the same reduction as pairwise_distances so batch and
    single-vector paths agree bit for bit (the gate's boundary rule
    depends on that).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionMismatch(f"shape {a.shape} vs {b.shape}")
    return float(pairwise_distances(a[None, :], b[None, :])[0, 0])


def init_centroids(matrix: PredictionMatrix) -> CentroidSet:
    """Per-class mean of softmax vectors, grouped by the argmax class.

    The caller passes the correct predictions only, so the argmax, the
    predicted label and the true label coincide. Raises EmptyClassError
    when some class has no rows; the thresholds module documents the
    fallback choices.
    """
    k = matrix.k
    groups = np.argmax(matrix.probs, axis=1)
    centroids = np.zeros((k, k))
    for c in range(k):
        rows = matrix.probs[groups == c]
        if rows.shape[0] == 0:
            raise EmptyClassError(c, f"class {c} has no correct predictions")
        centroids[c] = rows.mean(axis=0)
    return CentroidSet(centroids, k, PROVENANCE_INITIAL)


def kmeans(
    points: np.ndarray,
    init: CentroidSet,
    max_iter: int = 300,
    tol: float = 1e-6,
    record_history: bool = False,
) -> KMeansResult:
    """Lloyd iteration from the given centroids.

    Assignment ties go to the lowest cluster index; a cluster that loses
    all its points keeps its previous centroid, so cluster c keeps
    meaning class c. Stops when the max centroid shift drops below tol
    or after max_iter iterations.
    """
    if max_iter < 1:
        raise ParameterError("max_iter must be >= 1")
    if tol < 0:
        raise ParameterError("tol must be >= 0")
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ParameterError("kmeans needs at least one point")
    if points.shape[1] != init.centroids.shape[1]:
        raise DimensionMismatch("point dimension does not match centroids")

    centroids = init.centroids.copy()
    k = init.k
    assignments = np.zeros(points.shape[0], dtype=np.int64)
    history = []
    iterations = 0
    shift = np.inf
    for _ in range(max_iter):
        iterations += 1
        dists = pairwise_distances(points, centroids)
        assignments = np.argmin(dists, axis=1)  # argmin takes the lowest index on ties
        new_centroids = centroids.copy()
        for c in range(k):
            members = points[assignments == c]
            if members.shape[0]:
                new_centroids[c] = members.mean(axis=0)
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if record_history:
            history.append((centroids.copy(), assignments.copy()))
        if shift < tol:
            break
    # the last update may have moved centroids after assignment; re-assign so
    # the returned labels are nearest-centroid consistent with the fit
    final_assignments = np.argmin(pairwise_distances(points, centroids), axis=1)
    return KMeansResult(
        centroids=CentroidSet(centroids, k, PROVENANCE_FITTED),
        assignments=final_assignments,
        iterations=iterations,
        final_shift=shift,
        history=history,
    )


def find_misclustered(matrix: PredictionMatrix, result: KMeansResult) -> list[tuple[int, int, int]]:
    """Rows whose assigned cluster differs from their true class."""
    if matrix.n != result.assignments.shape[0]:
        raise DimensionMismatch(
            f"matrix has {matrix.n} rows, assignments {result.assignments.shape[0]}"
        )
    bad = np.nonzero(result.assignments != matrix.true_labels)[0]
    return [
        (int(i), int(matrix.true_labels[i]), int(result.assignments[i])) for i in bad
    ]


def distances_to_all_centroids(probs: np.ndarray, centroids: CentroidSet) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape != (centroids.dim,):
        raise DimensionMismatch(f"probs shape {probs.shape}, expected ({centroids.dim},)")
    return pairwise_distances(probs[None, :], centroids.centroids)[0]


def check_label_integrity(matrix: PredictionMatrix, assignments: np.ndarray) -> list[int]:
    """Warn for clusters whose majority true class is not the cluster index.

    Returns the offending cluster indices. The gating scheme assumes
    cluster c means class c; a drifted majority is a sign the fit broke
    that correspondence.
    """
    suspect = []
    for c in range(matrix.k):
        labels = matrix.true_labels[assignments == c]
        if labels.size == 0:
            continue
        majority = int(np.bincount(labels, minlength=matrix.k).argmax())
        if majority != c:
            suspect.append(c)
            warnings.warn(
                f"cluster {c} majority true class is {majority}; "
                "cluster/class correspondence may be broken",
                stacklevel=2,
            )
    return suspect


def within_cluster_ss(points: np.ndarray, centroids: np.ndarray, assignments: np.ndarray) -> float:
    """Total within-cluster sum of squared distances."""
    return float(((points - centroids[assignments]) ** 2).sum())


# ---------------------------------------------------------------------------
# csv serialization: K rows x K columns plus a provenance comment line
# ---------------------------------------------------------------------------

def write_centroids_csv(cs: CentroidSet, path) -> None:
    with open(path, "w") as f:
        f.write(f"# provenance: {cs.provenance}\n")
        for row in cs.centroids:
            f.write(",".join(repr(float(v)) for v in row) + "\n")


def read_centroids_csv(path) -> CentroidSet:
    provenance = PROVENANCE_INITIAL
    rows = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "provenance:" in line:
                    provenance = line.split("provenance:", 1)[1].strip()
                continue
            rows.append([float(v) for v in line.split(",")])
    if not rows:
        raise FormatError(f"{path}: no centroid rows")
    arr = np.array(rows, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise FormatError(f"{path}: centroid table must be square, got {arr.shape}")
    return CentroidSet(arr, arr.shape[0], provenance)

"""softgate: accept/defer gating for classifier predictions based on
softmax-space distances to per-class centroids, with dataset perturbation
tooling and IDX binary I/O."""

from .matrix import (
    ClassPartition,
    PredictionMatrix,
    PredictionRecord,
    ValidationReport,
    partition,
    read_matrix,
    synth_fixture,
    validate,
    write_matrix,
)
from .clustering import (
    CentroidSet,
    KMeansResult,
    distances_to_all_centroids,
    euclidean_distance,
    find_misclustered,
    init_centroids,
    kmeans,
)
from .thresholds import (
    CalibrationBundle,
    GateDecision,
    ThresholdTable,
    calibrate,
    compute_thresholds,
    gate,
    overlap_stats,
    read_bundle,
    threshold_sweep,
    write_bundle,
)
from .analysis import (
    DistanceStats,
    FitResult,
    aggregate_likelihoods,
    class_accuracy,
    confusion_matrix,
    distance_stats,
    linear_fit,
    mean_softmax_profiles,
    misclassification_likelihood,
    nearest_distance_matrix,
    perturbation_distance_trends,
)
from .perturb import (
    PerturbationSpec,
    PerturbationType,
    apply_perturbation,
    generate_permnist,
    severity_schedule,
)
from .report import assemble_report, heatmap_color

__version__ = "0.1.0"

__all__ = [
    "CalibrationBundle",
    "CentroidSet",
    "ClassPartition",
    "DistanceStats",
    "FitResult",
    "GateDecision",
    "KMeansResult",
    "PerturbationSpec",
    "PerturbationType",
    "PredictionMatrix",
    "PredictionRecord",
    "ThresholdTable",
    "ValidationReport",
    "aggregate_likelihoods",
    "apply_perturbation",
    "assemble_report",
    "calibrate",
    "class_accuracy",
    "compute_thresholds",
    "confusion_matrix",
    "distance_stats",
    "distances_to_all_centroids",
    "euclidean_distance",
    "find_misclustered",
    "gate",
    "generate_permnist",
    "heatmap_color",
    "init_centroids",
    "kmeans",
    "linear_fit",
    "mean_softmax_profiles",
    "misclassification_likelihood",
    "nearest_distance_matrix",
    "overlap_stats",
    "partition",
    "perturbation_distance_trends",
    "read_bundle",
    "read_matrix",
    "severity_schedule",
    "synth_fixture",
    "threshold_sweep",
    "validate",
    "write_bundle",
    "write_matrix",
]

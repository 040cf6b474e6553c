"""Report assembly: one structured-text document with fenced csv blocks,
plus the same tables as csv sidecars, plus the accuracy heatmap colors.

Every number in the document comes from a sidecar table; the document
never carries report-only values.
"""

from __future__ import annotations

import io
import csv as _csv
import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import (
    DistanceStats,
    FitResult,
    LikelihoodAggregate,
    NearestDistanceMatrix,
    TrendSeries,
)
from .errors import ParameterError, ReportError
from .thresholds import CalibrationBundle, OverlapRow, SweepPoint

STATUS_OK = 0
STATUS_WARNINGS = 1
STATUS_ERRORS = 2

DEFAULT_XI = 0.90
DEFAULT_ZETA = 0.99


def heatmap_color(a: float, xi: float = DEFAULT_XI, zeta: float = DEFAULT_ZETA) -> tuple[int, int, int]:
    """Background color for an accuracy cell.

    Below the lower threshold the cell is red-tinted (255, 200, 200), at
    or above the upper it is cyan-tinted (200, 255, 255); in between the
    channels interpolate linearly with floored integer arithmetic.
    """
    if not xi < zeta:
        raise ParameterError(f"xi must be < zeta, got {xi} >= {zeta}")
    if a < xi:
        return (255, 200, 200)
    if a >= zeta:
        return (200, 255, 255)
    t = (a - xi) / (zeta - xi)
    beta = math.floor((1 - t) * 255 + t * 200)
    gamma = math.floor((1 - t) * 200 + t * 255)
    return (beta, gamma, gamma)


# ---------------------------------------------------------------------------
# table rendering: every result type flattens to (header, rows)
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        v = float(v)  # numpy scalars repr differently
        if math.isnan(v):
            return ""
        if math.isinf(v):
            return "inf"
        return repr(v)
    return str(v)


def csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = _csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def calibration_table(bundle: CalibrationBundle) -> tuple[list[str], list[list]]:
    header = ["class", "threshold", "incorrect_count", "unbounded"]
    rows = []
    for c in range(bundle.k):
        t = float(bundle.thresholds.t[c])
        rows.append([
            c,
            t,
            int(bundle.thresholds.counts[c]),
            int(c in bundle.thresholds.unbounded),
        ])
    return header, rows


def centroid_table(bundle: CalibrationBundle) -> tuple[list[str], list[list]]:
    header = ["class"] + [f"p{i}" for i in range(bundle.k)]
    rows = [[c] + list(bundle.centroids.centroids[c]) for c in range(bundle.k)]
    return header, rows


def stats_table(stats: DistanceStats) -> tuple[list[str], list[list]]:
    header = ["class", "side", "mean", "median", "min", "max", "sigma", "count"]
    rows = []
    for c, s in enumerate(stats.correct):
        rows.append([c, "correct", s.mean, s.median, s.min, s.max, s.sigma, s.count])
    for c, s in enumerate(stats.incorrect):
        rows.append([c, "incorrect", s.mean, s.median, s.min, s.max, s.sigma, s.count])
    return header, rows


def confusion_table(cm: np.ndarray) -> tuple[list[str], list[list]]:
    k = cm.shape[0]
    header = ["true\\pred"] + [str(c) for c in range(k)]
    rows = [[y] + [int(v) for v in cm[y]] for y in range(k)]
    return header, rows


def overlap_table(rows: list[OverlapRow]) -> tuple[list[str], list[list]]:
    header = ["class", "count", "total", "percent"]
    return header, [[r.label, r.count, r.total, round(r.percent, 2)] for r in rows]


def sweep_table(points: list[SweepPoint]) -> tuple[list[str], list[list]]:
    # long format for external charting: one metric value per row
    header = ["class", "factor", "metric", "value"]
    rows = []
    for p in points:
        rows.append([p.label, p.factor, "coverage", p.coverage])
        rows.append([p.label, p.factor, "retained_accuracy", p.retained_accuracy])
    return header, rows


def nearest_table(nd: NearestDistanceMatrix) -> tuple[list[str], list[list]]:
    header = ["true", "class", "distance"]
    rows = []
    for y in range(nd.k):
        for c in range(nd.k):
            if y == c:
                continue
            rows.append([y, c, float(nd.D[y, c])])
    return header, rows


def likelihood_table(
    L: np.ndarray, xi: float = DEFAULT_XI, zeta: float = DEFAULT_ZETA
) -> tuple[list[str], list[list]]:
    header = ["true", "class", "likelihood", "r", "g", "b"]
    rows = []
    k = L.shape[0]
    for y in range(k):
        for c in range(k):
            if y == c:
                continue
            r, g, b = heatmap_color(float(L[y, c]), xi, zeta)
            rows.append([y, c, float(L[y, c]), r, g, b])
    return header, rows


def aggregate_table(agg: LikelihoodAggregate) -> tuple[list[str], list[list]]:
    header = ["true", "class", "mean_likelihood", "sigma"]
    k = agg.lbar.shape[0]
    rows = []
    for y in range(k):
        for c in range(k):
            if y == c:
                continue
            rows.append([y, c, float(agg.lbar[y, c]), float(agg.sigma[y, c])])
    return header, rows


def top_pairs_table(agg: LikelihoodAggregate) -> tuple[list[str], list[list]]:
    header = ["rank", "true", "class", "mean_likelihood"]
    return header, [
        [i + 1, y, c, v] for i, (y, c, v) in enumerate(agg.top_pairs)
    ]


def trend_table(trends: TrendSeries) -> tuple[list[str], list[list]]:
    header = ["class", "level", "metric", "value"]
    rows = []
    for i, lv in enumerate(trends.levels):
        for c in range(trends.d_true.shape[1]):
            rows.append([c, lv, "mean_distance_true", float(trends.d_true[i, c])])
            rows.append([c, lv, "mean_distance_misclassified", float(trends.d_mis[i, c])])
    return header, rows


def fit_table(fit: FitResult) -> tuple[list[str], list[list]]:
    header = ["slope", "intercept", "r"]
    return header, [[fit.slope, fit.intercept, fit.r]]


# ---------------------------------------------------------------------------
# document assembly
# ---------------------------------------------------------------------------

@dataclass
class Report:
    text: str
    sidecars: dict[str, str]     # file name -> csv text
    status: int                  # STATUS_OK / STATUS_WARNINGS / STATUS_ERRORS
    notes: list[str] = field(default_factory=list)


_SECTIONS = (
    ("calibration", "Calibration thresholds"),
    ("centroids", "Class centroids"),
    ("distance_stats", "Distance summary"),
    ("confusion", "Confusion matrix"),
    ("overlap", "Correct predictions at or beyond threshold"),
    ("sweep", "Threshold sweep"),
    ("nearest_distance", "Nearest distances between classes"),
    ("likelihood", "Misclassification likelihoods"),
    ("likelihood_aggregate", "Likelihoods across levels"),
    ("top_pairs", "Most confusable pairs"),
    ("trends", "Distance trends across levels"),
    ("fit", "Accuracy vs distance fit"),
)


def assemble_report(
    bundle: CalibrationBundle,
    stats: DistanceStats | None = None,
    confusion: np.ndarray | None = None,
    overlap: list[OverlapRow] | None = None,
    sweep: list[SweepPoint] | None = None,
    nearest: NearestDistanceMatrix | None = None,
    likelihood: np.ndarray | None = None,
    aggregate: LikelihoodAggregate | None = None,
    trends: TrendSeries | None = None,
    fit: FitResult | None = None,
    xi: float = DEFAULT_XI,
    zeta: float = DEFAULT_ZETA,
    title: str = "softgate report",
) -> Report:
    """One document with every available table embedded as a fenced csv
    block; the same csv text goes to the sidecar map. Sections without
    input are flagged as empty (a warning, not an error); the bundle is
    mandatory."""
    if bundle is None:
        raise ReportError("a calibration bundle is mandatory")

    tables: dict[str, tuple[list[str], list[list]] | None] = {
        "calibration": calibration_table(bundle),
        "centroids": centroid_table(bundle),
        "distance_stats": stats_table(stats) if stats is not None else None,
        "confusion": confusion_table(confusion) if confusion is not None else None,
        "overlap": overlap_table(overlap) if overlap is not None else None,
        "sweep": sweep_table(sweep) if sweep is not None else None,
        "nearest_distance": nearest_table(nearest) if nearest is not None else None,
        "likelihood": likelihood_table(likelihood, xi, zeta) if likelihood is not None else None,
        "likelihood_aggregate": aggregate_table(aggregate) if aggregate is not None else None,
        "top_pairs": top_pairs_table(aggregate) if aggregate is not None else None,
        "trends": trend_table(trends) if trends is not None else None,
        "fit": fit_table(fit) if fit is not None else None,
    }

    lines = [f"# {title}", ""]
    lines.append(f"- k: {bundle.k}")
    lines.append(f"- centroid provenance: {bundle.centroids.provenance}")
    lines.append(f"- threshold fallback: {bundle.thresholds.fallback}")
    for key, value in sorted(bundle.meta.items()):
        lines.append(f"- {key}: {value}")
    lines.append("")

    sidecars: dict[str, str] = {}
    notes: list[str] = []
    for key, heading in _SECTIONS:
        lines.append(f"## {heading}")
        table = tables[key]
        if table is None:
            lines.append("")
            lines.append("(section empty)")
            lines.append("")
            notes.append(f"section {key!r} empty")
            continue
        text = csv_text(*table)
        sidecars[f"{key}.csv"] = text
        lines.append("")
        lines.append("```csv")
        lines.append(text.rstrip("\n"))
        lines.append("```")
        lines.append("")

    status = STATUS_WARNINGS if notes else STATUS_OK
    return Report(text="\n".join(lines) + "\n", sidecars=sidecars, status=status, notes=notes)


def write_report(report: Report, out_dir, name: str = "report.md") -> dict[str, str]:
    """Write the document and its sidecar csv files; returns path map."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    doc_path = os.path.join(out_dir, name)
    with open(doc_path, "w") as f:
        f.write(report.text)
    paths["document"] = doc_path
    for fname, text in report.sidecars.items():
        p = os.path.join(out_dir, fname)
        with open(p, "w") as f:
            f.write(text)
        paths[fname] = p
    return paths

"""Prediction-matrix data model and exchange formats.

The central object is a matrix of n predictions: K softmax probabilities
per row plus the true and predicted class labels. Two on-disk formats are
supported: a binary one (``.smx``, bit-exact round trips) and csv.
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from .errors import DimensionMismatch, FormatError, ParameterError

SMX_MAGIC = b"SMXP"
SMX_VERSION = 1

# Little-endian header: magic, version u16, k u16, n u64.
_SMX_HEADER = struct.Struct("<4sHHQ")


class PredictionRecord(NamedTuple):
    probs: np.ndarray
    true_label: int
    pred_label: int


@dataclass(frozen=True)
class PredictionMatrix:
    """n rows of (K probabilities, true label, predicted label).

    Row order is stable and meaningful: the row index identifies an
    example across the whole pipeline. Arrays are read-only after
    construction.
    """

    probs: np.ndarray          # (n, k) float64
    true_labels: np.ndarray    # (n,) int64
    pred_labels: np.ndarray    # (n,) int64
    k: int
    source_tag: str = ""

    def __post_init__(self):
        probs = np.ascontiguousarray(self.probs, dtype=np.float64)
        true_labels = np.ascontiguousarray(self.true_labels, dtype=np.int64)
        pred_labels = np.ascontiguousarray(self.pred_labels, dtype=np.int64)
        if probs.ndim != 2 or probs.shape[1] != self.k:
            raise DimensionMismatch(
                f"probs shape {probs.shape} does not match k={self.k}"
            )
        n = probs.shape[0]
        if true_labels.shape != (n,) or pred_labels.shape != (n,):
            raise DimensionMismatch("label arrays do not match row count")
        for a in (probs, true_labels, pred_labels):
            a.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "true_labels", true_labels)
        object.__setattr__(self, "pred_labels", pred_labels)

    @property
    def n(self) -> int:
        return self.probs.shape[0]

    def record(self, i: int) -> PredictionRecord:
        return PredictionRecord(
            self.probs[i], int(self.true_labels[i]), int(self.pred_labels[i])
        )

    def records(self) -> Iterator[PredictionRecord]:
        for i in range(self.n):
            yield self.record(i)

    def take(self, indices: np.ndarray, source_tag: str | None = None) -> "PredictionMatrix":
        """Row-subset matrix in the order given by ``indices``."""
        return PredictionMatrix(
            self.probs[indices],
            self.true_labels[indices],
            self.pred_labels[indices],
            self.k,
            self.source_tag if source_tag is None else source_tag,
        )

    @staticmethod
    def from_records(records, k: int | None = None, source_tag: str = "") -> "PredictionMatrix":
        records = list(records)
        if not records and k is None:
            raise ParameterError("k is required for an empty matrix")
        if k is None:
            k = len(records[0][0])
        probs = np.array([r[0] for r in records], dtype=np.float64).reshape(len(records), k)
        true_labels = np.array([r[1] for r in records], dtype=np.int64)
        pred_labels = np.array([r[2] for r in records], dtype=np.int64)
        return PredictionMatrix(probs, true_labels, pred_labels, k, source_tag)


@dataclass(frozen=True)
class ClassPartition:
    """Row indices split by prediction correctness; disjoint and covering."""

    correct: np.ndarray
    incorrect: np.ndarray


class Violation(NamedTuple):
    row: int
    message: str


@dataclass(frozen=True)
class ValidationReport:
    n: int
    tol: float
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def argmax_label(probs: np.ndarray) -> int:
    """Index of the largest probability; ties go to the lowest index."""
    return int(np.argmax(probs))


def validate(matrix: PredictionMatrix, tol: float = 1e-6) -> ValidationReport:
    """Check every row invariant and report all violations.

    Never raises on bad values: labels predicted under a different
    tie-breaking rule, leaked mass, out-of-range entries all surface as
    report entries with their row index.
    """
    violations: list[Violation] = []
    probs = matrix.probs
    n, k = probs.shape

    finite = np.isfinite(probs).all(axis=1)
    sums = np.where(finite, probs.sum(axis=1), np.nan)
    in_range = (probs >= 0).all(axis=1) & (probs <= 1).all(axis=1)

    for i in range(n):
        if not finite[i]:
            violations.append(Violation(i, "non-finite probability"))
            continue
        if abs(sums[i] - 1.0) > tol:
            violations.append(
                Violation(i, f"probability mass {sums[i]:.6g} ≠ 1")
            )
        if not in_range[i]:
            violations.append(Violation(i, "probability outside [0, 1]"))
        t, p = int(matrix.true_labels[i]), int(matrix.pred_labels[i])
        if not 0 <= t < k:
            violations.append(Violation(i, f"true label {t} outside [0, {k})"))
        if not 0 <= p < k:
            violations.append(Violation(i, f"pred label {p} outside [0, {k})"))
        elif p != argmax_label(probs[i]):
            violations.append(
                Violation(i, f"pred {p} ≠ argmax {argmax_label(probs[i])}")
            )
    return ValidationReport(n=n, tol=tol, violations=violations)


def partition(matrix: PredictionMatrix) -> ClassPartition:
    """Split row indices into correct (true = pred) and incorrect."""
    mask = matrix.true_labels == matrix.pred_labels
    idx = np.arange(matrix.n)
    return ClassPartition(correct=idx[mask], incorrect=idx[~mask])


# ---------------------------------------------------------------------------
# smx binary format
# ---------------------------------------------------------------------------

def write_matrix_smx(matrix: PredictionMatrix, path) -> None:
    body = np.empty((matrix.n, matrix.k + 2), dtype="<f8")
    body[:, : matrix.k] = matrix.probs
    body[:, matrix.k] = matrix.true_labels
    body[:, matrix.k + 1] = matrix.pred_labels
    with open(path, "wb") as f:
        f.write(_SMX_HEADER.pack(SMX_MAGIC, SMX_VERSION, matrix.k, matrix.n))
        f.write(body.tobytes())


def read_matrix_smx(path, expected_k: int | None = None) -> PredictionMatrix:
    with open(path, "rb") as f:
        header = f.read(_SMX_HEADER.size)
        if len(header) < _SMX_HEADER.size:
            raise FormatError(f"{path}: truncated header ({len(header)} bytes)")
        magic, version, k, n = _SMX_HEADER.unpack(header)
        if magic != SMX_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {SMX_MAGIC!r}")
        if version != SMX_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        if expected_k is not None and k != expected_k:
            raise FormatError(f"{path}: k mismatch (file has {k}, expected {expected_k})")
        payload = f.read()
    expected = n * (k + 2) * 8
    if len(payload) != expected:
        raise FormatError(
            f"{path}: truncated payload ({len(payload)} bytes, expected {expected})"
        )
    body = np.frombuffer(payload, dtype="<f8").reshape(n, k + 2)
    probs = body[:, :k]
    if not np.isfinite(body).all():
        raise FormatError(f"{path}: non-finite values in payload")
    raw_labels = body[:, k:]
    labels = raw_labels.astype(np.int64)
    if not np.array_equal(labels, raw_labels):
        raise FormatError(f"{path}: non-integral label values")
    return PredictionMatrix(probs.copy(), labels[:, 0], labels[:, 1], int(k))


# ---------------------------------------------------------------------------
# csv format: header p0,...,p{k-1},true,pred
# ---------------------------------------------------------------------------

def write_matrix_csv(matrix: PredictionMatrix, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow([f"p{i}" for i in range(matrix.k)] + ["true", "pred"])
        for i in range(matrix.n):
            w.writerow(
                [repr(float(v)) for v in matrix.probs[i]]
                + [int(matrix.true_labels[i]), int(matrix.pred_labels[i])]
            )


def read_matrix_csv(path, expected_k: int | None = None) -> PredictionMatrix:
    with open(path, newline="") as f:
        r = csv.reader(f)
        try:
            header = next(r)
        except StopIteration:
            raise FormatError(f"{path}: empty csv") from None
        k = len(header) - 2
        if k < 2 or header[:k] != [f"p{i}" for i in range(k)] or header[k:] != ["true", "pred"]:
            raise FormatError(f"{path}: bad csv header {header!r}")
        if expected_k is not None and k != expected_k:
            raise FormatError(f"{path}: k mismatch (file has {k}, expected {expected_k})")
        probs, true_labels, pred_labels = [], [], []
        for lineno, row in enumerate(r, start=2):
            if len(row) != k + 2:
                raise FormatError(f"{path}:{lineno}: expected {k + 2} fields, got {len(row)}")
            try:
                probs.append([float(v) for v in row[:k]])
                true_labels.append(int(row[k]))
                pred_labels.append(int(row[k + 1]))
            except ValueError as e:
                raise FormatError(f"{path}:{lineno}: {e}") from None
    arr = np.array(probs, dtype=np.float64).reshape(len(probs), k)
    if not np.isfinite(arr).all():
        raise FormatError(f"{path}: non-finite values")
    return PredictionMatrix(
        arr, np.array(true_labels, dtype=np.int64),
        np.array(pred_labels, dtype=np.int64), k,
    )


def write_matrix(matrix: PredictionMatrix, path, format: str = "smx") -> None:
    if format == "smx":
        write_matrix_smx(matrix, path)
    elif format == "csv":
        write_matrix_csv(matrix, path)
    else:
        raise ParameterError(f"unknown format {format!r}")


def read_matrix(path, format: str = "smx", expected_k: int | None = None) -> PredictionMatrix:
    if format == "smx":
        return read_matrix_smx(path, expected_k)
    if format == "csv":
        return read_matrix_csv(path, expected_k)
    raise ParameterError(f"unknown format {format!r}")


def infer_format(path) -> str:
    return "csv" if str(path).endswith(".csv") else "smx"


# ---------------------------------------------------------------------------
# synthetic fixtures
# ---------------------------------------------------------------------------

def synth_fixture(
    k: int = 10,
    per_class_n: int = 1000,
    concentration: float = 9.0,
    error_rate: float = 0.02,
    seed: int = 0,
) -> PredictionMatrix:
    """Deterministic synthetic prediction matrix for desk-scale testing.

    Per class, roughly ``1 - error_rate`` of rows get a probability vector
    concentrated on the true class; the rest are concentrated on a
    uniformly drawn wrong class (with deliberately lower peak mass, the
    way real misclassifications look). The argmax is forced onto the
    intended class by swapping, so every row satisfies pred = argmax.
    """
    if k < 2:
        raise ParameterError("k must be >= 2")
    if concentration <= 0:
        raise ParameterError("concentration must be > 0")
    if not 0 <= error_rate < 1:
        raise ParameterError("error_rate must be in [0, 1)")
    rng = np.random.default_rng(seed)
    w_floor = concentration / (concentration + 1.0)

    n = k * per_class_n
    probs = np.empty((n, k))
    true_labels = np.empty(n, dtype=np.int64)
    pred_labels = np.empty(n, dtype=np.int64)

    row = 0
    for c in range(k):
        for _ in range(per_class_n):
            wrong = rng.random() < error_rate
            if wrong:
                target = int(rng.integers(0, k - 1))
                if target >= c:
                    target += 1
                # wrong rows peak lower than correct ones ever do, the way
                # real misclassifications sit farther from the centroid
                w = rng.uniform(0.5, 0.5 + 0.4 * w_floor)
            else:
                target = c
                w = rng.uniform(max(w_floor, 0.5), 1.0)
            base = rng.dirichlet(np.ones(k))
            p = (1.0 - w) * base
            p[target] += w
            # swap the max into the target slot so pred = argmax holds
            m = int(np.argmax(p))
            p[target], p[m] = p[m], p[target]
            probs[row] = p
            true_labels[row] = c
            pred_labels[row] = target
            row += 1
    return PredictionMatrix(
        probs, true_labels, pred_labels, k,
        source_tag=f"synth(k={k},n={per_class_n},err={error_rate},seed={seed})",
    )


def matrix_to_csv_text(matrix: PredictionMatrix) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow([f"p{i}" for i in range(matrix.k)] + ["true", "pred"])
    for i in range(matrix.n):
        w.writerow(
            [repr(float(v)) for v in matrix.probs[i]]
            + [int(matrix.true_labels[i]), int(matrix.pred_labels[i])]
        )
    return buf.getvalue()

"""Prediction export: run a model over a dataset, emit the smx/csv matrix
plus a manifest sidecar."""

from __future__ import annotations

import datetime
import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from .writer import write_csv, write_smx

# raw model rows may be off unit mass by float error; anything worse aborts
RAW_SUM_SLACK = 0.01


class ExportError(Exception):
    pass


@dataclass(frozen=True)
class ExportManifest:
    model_id: str
    dataset_split: str
    n: int
    k: int
    created: str
    sha256: str
    format: str

    def write_sidecar(self, path) -> None:
        with open(path, "w") as f:
            json.dump(asdict(self), f, indent=2, sort_keys=True)
            f.write("\n")


def _batches(items, size):
    batch = []
    for item in items:
        batch.append(item)
        if len(batch) == size:
            yield batch
            batch = []
    if batch:
        yield batch


def _normalize(raw: np.ndarray, outputs: str, row_offset: int) -> np.ndarray:
    """Convert model outputs to unit-sum probability rows.

    Log-probability outputs (every entry <= 0, e.g. a log-softmax head)
    are exponentiated first; rows are then renormalized. Rows that are
    not within tolerance of a probability distribution after that abort
    with their dataset row index.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2:
        raise ExportError(f"model output must be 2-d (batch, k), got shape {raw.shape}")
    if outputs == "log_probs" or (outputs == "auto" and np.all(raw <= 0) and raw.size):
        raw = np.exp(raw)
    for b in range(raw.shape[0]):
        row = raw[b]
        s = row.sum()
        if not np.isfinite(row).all() or (row < 0).any() or not abs(s - 1.0) <= RAW_SUM_SLACK:
            raise ExportError(
                f"row {row_offset + b}: not a probability vector after "
                f"renormalization (sum {s!r})"
            )
        raw[b] = row / s
    return raw


def export_predictions(
    model,
    dataset,
    out_path,
    format: str = "smx",
    model_id: str = "model",
    dataset_split: str = "unspecified",
    batch_size: int = 64,
    outputs: str = "auto",
    device=None,
) -> ExportManifest:
    """Run ``model`` over ``dataset`` and write the prediction matrix.

    ``model`` is any callable taking a list of inputs and returning an
    array-like of shape (batch, k) of class probabilities (or
    log-probabilities, detected or forced via ``outputs``). ``dataset``
    yields (input, true_label) pairs; row order in the file equals
    iteration order regardless of batch size. ``device`` is recorded but
    never affects values or order.
    """
    if format not in ("smx", "csv"):
        raise ExportError(f"unknown format {format!r}")
    if batch_size < 1:
        raise ExportError("batch_size must be >= 1")

    prob_chunks = []
    true_labels = []
    k = None
    row = 0
    for batch in _batches(dataset, batch_size):
        inputs = [x for x, _ in batch]
        labels = [int(y) for _, y in batch]
        probs = _normalize(model(inputs), outputs, row)
        if probs.shape[0] != len(batch):
            raise ExportError(
                f"model returned {probs.shape[0]} rows for a batch of {len(batch)}"
            )
        if k is None:
            k = probs.shape[1]
        elif probs.shape[1] != k:
            raise ExportError(f"row {row}: model switched from {k} to {probs.shape[1]} classes")
        prob_chunks.append(probs)
        true_labels.extend(labels)
        row += len(batch)

    if k is None:
        raise ExportError("dataset is empty")
    all_probs = np.concatenate(prob_chunks, axis=0)
    true_arr = np.array(true_labels, dtype=np.int64)
    pred_arr = np.argmax(all_probs, axis=1).astype(np.int64)

    if format == "smx":
        write_smx(out_path, all_probs, true_arr, pred_arr)
    else:
        write_csv(out_path, all_probs, true_arr, pred_arr)

    digest = hashlib.sha256(open(out_path, "rb").read()).hexdigest()
    manifest = ExportManifest(
        model_id=model_id,
        dataset_split=dataset_split,
        n=int(all_probs.shape[0]),
        k=int(k),
        created=datetime.datetime.now(datetime.timezone.utc).isoformat(),
        sha256=digest,
        format=format,
    )
    manifest.write_sidecar(str(out_path) + ".manifest.json")
    return manifest

"""Writers for the smx/csv prediction-matrix exchange formats.

Byte layout (little-endian): magic "SMXP", version u16 = 1, k u16, n u64,
then n rows of k float64 probabilities followed by the true and predicted
labels as float64. The csv variant carries a `p0,...,p{k-1},true,pred`
header. Kept bit-compatible with the analysis toolkit that consumes
these files.
"""

from __future__ import annotations

import csv
import struct

import numpy as np

SMX_MAGIC = b"SMXP"
SMX_VERSION = 1
_HEADER = struct.Struct("<4sHHQ")


def write_smx(path, probs: np.ndarray, true_labels: np.ndarray, pred_labels: np.ndarray) -> None:
    n, k = probs.shape
    body = np.empty((n, k + 2), dtype="<f8")
    body[:, :k] = probs
    body[:, k] = true_labels
    body[:, k + 1] = pred_labels
    with open(path, "wb") as f:
        f.write(_HEADER.pack(SMX_MAGIC, SMX_VERSION, k, n))
        f.write(body.tobytes())


def write_csv(path, probs: np.ndarray, true_labels: np.ndarray, pred_labels: np.ndarray) -> None:
    n, k = probs.shape
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow([f"p{i}" for i in range(k)] + ["true", "pred"])
        for i in range(n):
            w.writerow(
                [repr(float(v)) for v in probs[i]]
                + [int(true_labels[i]), int(pred_labels[i])]
            )

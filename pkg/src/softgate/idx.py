"""Bit-exact IDX image/label file I/O and the perturbed-dataset sidecars.

Headers are big-endian u32 fields: images carry magic 2051 followed by
count, rows, cols; labels carry magic 2049 followed by count. The
perturbation sidecar is headerless: two bytes per image, (type, level),
with 0xFF 0xFF marking a clean image. The clean/perturbed flags file is
likewise headerless, one byte per image.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError

IMAGES_MAGIC = 2051
LABELS_MAGIC = 2049

SIDECAR_CLEAN = (0xFF, 0xFF)
SIDECAR_ENTRY_BYTES = 2
FLAG_CLEAN = 0x00
FLAG_PERTURBED = 0x01

# Guard against nonsense headers allocating absurd buffers.
_MAX_PIXELS = 1 << 40

_IMAGES_HEADER = struct.Struct(">IIII")
_LABELS_HEADER = struct.Struct(">II")

_CHUNK = 1 << 20


@dataclass(frozen=True)
class IdxImages:
    pixels: np.ndarray  # (count, rows, cols) uint8

    def __post_init__(self):
        p = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        if p.ndim != 3:
            raise FormatError(f"pixel array must be 3-d, got shape {p.shape}")
        p.setflags(write=False)
        object.__setattr__(self, "pixels", p)

    @property
    def count(self) -> int:
        return self.pixels.shape[0]

    @property
    def rows(self) -> int:
        return self.pixels.shape[1]

    @property
    def cols(self) -> int:
        return self.pixels.shape[2]


@dataclass(frozen=True)
class IdxLabels:
    labels: np.ndarray  # (count,) uint8

    def __post_init__(self):
        a = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if a.ndim != 1:
            raise FormatError(f"label array must be 1-d, got shape {a.shape}")
        a.setflags(write=False)
        object.__setattr__(self, "labels", a)

    @property
    def count(self) -> int:
        return self.labels.shape[0]


@dataclass(frozen=True)
class PerturbationSidecar:
    """(type_code, level_code) byte pairs, one per image.

    type_code is 0..11 (see perturb.PerturbationType) and level_code is
    0..9 (intensity level minus one); the clean sentinel 0xFF appears in
    both positions together or not at all.
    """

    entries: np.ndarray  # (count, 2) uint8

    def __post_init__(self):
        a = np.ascontiguousarray(self.entries, dtype=np.uint8)
        if a.ndim != 2 or a.shape[1] != 2:
            raise FormatError(f"sidecar entries must be (n, 2), got shape {a.shape}")
        types, levels = a[:, 0], a[:, 1]
        clean_t = types == 0xFF
        clean_l = levels == 0xFF
        if (clean_t != clean_l).any():
            raise FormatError("clean sentinel bytes must appear together")
        if ((types > 11) & ~clean_t).any():
            raise FormatError("perturbation type code outside 0..11")
        if ((levels > 9) & ~clean_l).any():
            raise FormatError("perturbation level code outside 0..9")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def count(self) -> int:
        return self.entries.shape[0]


def images_file_size(count: int, rows: int, cols: int) -> int:
    return _IMAGES_HEADER.size + count * rows * cols


def labels_file_size(count: int) -> int:
    return _LABELS_HEADER.size + count


def _read_exact(f, size: int, path, what: str) -> bytes:
    data = f.read(size)
    if len(data) != size:
        raise FormatError(f"{path}: truncated {what} ({len(data)} of {size} bytes)")
    return data


def read_idx_images(path) -> IdxImages:
    with open(path, "rb") as f:
        header = _read_exact(f, _IMAGES_HEADER.size, path, "header")
        magic, count, rows, cols = _IMAGES_HEADER.unpack(header)
        if magic != IMAGES_MAGIC:
            raise FormatError(f"{path}: bad magic {magic}, expected {IMAGES_MAGIC}")
        total = count * rows * cols
        if total > _MAX_PIXELS:
            raise FormatError(f"{path}: header implies {total} pixels; size overflow")
        payload = f.read()
    if len(payload) != total:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes, header implies {total}"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(count, rows, cols)
    return IdxImages(pixels.copy())


def write_idx_images(images: IdxImages, path) -> None:
    with open(path, "wb") as f:
        f.write(_IMAGES_HEADER.pack(IMAGES_MAGIC, images.count, images.rows, images.cols))
        buf = images.pixels.tobytes()
        for off in range(0, len(buf), _CHUNK):
            f.write(buf[off : off + _CHUNK])


def read_idx_labels(path) -> IdxLabels:
    with open(path, "rb") as f:
        header = _read_exact(f, _LABELS_HEADER.size, path, "header")
        magic, count = _LABELS_HEADER.unpack(header)
        if magic != LABELS_MAGIC:
            raise FormatError(f"{path}: bad magic {magic}, expected {LABELS_MAGIC}")
        payload = f.read()
    if len(payload) != count:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, header says {count}")
    return IdxLabels(np.frombuffer(payload, dtype=np.uint8).copy())


def write_idx_labels(labels: IdxLabels, path) -> None:
    with open(path, "wb") as f:
        f.write(_LABELS_HEADER.pack(LABELS_MAGIC, labels.count))
        f.write(labels.labels.tobytes())


def read_sidecar(path, count: int) -> PerturbationSidecar:
    expected = count * SIDECAR_ENTRY_BYTES
    with open(path, "rb") as f:
        payload = f.read()
    if len(payload) != expected:
        raise FormatError(
            f"{path}: sidecar is {len(payload)} bytes, expected {expected} for {count} entries"
        )
    return PerturbationSidecar(np.frombuffer(payload, dtype=np.uint8).reshape(count, 2).copy())


def write_sidecar(sidecar: PerturbationSidecar, path) -> None:
    with open(path, "wb") as f:
        f.write(sidecar.entries.tobytes())


def read_flags(path, count: int) -> np.ndarray:
    with open(path, "rb") as f:
        payload = f.read()
    if len(payload) != count:
        raise FormatError(f"{path}: flags file is {len(payload)} bytes, expected {count}")
    flags = np.frombuffer(payload, dtype=np.uint8).copy()
    if not np.isin(flags, (FLAG_CLEAN, FLAG_PERTURBED)).all():
        raise FormatError(f"{path}: flag bytes must be 0x00 or 0x01")
    return flags


def write_flags(flags: np.ndarray, path) -> None:
    with open(path, "wb") as f:
        f.write(np.ascontiguousarray(flags, dtype=np.uint8).tobytes())


class IdxImageWriter:
    """Incremental image writer with bounded memory.

    Writes a placeholder header, streams images one by one, then patches
    the final count on close. Use as a context manager.
    """

    def __init__(self, path, rows: int, cols: int):
        self.path = path
        self.rows = rows
        self.cols = cols
        self.count = 0
        self._f = open(path, "wb")
        self._f.write(_IMAGES_HEADER.pack(IMAGES_MAGIC, 0, rows, cols))

    def write(self, image: np.ndarray) -> None:
        image = np.ascontiguousarray(image, dtype=np.uint8)
        if image.shape != (self.rows, self.cols):
            raise FormatError(
                f"image shape {image.shape}, writer expects ({self.rows}, {self.cols})"
            )
        self._f.write(image.tobytes())
        self.count += 1

    def close(self) -> None:
        self._f.seek(0)
        self._f.write(_IMAGES_HEADER.pack(IMAGES_MAGIC, self.count, self.rows, self.cols))
        self._f.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


class IdxLabelWriter:
    """Incremental label writer; count patched on close."""

    def __init__(self, path):
        self.path = path
        self.count = 0
        self._f = open(path, "wb")
        self._f.write(_LABELS_HEADER.pack(LABELS_MAGIC, 0))

    def write(self, label: int) -> None:
        self._f.write(bytes([label & 0xFF]))
        self.count += 1

    def close(self) -> None:
        self._f.seek(0)
        self._f.write(_LABELS_HEADER.pack(LABELS_MAGIC, self.count))
        self._f.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


@dataclass(frozen=True)
class InspectReport:
    path: str
    kind: str            # "images" | "labels" | "unknown"
    magic: int | None
    count: int | None
    rows: int | None
    cols: int | None
    expected_size: int | None
    actual_size: int
    ok: bool
    message: str

    def lines(self) -> list[str]:
        out = [f"file: {self.path}", f"kind: {self.kind}"]
        if self.magic is not None:
            out.append(f"magic: {self.magic}")
        if self.count is not None:
            out.append(f"count: {self.count}")
        if self.rows is not None:
            out.append(f"rows: {self.rows}")
            out.append(f"cols: {self.cols}")
        if self.expected_size is not None:
            out.append(f"expected size: {self.expected_size}")
        out.append(f"actual size: {self.actual_size}")
        out.append(f"status: {self.message}")
        return out


def inspect(path) -> InspectReport:
    """Header report for an IDX file; never raises on malformed content."""
    import os

    actual = os.path.getsize(path)
    with open(path, "rb") as f:
        head = f.read(_IMAGES_HEADER.size)
    if len(head) >= 4:
        (magic,) = struct.unpack(">I", head[:4])
    else:
        magic = None
    if magic == IMAGES_MAGIC and len(head) >= _IMAGES_HEADER.size:
        _, count, rows, cols = _IMAGES_HEADER.unpack(head)
        expected = images_file_size(count, rows, cols)
        ok = expected == actual
        return InspectReport(
            str(path), "images", magic, count, rows, cols, expected, actual, ok,
            "ok" if ok else f"size mismatch: expected {expected}, found {actual}",
        )
    if magic == LABELS_MAGIC and len(head) >= _LABELS_HEADER.size:
        _, count = _LABELS_HEADER.unpack(head[: _LABELS_HEADER.size])
        expected = labels_file_size(count)
        ok = expected == actual
        return InspectReport(
            str(path), "labels", magic, count, None, None, expected, actual, ok,
            "ok" if ok else f"size mismatch: expected {expected}, found {actual}",
        )
    return InspectReport(
        str(path), "unknown", magic, None, None, None, None, actual, False,
        f"bad magic {magic}" if magic is not None else "file too short for a header",
    )


def permnist_filenames(split: str = "train") -> dict[str, str]:
    """Conventional output names for the perturbed-dataset file set."""
    if split == "train":
        return {
            "images": "perturbed-train-images-idx3-ubyte",
            "labels": "perturbed-train-labels-idx1-ubyte",
            "sidecar": "perturbation-train-levels-idx0-ubyte",
            "flags": "perturbed-train-flags-ubyte",
        }
    if split == "test":
        return {
            "images": "t20k-perturbed-images-idx3-ubyte",
            "labels": "t20k-perturbed-labels-idx1-ubyte",
            "sidecar": "t20k-perturbation-levels-idx0-ubyte",
            "flags": "t20k-perturbed-flags-ubyte",
        }
    raise FormatError(f"unknown split {split!r}")

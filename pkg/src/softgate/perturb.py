"""Twelve grayscale perturbation kernels at ten severity levels, and the
paired/grid perturbed-dataset generator.

Parameter schedules follow common corruption-benchmark conventions and
are monotone in the level; they live in one table (severity_schedule) so
audits and re-tuning touch a single place. All stochastic kernels draw
from a counter-based generator keyed by (seed, image index, type, level),
which makes grid generation order-independent and parallel-safe.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch, ParameterError
from .idx import (
    FLAG_CLEAN,
    FLAG_PERTURBED,
    IdxImages,
    IdxLabels,
    SIDECAR_CLEAN,
    IdxImageWriter,
    IdxLabelWriter,
    permnist_filenames,
)

MODE_PAIRED = "paired"
MODE_GRID = "grid"

LEVEL_MIN = 1
LEVEL_MAX = 10

# Stream tag separating the per-image "which perturbation" draw from the
# kernels' own noise streams.
_SELECT_TAG = 0x53454C45


class PerturbationType(enum.IntEnum):
    """Fixed codes, serialized in sidecars; never renumber."""

    BRIGHTNESS = 0
    CONTRAST = 1
    DEFOCUS_BLUR = 2
    FOG = 3
    FROST = 4
    GAUSSIAN_NOISE = 5
    IMPULSE_NOISE = 6
    MOTION_BLUR = 7
    PIXELATION = 8
    SHOT_NOISE = 9
    SNOW = 10
    ZOOM_BLUR = 11


@dataclass(frozen=True)
class PerturbationSpec:
    ptype: PerturbationType
    level: int  # 1..10

    def __post_init__(self):
        if not LEVEL_MIN <= self.level <= LEVEL_MAX:
            raise ParameterError(
                f"level {self.level} outside {LEVEL_MIN}..{LEVEL_MAX}"
            )
        object.__setattr__(self, "ptype", PerturbationType(self.ptype))


def severity_schedule(ptype: PerturbationType, level: int) -> dict:
    """Declared kernel parameters for (type, level); pure table lookup."""
    if not LEVEL_MIN <= level <= LEVEL_MAX:
        raise ParameterError(f"level {level} outside {LEVEL_MIN}..{LEVEL_MAX}")
    ptype = PerturbationType(ptype)
    L = level
    table = {
        PerturbationType.BRIGHTNESS: {"delta": 25.0 * L},
        PerturbationType.CONTRAST: {"gain": 1.0 - 0.08 * L},
        PerturbationType.DEFOCUS_BLUR: {"radius_px": 0.5 * L},
        PerturbationType.FOG: {"blend": 0.05 * L, "smooth_sigma": 4.0},
        PerturbationType.FROST: {
            "blend": 0.04 * L,
            "smooth_sigma": 2.0,
            "threshold_quantile": 0.6,
        },
        PerturbationType.GAUSSIAN_NOISE: {"sigma": 0.04 * L * 255.0},
        PerturbationType.IMPULSE_NOISE: {"fraction": 0.03 * L},
        PerturbationType.MOTION_BLUR: {"length_px": 1 + L, "angle_deg": 45.0},
        PerturbationType.PIXELATION: {"scale": 1.0 + 0.3 * L},
        PerturbationType.SHOT_NOISE: {"rate": max(60.0 - 5.5 * L, 3.0)},
        PerturbationType.SNOW: {"density": 0.004 * L, "streak_px": 3},
        PerturbationType.ZOOM_BLUR: {"max_zoom": 1.0 + 0.02 * L, "step": 0.01},
    }
    return table[ptype]


def _rng(seed: int, *stream: int) -> np.random.Generator:
    key = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(s) & 0xFFFFFFFFFFFFFFFF for s in stream]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def _finish(x: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(x), 0, 255).astype(np.uint8)


def _brightness(x, params, rng):
    return x + params["delta"]


def _contrast(x, params, rng):
    m = x.mean()
    return m + (x - m) * params["gain"]


def _gaussian_noise(x, params, rng):
    return x + rng.normal(0.0, params["sigma"], x.shape)


def _shot_noise(x, params, rng):
    c = params["rate"]
    return rng.poisson((x / 255.0) * c) / c * 255.0


def _impulse_noise(x, params, rng):
    n = round(params["fraction"] * x.size)
    if n == 0:
        return x
    flat = x.copy().reshape(-1)
    picks = rng.choice(x.size, size=n, replace=False)
    n_salt = (n + 1) // 2
    flat[picks[:n_salt]] = 255.0
    flat[picks[n_salt:]] = 0.0
    return flat.reshape(x.shape)


def _disk_kernel(radius: float) -> np.ndarray:
    r = max(1, math.ceil(radius))
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
    mask = (yy * yy + xx * xx) <= radius * radius + 1e-9
    kern = mask.astype(np.float64)
    return kern / kern.sum()


def _defocus_blur(x, params, rng):
    return ndimage.convolve(x, _disk_kernel(params["radius_px"]), mode="nearest")


def _motion_blur(x, params, rng):
    n = params["length_px"]
    kern = np.zeros((n, n))
    np.fill_diagonal(kern, 1.0 / n)  # fixed 45-degree streak
    return ndimage.convolve(x, kern, mode="nearest")


def _zoom_blur(x, params, rng):
    rows, cols = x.shape
    cy, cx = (rows - 1) / 2.0, (cols - 1) / 2.0
    zooms = np.arange(1.0, params["max_zoom"] + 1e-9, params["step"])
    acc = np.zeros_like(x)
    ii, jj = np.mgrid[0:rows, 0:cols].astype(np.float64)
    for z in zooms:
        coords = np.stack([cy + (ii - cy) / z, cx + (jj - cx) / z])
        acc += ndimage.map_coordinates(x, coords, order=1, mode="nearest")
    return acc / len(zooms)


def _fog(x, params, rng):
    haze = ndimage.gaussian_filter(rng.random(x.shape), params["smooth_sigma"])
    lo, hi = haze.min(), haze.max()
    haze = (haze - lo) / (hi - lo) if hi > lo else np.full_like(haze, 0.5)
    t = params["blend"]
    return (1.0 - t) * x + t * 255.0 * haze


def _frost(x, params, rng):
    field = ndimage.gaussian_filter(rng.random(x.shape), params["smooth_sigma"])
    crystal = np.where(field > np.quantile(field, params["threshold_quantile"]), 255.0, 0.0)
    t = params["blend"]
    return (1.0 - t) * x + t * crystal


def _snow(x, params, rng):
    n = round(params["density"] * x.size)
    if n == 0:
        return x
    specks = np.zeros(x.shape)
    picks = rng.choice(x.size, size=n, replace=False)
    specks.reshape(-1)[picks] = 1.0
    streak = np.eye(params["streak_px"])
    smeared = ndimage.convolve(specks, streak, mode="constant", cval=0.0)
    return np.where(smeared > 0, 255.0, x)


def _pixelation(x, params, rng):
    rows, cols = x.shape
    th = math.ceil(rows / params["scale"])
    tw = math.ceil(cols / params["scale"])
    map_r = np.arange(rows) * th // rows
    map_c = np.arange(cols) * tw // cols
    sums = np.zeros((th, tw))
    np.add.at(sums, (map_r[:, None], map_c[None, :]), x)
    counts = np.bincount(map_r, minlength=th)[:, None] * np.bincount(map_c, minlength=tw)[None, :]
    small = sums / counts
    return small[map_r[:, None], map_c[None, :]]


_KERNELS = {
    PerturbationType.BRIGHTNESS: _brightness,
    PerturbationType.CONTRAST: _contrast,
    PerturbationType.DEFOCUS_BLUR: _defocus_blur,
    PerturbationType.FOG: _fog,
    PerturbationType.FROST: _frost,
    PerturbationType.GAUSSIAN_NOISE: _gaussian_noise,
    PerturbationType.IMPULSE_NOISE: _impulse_noise,
    PerturbationType.MOTION_BLUR: _motion_blur,
    PerturbationType.PIXELATION: _pixelation,
    PerturbationType.SHOT_NOISE: _shot_noise,
    PerturbationType.SNOW: _snow,
    PerturbationType.ZOOM_BLUR: _zoom_blur,
}

_STOCHASTIC = {
    PerturbationType.FOG,
    PerturbationType.FROST,
    PerturbationType.GAUSSIAN_NOISE,
    PerturbationType.IMPULSE_NOISE,
    PerturbationType.SHOT_NOISE,
    PerturbationType.SNOW,
}


def apply_perturbation(
    img: np.ndarray,
    spec: PerturbationSpec,
    seed: int = 0,
    image_index: int = 0,
) -> np.ndarray:
    """Perturbed copy of a grayscale image: same dims, clamped to [0, 255],
    deterministic given (img, spec, seed, image_index)."""
    img = np.asarray(img)
    if img.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d grayscale image, got shape {img.shape}")
    params = severity_schedule(spec.ptype, spec.level)
    rng = (
        _rng(seed, image_index, int(spec.ptype), spec.level)
        if spec.ptype in _STOCHASTIC
        else None
    )
    x = img.astype(np.float64)
    return _finish(_KERNELS[spec.ptype](x, params, rng))


def mean_abs_delta(a: np.ndarray, b: np.ndarray) -> float:
    """Mean absolute pixel difference; the severity-monotonicity probe."""
    return float(np.abs(a.astype(np.float64) - b.astype(np.float64)).mean())


@dataclass(frozen=True)
class GenerationResult:
    mode: str
    seed: int
    input_count: int
    output_count: int
    paths: dict


def generate_permnist(
    images: IdxImages,
    labels: IdxLabels,
    mode: str,
    seed: int,
    out_dir,
    split: str = "train",
    types: list[PerturbationType] | None = None,
    levels: list[int] | None = None,
) -> GenerationResult:
    """Write the perturbed companion dataset next to the originals.

    Paired mode keeps each clean image followed by one randomly perturbed
    copy (2n images); grid mode writes the clean image then every
    (type, level) combination in type-major, level-minor order (121n for
    the full set). Four files are emitted: images (idx3), digit labels
    (idx1, duplicated per copy), clean/perturbed flag bytes, and the
    (type, level) sidecar with the 0xFF 0xFF clean sentinel. Byte-for-byte
    reproducible under a fixed seed.
    """
    import os

    if mode not in (MODE_PAIRED, MODE_GRID):
        raise ParameterError(f"mode must be {MODE_PAIRED!r} or {MODE_GRID!r}")
    if images.count != labels.count:
        raise ParameterError(
            f"image count {images.count} != label count {labels.count}"
        )
    types = sorted(PerturbationType(t) for t in (types or list(PerturbationType)))
    levels = sorted(int(v) for v in (levels or range(LEVEL_MIN, LEVEL_MAX + 1)))
    for lv in levels:
        if not LEVEL_MIN <= lv <= LEVEL_MAX:
            raise ParameterError(f"level {lv} outside {LEVEL_MIN}..{LEVEL_MAX}")
    if not types or not levels:
        raise ParameterError("types and levels must be non-empty")

    names = permnist_filenames(split)
    paths = {key: os.path.join(out_dir, name) for key, name in names.items()}
    os.makedirs(out_dir, exist_ok=True)

    clean_entry = bytes(SIDECAR_CLEAN)
    with IdxImageWriter(paths["images"], images.rows, images.cols) as iw, \
            IdxLabelWriter(paths["labels"]) as lw, \
            open(paths["flags"], "wb") as fw, \
            open(paths["sidecar"], "wb") as sw:

        def emit(img, label, flag, entry):
            iw.write(img)
            lw.write(label)
            fw.write(bytes([flag]))
            sw.write(entry)

        for i in range(images.count):
            img = images.pixels[i]
            label = int(labels.labels[i])
            emit(img, label, FLAG_CLEAN, clean_entry)
            if mode == MODE_PAIRED:
                sel = _rng(seed, _SELECT_TAG, i)
                spec = PerturbationSpec(
                    types[int(sel.integers(len(types)))],
                    levels[int(sel.integers(len(levels)))],
                )
                emit(
                    apply_perturbation(img, spec, seed, image_index=i),
                    label, FLAG_PERTURBED,
                    bytes([int(spec.ptype), spec.level - 1]),
                )
            else:
                for t in types:
                    for lv in levels:
                        spec = PerturbationSpec(t, lv)
                        emit(
                            apply_perturbation(img, spec, seed, image_index=i),
                            label, FLAG_PERTURBED,
                            bytes([int(t), lv - 1]),
                        )
        out_count = iw.count

    return GenerationResult(
        mode=mode,
        seed=seed,
        input_count=images.count,
        output_count=out_count,
        paths=paths,
    )

import hashlib

import numpy as np
import pytest

from softgate import idx, perturb
from softgate.errors import DimensionMismatch, ParameterError
from softgate.perturb import PerturbationSpec, PerturbationType, apply_perturbation, mean_abs_delta


ALL_TYPES = list(PerturbationType)


class TestTypeCodes:
    def test_codes_fixed_in_listing_order(self):
        assert [t.value for t in ALL_TYPES] == list(range(12))
        assert PerturbationType.BRIGHTNESS == 0
        assert PerturbationType.CONTRAST == 1
        assert PerturbationType.DEFOCUS_BLUR == 2
        assert PerturbationType.FOG == 3
        assert PerturbationType.FROST == 4
        assert PerturbationType.GAUSSIAN_NOISE == 5
        assert PerturbationType.IMPULSE_NOISE == 6
        assert PerturbationType.MOTION_BLUR == 7
        assert PerturbationType.PIXELATION == 8
        assert PerturbationType.SHOT_NOISE == 9
        assert PerturbationType.SNOW == 10
        assert PerturbationType.ZOOM_BLUR == 11

    def test_level_range_enforced(self):
        for bad in (0, 11, -1):
            with pytest.raises(ParameterError):
                PerturbationSpec(PerturbationType.BRIGHTNESS, bad)


class TestSeveritySchedule:
    def test_declared_parameters(self):
        assert perturb.severity_schedule(PerturbationType.GAUSSIAN_NOISE, 5)["sigma"] == 0.20 * 255
        assert perturb.severity_schedule(PerturbationType.PIXELATION, 10)["scale"] == 4.0
        assert perturb.severity_schedule(PerturbationType.BRIGHTNESS, 1)["delta"] == 25.0

    def test_level_validated(self):
        with pytest.raises(ParameterError):
            perturb.severity_schedule(PerturbationType.FOG, 0)

    def test_pixelation_target_side(self):
        # scale 4 at level 10: 28 -> ceil(28/4) = 7 blocks per side
        out = apply_perturbation(
            np.arange(784, dtype=np.uint8).reshape(28, 28) % 251,
            PerturbationSpec(PerturbationType.PIXELATION, 10),
        )
        assert len(np.unique(out)) <= 49


class TestApplyPerturbation:
    @pytest.mark.parametrize("ptype", ALL_TYPES)
    @pytest.mark.parametrize("level", [1, 10])
    def test_dims_dtype_and_clamp(self, digit_image, ptype, level):
        out = apply_perturbation(digit_image, PerturbationSpec(ptype, level), seed=1)
        assert out.shape == digit_image.shape
        assert out.dtype == np.uint8

    @pytest.mark.parametrize("ptype", ALL_TYPES)
    def test_odd_shapes_supported(self, ptype):
        img = (np.arange(35) * 7 % 256).astype(np.uint8).reshape(5, 7)
        out = apply_perturbation(img, PerturbationSpec(ptype, 5), seed=2)
        assert out.shape == (5, 7)

    @pytest.mark.parametrize("ptype", ALL_TYPES)
    def test_deterministic_given_seed(self, digit_image, ptype):
        spec = PerturbationSpec(ptype, 6)
        a = apply_perturbation(digit_image, spec, seed=9, image_index=3)
        b = apply_perturbation(digit_image, spec, seed=9, image_index=3)
        assert np.array_equal(a, b)

    def test_seed_changes_stochastic_output(self, digit_image):
        spec = PerturbationSpec(PerturbationType.GAUSSIAN_NOISE, 5)
        a = apply_perturbation(digit_image, spec, seed=1)
        b = apply_perturbation(digit_image, spec, seed=2)
        assert not np.array_equal(a, b)

    def test_image_index_is_its_own_stream(self, digit_image):
        spec = PerturbationSpec(PerturbationType.GAUSSIAN_NOISE, 5)
        a = apply_perturbation(digit_image, spec, seed=1, image_index=0)
        b = apply_perturbation(digit_image, spec, seed=1, image_index=1)
        assert not np.array_equal(a, b)

    def test_brightness_is_additive_clamped(self, digit_image):
        for level in (1, 4, 10):
            out = apply_perturbation(
                digit_image, PerturbationSpec(PerturbationType.BRIGHTNESS, level)
            )
            want = np.clip(digit_image.astype(float) + 25.0 * level, 0, 255).astype(np.uint8)
            assert np.array_equal(out, want)

    def test_gaussian_noise_statistics(self):
        # flat mid-gray: empirical delta std within 10% of the schedule sigma
        img = np.full((128, 128), 128, dtype=np.uint8)
        spec = PerturbationSpec(PerturbationType.GAUSSIAN_NOISE, 3)
        sigma = perturb.severity_schedule(spec.ptype, spec.level)["sigma"]
        out = apply_perturbation(img, spec, seed=4)
        delta = out.astype(float) - img.astype(float)
        assert abs(delta.std() - sigma) / sigma < 0.10

    def test_contrast_pulls_towards_mean(self):
        img = np.zeros((10, 10), dtype=np.uint8)
        img[:5] = 200
        out = apply_perturbation(img, PerturbationSpec(PerturbationType.CONTRAST, 10))
        assert out.astype(float).std() < img.astype(float).std()

    def test_rejects_non_2d(self):
        with pytest.raises(DimensionMismatch):
            apply_perturbation(
                np.zeros((2, 3, 4), dtype=np.uint8),
                PerturbationSpec(PerturbationType.FOG, 1),
            )

    @pytest.mark.parametrize(
        "ptype",
        [
            PerturbationType.GAUSSIAN_NOISE,
            PerturbationType.SHOT_NOISE,
            PerturbationType.IMPULSE_NOISE,
            PerturbationType.BRIGHTNESS,
        ],
    )
    def test_noise_family_severity_monotone(self, digit_image, ptype):
        deltas = [
            mean_abs_delta(
                digit_image,
                apply_perturbation(digit_image, PerturbationSpec(ptype, lv), seed=5),
            )
            for lv in range(1, 11)
        ]
        assert all(b >= a for a, b in zip(deltas, deltas[1:])), deltas


def small_dataset(n=3, seed=0):
    rng = np.random.default_rng(seed)
    images = idx.IdxImages(rng.integers(0, 256, (n, 28, 28)).astype(np.uint8))
    labels = idx.IdxLabels((np.arange(n) % 10).astype(np.uint8))
    return images, labels


def file_hashes(paths):
    return {
        key: hashlib.sha256(open(p, "rb").read()).hexdigest()
        for key, p in paths.items()
    }


class TestGeneratePaired:
    def test_layout_of_three_image_set(self, tmp_path):
        images, labels = small_dataset(3)
        res = perturb.generate_permnist(images, labels, "paired", seed=7, out_dir=tmp_path)
        assert res.output_count == 6
        out_images = idx.read_idx_images(res.paths["images"])
        assert out_images.count == 6
        # clean copies sit at even positions
        for i in range(3):
            assert np.array_equal(out_images.pixels[2 * i], images.pixels[i])
        sc = idx.read_sidecar(res.paths["sidecar"], 6)
        assert (sc.entries[0::2] == 0xFF).all()
        assert (sc.entries[1::2, 0] <= 11).all()
        flags = idx.read_flags(res.paths["flags"], 6)
        assert list(flags) == [0, 1, 0, 1, 0, 1]
        out_labels = idx.read_idx_labels(res.paths["labels"])
        assert list(out_labels.labels) == [0, 0, 1, 1, 2, 2]
        import os

        assert os.path.getsize(res.paths["sidecar"]) == 12

    def test_perturbed_rows_reproducible_from_sidecar(self, tmp_path):
        images, labels = small_dataset(4, seed=3)
        res = perturb.generate_permnist(images, labels, "paired", seed=11, out_dir=tmp_path)
        out = idx.read_idx_images(res.paths["images"])
        sc = idx.read_sidecar(res.paths["sidecar"], res.output_count)
        for i in range(4):
            t, lv = int(sc.entries[2 * i + 1, 0]), int(sc.entries[2 * i + 1, 1])
            want = apply_perturbation(
                images.pixels[i],
                PerturbationSpec(PerturbationType(t), lv + 1),
                seed=11,
                image_index=i,
            )
            assert np.array_equal(out.pixels[2 * i + 1], want)

    def test_count_mismatch_rejected(self, tmp_path):
        images, _ = small_dataset(3)
        labels = idx.IdxLabels(np.zeros(2, np.uint8))
        with pytest.raises(ParameterError, match="count"):
            perturb.generate_permnist(images, labels, "paired", seed=1, out_dir=tmp_path)

    def test_unknown_mode_rejected(self, tmp_path):
        images, labels = small_dataset(1)
        with pytest.raises(ParameterError, match="mode"):
            perturb.generate_permnist(images, labels, "both", seed=1, out_dir=tmp_path)


class TestGenerateGrid:
    def test_grid_order_and_count(self, tmp_path):
        images, labels = small_dataset(2, seed=5)
        res = perturb.generate_permnist(images, labels, "grid", seed=7, out_dir=tmp_path)
        assert res.output_count == 242
        out = idx.read_idx_images(res.paths["images"])
        assert np.array_equal(out.pixels[0], images.pixels[0])
        # positions 1..10 are the first type (Brightness) at levels 1..10
        for lv in range(1, 11):
            want = apply_perturbation(
                images.pixels[0],
                PerturbationSpec(PerturbationType.BRIGHTNESS, lv),
                seed=7,
                image_index=0,
            )
            assert np.array_equal(out.pixels[lv], want)
        sc = idx.read_sidecar(res.paths["sidecar"], 242)
        assert tuple(sc.entries[0]) == (0xFF, 0xFF)
        assert tuple(sc.entries[1]) == (0, 0)
        assert tuple(sc.entries[11]) == (1, 0)  # second type starts after 10 levels
        assert tuple(sc.entries[121]) == (0xFF, 0xFF)  # second image's clean copy

    def test_type_and_level_subsets(self, tmp_path):
        images, labels = small_dataset(2)
        res = perturb.generate_permnist(
            images, labels, "grid", seed=7, out_dir=tmp_path,
            types=[PerturbationType.GAUSSIAN_NOISE], levels=[2, 4],
        )
        assert res.output_count == 2 * (1 + 1 * 2)
        sc = idx.read_sidecar(res.paths["sidecar"], res.output_count)
        assert tuple(sc.entries[1]) == (5, 1)
        assert tuple(sc.entries[2]) == (5, 3)

    def test_invalid_subset_level(self, tmp_path):
        images, labels = small_dataset(1)
        with pytest.raises(ParameterError):
            perturb.generate_permnist(
                images, labels, "grid", seed=7, out_dir=tmp_path, levels=[0]
            )

    def test_byte_identical_across_runs(self, tmp_path):
        images, labels = small_dataset(3, seed=9)
        r1 = perturb.generate_permnist(images, labels, "grid", seed=13, out_dir=tmp_path / "a")
        r2 = perturb.generate_permnist(images, labels, "grid", seed=13, out_dir=tmp_path / "b")
        assert file_hashes(r1.paths) == file_hashes(r2.paths)

    def test_outputs_pass_idx_validation(self, tmp_path):
        images, labels = small_dataset(2)
        res = perturb.generate_permnist(images, labels, "paired", seed=3, out_dir=tmp_path)
        for key in ("images", "labels"):
            assert idx.inspect(res.paths[key]).ok

    def test_test_split_filenames(self, tmp_path):
        images, labels = small_dataset(1)
        res = perturb.generate_permnist(
            images, labels, "paired", seed=3, out_dir=tmp_path, split="test"
        )
        assert res.paths["images"].endswith("t20k-perturbed-images-idx3-ubyte")

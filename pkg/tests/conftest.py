import numpy as np
import pytest

from softgate import PredictionMatrix

from reference_data import CORRECT_COUNTS, INCORRECT_COUNTS


def one_hot(k: int, i: int) -> np.ndarray:
    v = np.zeros(k)
    v[i] = 1.0
    return v


def reference_shaped_matrix() -> PredictionMatrix:
    """60000-row matrix whose correct/incorrect per-class counts match the
    reference digit-classifier evaluation; probabilities are one-hot (only
    the counts matter to the tests that use this)."""
    k = 10
    probs, true_labels, pred_labels = [], [], []
    for c in range(k):
        for _ in range(CORRECT_COUNTS[c]):
            probs.append(one_hot(k, c))
            true_labels.append(c)
            pred_labels.append(c)
        wrong = (c + 1) % k
        for _ in range(INCORRECT_COUNTS[c]):
            probs.append(one_hot(k, wrong))
            true_labels.append(c)
            pred_labels.append(wrong)
    return PredictionMatrix(
        np.array(probs), np.array(true_labels), np.array(pred_labels), k,
        source_tag="reference-shaped",
    )


@pytest.fixture(scope="session")
def ref_matrix() -> PredictionMatrix:
    return reference_shaped_matrix()


def make_digit_image() -> np.ndarray:
    """Deterministic 28x28 grayscale test image: radial gradient disk with
    a bright stroke, plenty of mid-gray pixels for noise statistics."""
    yy, xx = np.mgrid[0:28, 0:28]
    r = np.sqrt((yy - 13.5) ** 2 + (xx - 13.5) ** 2)
    img = np.clip(230 - 16 * r, 0, 230)
    img[10:18, 6:22] = np.maximum(img[10:18, 6:22], 180)
    return img.astype(np.uint8)


@pytest.fixture()
def digit_image() -> np.ndarray:
    return make_digit_image()

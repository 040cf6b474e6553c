import numpy as np
import pytest

from softgate import (
    CentroidSet,
    PredictionMatrix,
    distances_to_all_centroids,
    euclidean_distance,
    find_misclustered,
    init_centroids,
    kmeans,
)
from softgate.clustering import (
    check_label_integrity,
    pairwise_distances,
    read_centroids_csv,
    within_cluster_ss,
    write_centroids_csv,
)
from softgate.errors import DimensionMismatch, EmptyClassError, ParameterError

from conftest import one_hot


class TestEuclideanDistance:
    def test_identity(self):
        x = np.array([0.2, 0.3, 0.5])
        assert euclidean_distance(x, x) == 0.0

    def test_distinct_one_hots(self):
        assert euclidean_distance(one_hot(4, 0), one_hot(4, 1)) == pytest.approx(
            np.sqrt(2), abs=1e-12
        )

    def test_hand_computed(self):
        d = euclidean_distance(np.array([0.9, 0.1]), np.array([0.5, 0.5]))
        assert d == pytest.approx(0.56568542, abs=1e-8)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            euclidean_distance(np.zeros(3), np.zeros(4))


class TestInitCentroids:
    def test_one_hot_rows_give_identity(self):
        rows = [(one_hot(4, c), c, c) for c in range(4)]
        cs = init_centroids(PredictionMatrix.from_records(rows, k=4))
        assert np.array_equal(cs.centroids, np.eye(4))
        assert cs.provenance == "initial"

    def test_two_point_mean(self):
        rows = [
            (np.array([0.8, 0.2]), 0, 0),
            (np.array([0.6, 0.4]), 0, 0),
            (np.array([0.1, 0.9]), 1, 1),
        ]
        cs = init_centroids(PredictionMatrix.from_records(rows, k=2))
        assert cs.centroids[0] == pytest.approx([0.7, 0.3], abs=1e-12)

    def test_empty_class_raises(self):
        rows = [(one_hot(3, 0), 0, 0), (one_hot(3, 2), 2, 2)]
        with pytest.raises(EmptyClassError) as e:
            init_centroids(PredictionMatrix.from_records(rows, k=3))
        assert e.value.label == 1

    def test_rows_sum_to_one(self, ref_matrix):
        from softgate import partition

        correct = ref_matrix.take(partition(ref_matrix).correct)
        cs = init_centroids(correct)
        assert cs.centroids.shape == (10, 10)
        assert np.allclose(cs.centroids.sum(axis=1), 1.0, atol=1e-9)
        assert ((cs.centroids >= 0) & (cs.centroids <= 1)).all()


class TestKMeans:
    def test_fixed_point_converges_in_one_iteration(self):
        pts = np.array([[1.0, 0.0], [0.0, 1.0]])
        init = CentroidSet(pts.copy(), 2)
        res = kmeans(pts, init)
        assert res.iterations == 1
        assert res.final_shift == 0.0
        assert list(res.assignments) == [0, 1]
        assert res.centroids.provenance == "fitted"

    def test_line_clusters(self):
        pts = np.array([[0.0], [0.1], [0.9], [1.0]])
        init = CentroidSet(np.array([[0.05], [0.95]]), 2)
        res = kmeans(pts, init)
        assert list(res.assignments) == [0, 0, 1, 1]
        assert np.allclose(res.centroids.centroids, [[0.05], [0.95]], atol=1e-12)

    def test_assignments_are_nearest_centroid_consistent(self):
        rng = np.random.default_rng(4)
        pts = rng.random((60, 3))
        init = CentroidSet(pts[:3].copy(), 3)
        res = kmeans(pts, init)
        d = pairwise_distances(pts, res.centroids.centroids)
        assert np.array_equal(res.assignments, np.argmin(d, axis=1))

    def test_assignment_tie_breaks_to_lowest_index(self):
        pts = np.array([[0.5]])
        init = CentroidSet(np.array([[0.0], [1.0]]), 2)
        res = kmeans(pts, init, max_iter=1)
        assert res.assignments[0] == 0

    def test_empty_cluster_keeps_previous_centroid(self):
        pts = np.array([[0.0], [0.2]])
        init = CentroidSet(np.array([[0.1], [5.0]]), 2)
        res = kmeans(pts, init)
        assert res.centroids.centroids[1] == pytest.approx([5.0])

    def test_wcss_non_increasing(self):
        rng = np.random.default_rng(17)
        pts = rng.random((80, 4))
        init = CentroidSet(pts[:3].copy(), 3)
        res = kmeans(pts, init, record_history=True, tol=0.0, max_iter=12)
        wcss = [
            within_cluster_ss(pts, cents, assign) for cents, assign in res.history
        ]
        assert all(b <= a + 1e-12 for a, b in zip(wcss, wcss[1:]))

    def test_iteration_cap(self):
        rng = np.random.default_rng(3)
        pts = rng.random((50, 2))
        init = CentroidSet(pts[:2].copy(), 2)
        res = kmeans(pts, init, max_iter=2, tol=0.0)
        assert res.iterations == 2

    def test_early_stop_still_returns_consistent_assignments(self):
        # huge tol stops after one iteration with centroids still moving;
        # returned assignments must match the returned centroids anyway
        rng = np.random.default_rng(8)
        pts = rng.random((40, 2))
        init = CentroidSet(np.array([[0.9, 0.9], [1.0, 1.0]]), 2)
        res = kmeans(pts, init, max_iter=1, tol=100.0)
        d = pairwise_distances(pts, res.centroids.centroids)
        assert np.array_equal(res.assignments, np.argmin(d, axis=1))

    def test_errors(self):
        init = CentroidSet(np.zeros((2, 2)), 2)
        with pytest.raises(ParameterError):
            kmeans(np.zeros((0, 2)), init)
        with pytest.raises(DimensionMismatch):
            kmeans(np.zeros((3, 5)), init)
        with pytest.raises(ParameterError):
            kmeans(np.zeros((3, 2)), init, max_iter=0)


class TestFindMisclustered:
    def test_clean_assignment_is_empty(self):
        rows = [(one_hot(3, c), c, c) for c in range(3)]
        m = PredictionMatrix.from_records(rows, k=3)
        res = kmeans(m.probs, CentroidSet(np.eye(3), 3))
        assert find_misclustered(m, res) == []

    def test_planted_misclustered_row_reported(self):
        rows = [
            (np.array([1.0, 0.0]), 0, 0),
            (np.array([0.0, 1.0]), 1, 1),
            (np.array([0.1, 0.9]), 0, 1),  # class-0 image sitting by centroid 1
        ]
        m = PredictionMatrix.from_records(rows, k=2)
        res = kmeans(m.probs, CentroidSet(np.eye(2), 2), max_iter=1)
        assert find_misclustered(m, res) == [(2, 0, 1)]

    def test_length_mismatch(self):
        m = PredictionMatrix.from_records([(one_hot(2, 0), 0, 0)], k=2)
        res = kmeans(np.eye(2), CentroidSet(np.eye(2), 2))
        with pytest.raises(DimensionMismatch):
            find_misclustered(m, res)


class TestDistancesToAllCentroids:
    def test_zero_at_own_centroid(self):
        cs = CentroidSet(np.eye(4), 4)
        d = distances_to_all_centroids(one_hot(4, 3), cs)
        assert d[3] == 0.0

    def test_one_hot_vs_identity(self):
        cs = CentroidSet(np.eye(4), 4)
        d = distances_to_all_centroids(one_hot(4, 0), cs)
        assert d == pytest.approx([0.0] + [np.sqrt(2)] * 3, abs=1e-12)

    def test_uniform_vs_identity(self):
        cs = CentroidSet(np.eye(10), 10)
        d = distances_to_all_centroids(np.full(10, 0.1), cs)
        assert d == pytest.approx([np.sqrt(0.90)] * 10, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            distances_to_all_centroids(np.zeros(3), CentroidSet(np.eye(4), 4))


class TestLabelIntegrity:
    def test_warns_on_majority_drift(self):
        rows = [(one_hot(2, 0), 1, 1), (one_hot(2, 1), 0, 0)]
        m = PredictionMatrix.from_records(rows, k=2)
        with pytest.warns(UserWarning, match="cluster 0 majority"):
            bad = check_label_integrity(m, np.array([0, 1]))
        assert bad == [0, 1]

    def test_silent_when_clean(self, recwarn):
        rows = [(one_hot(2, 0), 0, 0), (one_hot(2, 1), 1, 1)]
        m = PredictionMatrix.from_records(rows, k=2)
        assert check_label_integrity(m, np.array([0, 1])) == []
        assert len(recwarn) == 0


class TestCentroidCsv:
    def test_round_trip_with_provenance(self, tmp_path):
        cs = CentroidSet(np.array([[0.25, 0.75], [0.9, 0.1]]), 2, "fitted")
        p = tmp_path / "c.csv"
        write_centroids_csv(cs, p)
        back = read_centroids_csv(p)
        assert back.provenance == "fitted"
        assert np.array_equal(back.centroids, cs.centroids)

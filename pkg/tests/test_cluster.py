"""Normalization, k-means determinism, stability, and cluster-count choice."""

import numpy as np
import pytest

from civicbudget.cluster import (
    ClusterModel,
    FeatureMatrix,
    assign_label,
    bootstrap_stability,
    gap_statistic,
    kmeans_fit,
    load_model,
    normalize_features,
    save_model,
    _lloyd,
)
from civicbudget.errors import DataError


def blobs(centers: np.ndarray, per: int, noise: float, seed: int) -> FeatureMatrix:
    rng = np.random.default_rng(seed)
    pts = np.vstack([c + noise * rng.standard_normal((per, len(c))) for c in centers])
    return FeatureMatrix(
        pts,
        tuple(f"r{i}" for i in range(len(pts))),
        tuple(f"f{j}" for j in range(pts.shape[1])),
        np.ones(pts.shape[1]),
    )


class TestNormalizeFeatures:
    def test_column_divided_by_sample_std(self):
        out = normalize_features(np.array([[2.0], [4.0], [6.0]]))
        assert np.allclose(out.values.ravel(), [1.0, 2.0, 3.0])
        assert out.scales[0] == pytest.approx(2.0)

    def test_constant_column_dropped_and_listed(self):
        raw = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
        out = normalize_features(raw, columns=("x", "c"))
        assert out.dropped == ("c",)
        assert out.columns == ("x",)

    def test_all_constant_raises(self):
        with pytest.raises(DataError):
            normalize_features(np.full((4, 2), 7.0))

    def test_identical_rows_stay_identical(self):
        raw = np.array([[1.0, 2.0], [1.0, 2.0], [3.0, 0.0]])
        out = normalize_features(raw)
        assert np.array_equal(out.values[0], out.values[1])


class TestKmeansFit:
    def test_two_points_two_clusters(self):
        m = FeatureMatrix(
            np.array([[0.0], [10.0]]), ("a", "b"), ("f",), np.ones(1)
        )
        model = kmeans_fit(m, 2, seed=0)
        assert sorted(model.centroids.ravel()) == [0.0, 10.0]
        assert model.inertia == 0.0

    def test_k1_is_grand_mean(self):
        m = FeatureMatrix(
            np.array([[0.0], [1.0], [5.0]]), ("a", "b", "c"), ("f",), np.ones(1)
        )
        model = kmeans_fit(m, 1, seed=3)
        assert model.centroids[0, 0] == pytest.approx(2.0)

    def test_separated_blobs_recover_membership(self):
        m = blobs(np.array([[0.0, 0.0], [20.0, 0.0], [0.0, 20.0]]), 4, 0.3, 1)
        model = kmeans_fit(m, 3, seed=0)
        truth = np.repeat([0, 1, 2], 4)
        # same partition up to label names
        for g in range(3):
            members = model.labels[truth == g]
            assert len(set(members.tolist())) == 1

    def test_k_above_distinct_rows_raises(self):
        m = FeatureMatrix(
            np.array([[1.0], [1.0], [2.0]]), ("a", "b", "c"), ("f",), np.ones(1)
        )
        with pytest.raises(DataError):
            kmeans_fit(m, 3, seed=0)

    def test_deterministic_for_fixed_seed(self):
        m = blobs(np.array([[0.0, 0.0], [6.0, 0.0]]), 25, 1.0, 5)
        a = kmeans_fit(m, 2, seed=11, restarts=4)
        b = kmeans_fit(m, 2, seed=11, restarts=4)
        assert np.array_equal(a.centroids, b.centroids)
        assert np.array_equal(a.labels, b.labels)
        assert a.inertia == b.inertia

    def test_lloyd_inertia_never_increases(self):
        m = blobs(np.array([[0.0, 0.0], [3.0, 1.0], [1.0, 4.0]]), 30, 1.5, 9)
        for rep in range(5):
            rng = np.random.default_rng(rep)
            _, _, _, history = _lloyd(m.values, 3, rng)
            assert all(b <= a + 1e-9 for a, b in zip(history, history[1:]))

    def test_centroid_is_member_mean(self):
        m = blobs(np.array([[0.0], [8.0]]), 20, 1.0, 2)
        model = kmeans_fit(m, 2, seed=0)
        for c in range(2):
            members = m.values[model.labels == c]
            assert np.allclose(model.centroids[c], members.mean(axis=0), rtol=1e-6)
        assert all((model.labels == c).sum() > 0 for c in range(2))

    def test_prescaling_a_column_does_not_change_partition(self):
        rng = np.random.default_rng(4)
        raw = np.vstack(
            [
                rng.standard_normal((20, 3)) + [0, 0, 0],
                rng.standard_normal((20, 3)) + [7, 7, 0],
            ]
        )
        scaled = raw.copy()
        scaled[:, 1] *= 250.0
        a = kmeans_fit(normalize_features(raw), 2, seed=6)
        b = kmeans_fit(normalize_features(scaled), 2, seed=6)
        assert np.array_equal(a.labels, b.labels)


class TestAssignLabel:
    def test_centroid_maps_to_own_index(self):
        m = blobs(np.array([[0.0, 0.0], [9.0, 9.0]]), 10, 0.5, 3)
        model = kmeans_fit(m, 2, seed=0)
        for c in range(2):
            assert assign_label(model, model.centroids[c]) == c

    def test_midpoint_takes_lower_index(self):
        m = FeatureMatrix(
            np.array([[0.0], [0.0], [10.0], [10.0]]),
            ("a", "b", "c", "d"),
            ("f",),
            np.ones(1),
        )
        model = kmeans_fit(m, 2, seed=0)
        mid = model.centroids.mean(axis=0)
        assert assign_label(model, mid) == 0

    def test_training_rows_keep_their_labels(self):
        m = blobs(np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]]), 8, 0.4, 7)
        model = kmeans_fit(m, 3, seed=1)
        relabeled = [assign_label(model, row) for row in m.values]
        assert np.array_equal(relabeled, model.labels)

    def test_relabeled_model_keeps_partition_and_inertia(self):
        m = blobs(np.array([[0.0, 0.0], [10.0, 0.0]]), 10, 0.5, 8)
        model = kmeans_fit(m, 2, seed=0)
        from civicbudget.cluster import ClusterModel

        flipped = ClusterModel(
            k=2,
            centroids=model.centroids[::-1].copy(),
            labels=1 - model.labels,
            inertia=model.inertia,
            seed=model.seed,
            restarts=model.restarts,
            columns=model.columns,
            scales=model.scales,
        )
        orig = [assign_label(model, row) for row in m.values]
        flip = [assign_label(flipped, row) for row in m.values]
        assert np.array_equal(np.array(flip), 1 - np.array(orig))
        d2 = ((m.values[:, None, :] - flipped.centroids[None, :, :]) ** 2).sum(axis=2)
        assert float(d2.min(axis=1).sum()) == pytest.approx(model.inertia)


class TestBootstrapStability:
    def test_separated_blobs_fully_stable(self):
        m = blobs(np.array([[0.0, 0.0], [15.0, 0.0], [0.0, 15.0]]), 15, 0.5, 0)
        report = bootstrap_stability(m, 3, resamples=20, seed=0, restarts=4)
        assert report.accuracy == 1.0
        assert report.dropped == 0

    def test_report_reproducible(self):
        m = blobs(np.array([[0.0], [4.0]]), 12, 1.0, 6)
        a = bootstrap_stability(m, 2, resamples=5, seed=3, restarts=3)
        b = bootstrap_stability(m, 2, resamples=5, seed=3, restarts=3)
        assert a.accuracy == b.accuracy
        assert np.array_equal(a.centroid_ci, b.centroid_ci)

    def test_overlapping_blobs_not_fully_stable(self):
        m = blobs(np.array([[0.0], [1.0]]), 40, 1.0, 10)
        report = bootstrap_stability(m, 2, resamples=20, seed=0, restarts=4)
        assert 0.0 <= report.accuracy < 1.0

    def test_ci_ordered(self):
        m = blobs(np.array([[0.0, 0.0], [6.0, 6.0]]), 20, 1.0, 1)
        report = bootstrap_stability(m, 2, resamples=10, seed=0, restarts=3)
        lo = report.centroid_ci[..., 0]
        hi = report.centroid_ci[..., 1]
        assert np.all(lo <= hi)

    def test_too_few_resamples_rejected(self):
        m = blobs(np.array([[0.0], [5.0]]), 5, 0.5, 2)
        with pytest.raises(ValueError):
            bootstrap_stability(m, 2, resamples=1)


class TestGapStatistic:
    def test_chosen_k_satisfies_the_rule(self):
        m = blobs(np.array([[0.0, 0.0], [8.0, 0.0], [0.0, 8.0]]), 25, 1.0, 0)
        curve = gap_statistic(m, 6, reference_draws=8, seed=2, restarts=3)
        gaps, errs, ks = curve.gaps, curve.errors, curve.ks
        expected = ks[-1]
        for i in range(len(ks) - 1):
            if gaps[i] >= gaps[i + 1] - errs[i + 1]:
                expected = ks[i]
                break
        assert curve.chosen_k == expected

    def test_reference_recorded(self):
        m = blobs(np.array([[0.0], [9.0]]), 10, 0.5, 4)
        curve = gap_statistic(m, 3, reference_draws=4, seed=0, restarts=2)
        assert curve.reference == "uniform-bounding-box"
        assert curve.reference_draws == 4
        assert len(curve.gaps) == len(curve.ks) == len(curve.errors) == 3

    def test_single_blob_chooses_one(self):
        m = blobs(np.array([[0.0, 0.0]]), 60, 1.0, 5)
        curve = gap_statistic(m, 5, reference_draws=8, seed=1, restarts=3)
        assert curve.chosen_k == 1

    def test_too_many_ks_for_rows_raises(self):
        m = blobs(np.array([[0.0]]), 3, 0.5, 0)
        with pytest.raises(DataError):
            gap_statistic(m, 10, reference_draws=3, seed=0)


class TestModelRoundTrip:
    def test_saved_model_reassigns_identically(self, tmp_path):
        m = blobs(np.array([[0.0, 1.0], [5.0, -2.0], [9.0, 9.0]]), 10, 0.7, 12)
        model = kmeans_fit(m, 3, seed=5)
        path = tmp_path / "model.tsv"
        save_model(model, str(path))
        back = load_model(str(path))
        assert back.k == model.k
        assert back.columns == model.columns
        assert np.array_equal(back.centroids, model.centroids)
        assert np.array_equal(back.labels, model.labels)
        assert back.inertia == model.inertia
        for row in m.values:
            assert assign_label(back, row) == assign_label(model, row)

    def test_wrong_header_rejected(self, tmp_path):
        path = tmp_path / "bogus.tsv"
        path.write_text("something else\n")
        with pytest.raises(DataError):
            load_model(str(path))

"""Tests for arrival-order diagnostics: completion curves, null bands, excursions."""

import math
from datetime import datetime, timezone

import numpy as np
import pytest

from civicbudget.errors import DataError
from civicbudget.progression import (
    BandSpec,
    Excursion,
    ProgressionSeries,
    bands_for,
    cumulative_cluster_fraction,
    daily_cluster_proportions,
    hypergeometric_bands,
    scan_excursions,
)


def ts(day, hour=12):
    return datetime(2020, 5, day, hour, tzinfo=timezone.utc)


class TestCumulativeClusterFraction:
    def test_two_cluster_example(self):
        series = cumulative_cluster_fraction(["A", "A", "B", "B"])
        assert series.total == 4
        assert series.cluster_ids == ("A", "B")
        assert series.sizes == (2, 2)
        a = series.series[series.index_of("A")]
        b = series.series[series.index_of("B")]
        assert np.allclose(a, [0.5, 1.0, 1.0, 1.0])
        assert np.allclose(b, [0.0, 0.0, 0.5, 1.0])

    def test_single_cluster_is_linear(self):
        series = cumulative_cluster_fraction(["x"] * 5)
        assert series.cluster_ids == ("x",)
        assert np.allclose(series.series[0], np.arange(1, 6) / 5)

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            cumulative_cluster_fraction([])

    def test_counting_identity(self):
        # sum_c C_c * series_c(n) counts every vote seen so far, so it is n
        rng = np.random.default_rng(7)
        labels = rng.choice(["a", "b", "c"], size=120).tolist()
        series = cumulative_cluster_fraction(labels)
        sizes = np.array(series.sizes, dtype=float)
        totals = sizes @ series.series
        assert np.allclose(totals, np.arange(1, 121), atol=1e-9)

    def test_every_curve_ends_at_one(self):
        rng = np.random.default_rng(11)
        labels = rng.choice([0, 1, 2, 3], size=57).tolist()
        series = cumulative_cluster_fraction(labels)
        assert np.allclose(series.series[:, -1], 1.0)
        # curves are nondecreasing in arrival position
        assert np.all(np.diff(series.series, axis=1) >= -1e-12)


class TestHypergeometricBands:
    def test_reference_value_even_split(self):
        bands = hypergeometric_bands(100, {"A": 50, "B": 50})
        # sqrt(50 * 0.25 * 50/99) / 50
        expected = math.sqrt(50 * 0.25 * 50 / 99) / 50
        assert bands.sigma[0, 49] == pytest.approx(expected, rel=1e-12)
        assert bands.sigma[0, 49] == pytest.approx(0.0503, abs=5e-5)
        assert bands.mean[49] == pytest.approx(0.5)

    def test_sigma_zero_at_full_count(self):
        bands = hypergeometric_bands(40, (25, 15))
        assert np.all(bands.sigma[:, -1] == 0.0)
        assert bands.mean[-1] == pytest.approx(1.0)

    def test_count_sigma_symmetric_in_n(self):
        # the count drawn in the first n and the count left for the last
        # N - n have the same spread
        bands = hypergeometric_bands(100, {"A": 30, "B": 70})
        count_sigma = bands.sigma * np.array(bands.sizes, dtype=float)[:, None]
        head = count_sigma[:, :-1]  # positions 1..N-1
        assert np.allclose(head, head[:, ::-1], atol=1e-12)

    def test_matches_monte_carlo_shuffles(self):
        # 1e5 label shuffles, vectorized: empirical sd of the completion
        # curve at each position must match the closed form
        total, size = 60, 20
        base = np.array([1] * size + [0] * (total - size))
        rng = np.random.default_rng(42)
        perms = rng.permuted(np.tile(base, (100_000, 1)), axis=1)
        fractions = np.cumsum(perms, axis=1) / size
        bands = hypergeometric_bands(total, {0: total - size, 1: size})
        row = bands.cluster_ids.index(1)
        emp_sigma = fractions.std(axis=0, ddof=0)
        assert np.allclose(emp_sigma[:-1], bands.sigma[row, :-1], rtol=0.02, atol=1e-4)
        emp_mean = fractions.mean(axis=0)
        # 4 se because all 59 positions are checked simultaneously
        tol = 4.0 * bands.sigma[row] / math.sqrt(100_000) + 1e-12
        assert np.all(np.abs(emp_mean - bands.mean) <= tol)

    def test_sequence_sizes_get_integer_ids(self):
        bands = hypergeometric_bands(10, (4, 6))
        assert bands.cluster_ids == (0, 1)
        assert bands.sizes == (4, 6)

    def test_size_mismatch_rejected(self):
        with pytest.raises(DataError, match="sum"):
            hypergeometric_bands(10, (4, 5))

    def test_nonpositive_inputs_rejected(self):
        with pytest.raises(DataError):
            hypergeometric_bands(0, ())
        with pytest.raises(DataError):
            hypergeometric_bands(5, (5, 0))

    def test_bands_for_matches_series(self):
        labels = ["a", "b", "a", "a", "b", "a"]
        series = cumulative_cluster_fraction(labels)
        bands = bands_for(series)
        direct = hypergeometric_bands(6, {"a": 4, "b": 2})
        assert bands.cluster_ids == direct.cluster_ids
        assert bands.sizes == direct.sizes
        assert np.array_equal(bands.sigma, direct.sigma)


class TestScanExcursions:
    def test_interleaved_arrivals_stay_in_band(self):
        labels = ["A", "B"] * 20
        series = cumulative_cluster_fraction(labels)
        report = scan_excursions(series, bands_for(series))
        assert report.out_of_band_positions(2.0) == 0
        assert report.max_z < 1.2

    def test_front_loaded_cluster_breaks_two_sigma(self):
        series = cumulative_cluster_fraction(list("AAAABBBB"))
        report = scan_excursions(series, bands_for(series))
        assert report.max_z == pytest.approx(math.sqrt(7.0), rel=1e-12)
        # both curves deviate symmetrically over positions 3..5
        assert report.intervals["A"][2.0] == (Excursion(3, 5),)
        assert report.intervals["B"][2.0] == (Excursion(3, 5),)
        assert report.out_of_band_positions(2.0) == 6

    def test_relabeling_preserves_geometry(self):
        rng = np.random.default_rng(3)
        labels = rng.choice(["A", "B", "C"], size=200).tolist()
        renamed = [{"A": "x", "B": "y", "C": "z"}[v] for v in labels]
        s1 = cumulative_cluster_fraction(labels)
        s2 = cumulative_cluster_fraction(renamed)
        r1 = scan_excursions(s1, bands_for(s1))
        r2 = scan_excursions(s2, bands_for(s2))
        assert r1.max_z == pytest.approx(r2.max_z, rel=1e-12)
        for old, new in (("A", "x"), ("B", "y"), ("C", "z")):
            assert r1.intervals[old] == r2.intervals[new]

    def test_intervals_are_ordered_and_disjoint(self):
        rng = np.random.default_rng(19)
        labels = rng.choice(["a", "b"], size=300, p=[0.3, 0.7]).tolist()
        series = cumulative_cluster_fraction(labels)
        report = scan_excursions(series, bands_for(series), z_levels=(0.5, 1.0, 2.0))
        for by_z in report.intervals.values():
            for excursions in by_z.values():
                last_end = 0
                for exc in excursions:
                    assert 1 <= exc.start <= exc.end <= 300
                    assert exc.start > last_end
                    last_end = exc.end

    def test_shuffle_mean_matches_band_mean(self):
        # at any fixed position the shuffled curve averages to n/N
        labels = ["a"] * 30 + ["b"] * 70
        bands = hypergeometric_bands(100, {"a": 30, "b": 70})
        rng = np.random.default_rng(23)
        position = 40  # 1-based
        draws = np.empty(1000)
        for i in range(1000):
            rng.shuffle(labels)
            series = cumulative_cluster_fraction(labels)
            draws[i] = series.series[series.index_of("a"), position - 1]
        se = bands.sigma[0, position - 1] / math.sqrt(1000)
        assert abs(draws.mean() - bands.mean[position - 1]) <= 3 * se

    def test_nonzero_final_deviation_is_infinite_z(self):
        # sigma is exactly 0 at n = N, so any curve not ending at 1 is
        # infinitely surprising there
        doctored = ProgressionSeries(
            total=4,
            cluster_ids=("a", "b"),
            sizes=(2, 2),
            series=np.array([[0.5, 0.5, 1.0, 0.9], [0.0, 0.5, 0.5, 1.0]]),
        )
        bands = hypergeometric_bands(4, {"a": 2, "b": 2})
        report = scan_excursions(doctored, bands)
        assert report.max_z == math.inf
        last = report.intervals["a"][2.0][-1]
        assert last.end == 4

    def test_mismatched_inputs_rejected(self):
        series = cumulative_cluster_fraction(["A", "B", "A", "B"])
        with pytest.raises(ValueError):
            scan_excursions(series, hypergeometric_bands(6, {"A": 3, "B": 3}))
        with pytest.raises(ValueError):
            scan_excursions(series, hypergeometric_bands(4, {"A": 2, "C": 2}))


class TestDailyProportions:
    def test_two_day_split(self):
        stamps = [ts(10), ts(10, 15), ts(11)]
        daily = daily_cluster_proportions(stamps, ["A", "B", "A"])
        assert daily.days == (ts(10).date(), ts(11).date())
        assert daily.cluster_ids == ("A", "B")
        assert np.allclose(daily.proportions[0], [0.5, 0.5])
        assert np.allclose(daily.proportions[1], [1.0, 0.0])
        assert daily.counts.tolist() == [2, 1]

    def test_days_sorted_even_when_input_is_not(self):
        stamps = [ts(12), ts(10), ts(11)]
        daily = daily_cluster_proportions(stamps, ["A", "A", "B"])
        assert daily.days == (ts(10).date(), ts(11).date(), ts(12).date())

    def test_single_response_day(self):
        daily = daily_cluster_proportions([ts(9)], ["only"])
        assert daily.proportions[0, 0] == 1.0
        assert daily.counts[0] == 1

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(5)
        stamps = [ts(int(d)) for d in rng.integers(1, 28, size=80)]
        labels = rng.choice(["a", "b", "c"], size=80).tolist()
        daily = daily_cluster_proportions(stamps, labels)
        assert np.allclose(daily.proportions.sum(axis=1), 1.0)
        assert daily.counts.sum() == 80

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            daily_cluster_proportions([ts(1)], ["a", "b"])

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            daily_cluster_proportions([], [])

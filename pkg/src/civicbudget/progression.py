"""Arrival-order diagnostics for cluster composition.

If arrival order is unrelated to opinion cluster, the running fraction of
each cluster among the first n votes behaves like sampling without
replacement from the final label multiset: its mean is the cluster's final
share and its standard deviation has the closed hypergeometric form used
here. Sustained departures beyond a z-sigma band flag turnout shocks such as
a mobilization wave.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime
from typing import Hashable, Mapping, Sequence

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class ProgressionSeries:
    """Running cluster fractions by arrival position.

    ``series[c, i]`` is (votes for cluster c among the first i+1) divided by
    the cluster's final count, for positions n = 1..N. With that scaling each
    curve starts near 0 and ends exactly at 1.
    """

    total: int
    cluster_ids: tuple[Hashable, ...]
    sizes: tuple[int, ...]
    series: np.ndarray  # (clusters, N)

    def __post_init__(self) -> None:
        object.__setattr__(self, "series", np.asarray(self.series, dtype=float))

    def index_of(self, cluster_id: Hashable) -> int:
        return self.cluster_ids.index(cluster_id)


def cumulative_cluster_fraction(labels: Sequence[Hashable]) -> ProgressionSeries:
    """Per-cluster completion curves from labels in arrival order."""
    labels = list(labels)
    if not labels:
        raise DataError("no labels")
    n = len(labels)
    ids = tuple(sorted(set(labels), key=lambda x: (str(type(x)), x)))
    sizes = tuple(sum(1 for v in labels if v == c) for c in ids)
    series = np.zeros((len(ids), n))
    counts = {c: 0 for c in ids}
    for i, lab in enumerate(labels):
        counts[lab] += 1
        for ci, c in enumerate(ids):
            series[ci, i] = counts[c] / sizes[ci]
    return ProgressionSeries(n, ids, sizes, series)


@dataclass(frozen=True)
class BandSpec:
    """Null mean and sigma of the completion curves at each position.

    Under an arrival order exchangeable with respect to labels, the count of
    cluster c among the first n votes is hypergeometric; dividing by the
    final count C gives mean n/N and

        sigma_c(n) = sqrt(n * p * (1 - p) * (N - n) / (N - 1)) / C,
        p = C / N.

    Sigma is exactly 0 at n = N (and would be at n = 0).
    """

    total: int
    cluster_ids: tuple[Hashable, ...]
    sizes: tuple[int, ...]
    mean: np.ndarray  # (N,)
    sigma: np.ndarray  # (clusters, N)

    def __post_init__(self) -> None:
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "sigma", np.asarray(self.sigma, dtype=float))


def hypergeometric_bands(
    total: int, cluster_sizes: Mapping[Hashable, int] | Sequence[int]
) -> BandSpec:
    """Exact null bands for completion curves."""
    if isinstance(cluster_sizes, Mapping):
        ids = tuple(sorted(cluster_sizes, key=lambda x: (str(type(x)), x)))
        sizes = tuple(int(cluster_sizes[c]) for c in ids)
    else:
        sizes = tuple(int(s) for s in cluster_sizes)
        ids = tuple(range(len(sizes)))
    if total <= 0:
        raise DataError("total must be positive")
    if any(s <= 0 for s in sizes):
        raise DataError("cluster sizes must be positive")
    if sum(sizes) != total:
        raise DataError(f"cluster sizes sum to {sum(sizes)}, total is {total}")
    n = np.arange(1, total + 1, dtype=float)
    mean = n / total
    sigma = np.empty((len(sizes), total))
    if total == 1:
        sigma[:] = 0.0
    else:
        fpc = (total - n) / (total - 1)
        for ci, size in enumerate(sizes):
            p = size / total
            var_count = n * p * (1.0 - p) * fpc
            sigma[ci] = np.sqrt(var_count) / size
    return BandSpec(total, ids, sizes, mean, sigma)


def bands_for(series: ProgressionSeries) -> BandSpec:
    return hypergeometric_bands(series.total, dict(zip(series.cluster_ids, series.sizes)))


@dataclass(frozen=True)
class Excursion:
    """Maximal run of consecutive out-of-band positions, 1-based inclusive."""

    start: int
    end: int

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class ExcursionReport:
    z_levels: tuple[float, ...]
    intervals: Mapping[Hashable, Mapping[float, tuple[Excursion, ...]]]
    max_z: float

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "intervals",
            {c: dict(by_z) for c, by_z in self.intervals.items()},
        )

    def out_of_band_positions(self, z: float) -> int:
        """Total positions outside the z band, summed over clusters."""
        return sum(
            exc.length
            for by_z in self.intervals.values()
            for exc in by_z.get(z, ())
        )


def _runs(mask: np.ndarray) -> tuple[Excursion, ...]:
    out: list[Excursion] = []
    start = None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            out.append(Excursion(start + 1, i))
            start = None
    if start is not None:
        out.append(Excursion(start + 1, len(mask)))
    return tuple(out)


def scan_excursions(
    series: ProgressionSeries,
    bands: BandSpec,
    z_levels: Sequence[float] = (1.0, 2.0),
) -> ExcursionReport:
    """Maximal out-of-band intervals per cluster at each z level.

    A position is out when |fraction - mean| exceeds z * sigma strictly.
    ``max_z`` is the largest standardized deviation over clusters and
    positions with positive sigma.
    """
    if series.total != bands.total:
        raise ValueError("series and bands cover different totals")
    if series.cluster_ids != bands.cluster_ids:
        raise ValueError("series and bands have different cluster sets")
    dev = np.abs(series.series - bands.mean[None, :])
    positive = bands.sigma > 0
    z_ratio = np.where(positive, dev / np.where(positive, bands.sigma, 1.0), 0.0)
    # a deviation where sigma is exactly 0 is itself exactly 0 at n = N;
    # treat any nonzero deviation there as infinitely surprising
    z_ratio = np.where(~positive & (dev > 1e-12), np.inf, z_ratio)
    intervals: dict[Hashable, dict[float, tuple[Excursion, ...]]] = {}
    for ci, c in enumerate(series.cluster_ids):
        by_z: dict[float, tuple[Excursion, ...]] = {}
        for z in z_levels:
            by_z[float(z)] = _runs(z_ratio[ci] > z)
        intervals[c] = by_z
    return ExcursionReport(
        z_levels=tuple(float(z) for z in z_levels),
        intervals=intervals,
        max_z=float(z_ratio.max()),
    )


@dataclass(frozen=True)
class DailyProportions:
    days: tuple[date, ...]
    cluster_ids: tuple[Hashable, ...]
    proportions: np.ndarray  # (days, clusters)
    counts: np.ndarray  # (days,) responses per day

    def __post_init__(self) -> None:
        object.__setattr__(self, "proportions", np.asarray(self.proportions, dtype=float))
        object.__setattr__(self, "counts", np.asarray(self.counts, dtype=np.int64))


def daily_cluster_proportions(
    timestamps: Sequence[datetime], labels: Sequence[Hashable]
) -> DailyProportions:
    """Cluster shares per calendar day; days without responses are omitted."""
    if len(timestamps) != len(labels):
        raise ValueError("timestamps and labels differ in length")
    if not labels:
        raise DataError("no labels")
    ids = tuple(sorted(set(labels), key=lambda x: (str(type(x)), x)))
    by_day: dict[date, list[Hashable]] = {}
    for ts, lab in zip(timestamps, labels):
        by_day.setdefault(ts.date(), []).append(lab)
    days = tuple(sorted(by_day))
    props = np.zeros((len(days), len(ids)))
    counts = np.zeros(len(days), dtype=np.int64)
    for di, day in enumerate(days):
        todays = by_day[day]
        counts[di] = len(todays)
        for ci, c in enumerate(ids):
            props[di, ci] = sum(1 for v in todays if v == c) / len(todays)
    return DailyProportions(days, ids, props, counts)

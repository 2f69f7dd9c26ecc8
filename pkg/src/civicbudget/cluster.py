"""Opinion clustering: normalization, k-means, stability, cluster count.

The fit is a hand-rolled Lloyd's algorithm with k-means++ seeding and
best-of-restarts reduction because its determinism contract is load-bearing:
for a fixed (seed, restarts) the fitted model is bit-for-bit reproducible,
replicate r derives its RNG from spawn index r, the best replicate is chosen
by lowest inertia with replicate index breaking ties, and an emptied cluster
is reseeded to the point farthest from its centroid. Within one replicate
the inertia sequence never increases.

Stability is measured by refitting bootstrap resamples and aligning each
refit's centroids to the reference by minimal-cost matching; the cluster
count is chosen by comparing the inertia curve against uniform reference
draws over the data's bounding box.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DataError

_CONVERGENCE_TOL = 1e-10
_MAX_ITER = 300


@dataclass(frozen=True)
class FeatureMatrix:
    """Numeric respondent-by-question matrix with its scaling metadata.

    ``values`` holds the (possibly normalized) features, ``scales`` the
    per-column divisor applied to raw values (1.0 when untouched), and
    ``dropped`` any zero-variance columns removed during normalization.
    """

    values: np.ndarray
    rows: tuple[str, ...]
    columns: tuple[str, ...]
    scales: np.ndarray
    dropped: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "scales", np.asarray(self.scales, dtype=float))
        if values.ndim != 2:
            raise ValueError("feature values must be 2-d")
        if len(self.rows) != values.shape[0]:
            raise ValueError("row labels do not match matrix height")
        if len(self.columns) != values.shape[1]:
            raise ValueError("column labels do not match matrix width")

    @property
    def n(self) -> int:
        return self.values.shape[0]


def normalize_features(
    raw: np.ndarray,
    rows: Sequence[str] | None = None,
    columns: Sequence[str] | None = None,
) -> FeatureMatrix:
    """Divide each column by its sample standard deviation (ddof=1).

    Columns with zero variance carry no distance information and are dropped,
    recorded by name. A matrix with every column constant is an error.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2 or raw.shape[0] == 0:
        raise DataError("normalization requires a nonempty 2-d matrix")
    n, m = raw.shape
    row_ids = tuple(rows) if rows is not None else tuple(f"r{i}" for i in range(n))
    col_ids = tuple(columns) if columns is not None else tuple(f"q{j}" for j in range(m))
    if n > 1:
        stds = raw.std(axis=0, ddof=1)
    else:
        stds = np.zeros(m)
    keep = stds > 0
    if not keep.any():
        raise DataError("every feature column is constant")
    dropped = tuple(c for c, k in zip(col_ids, keep) if not k)
    kept_cols = tuple(c for c, k in zip(col_ids, keep) if k)
    scales = stds[keep]
    return FeatureMatrix(raw[:, keep] / scales, row_ids, kept_cols, scales, dropped)


@dataclass(frozen=True)
class ClusterModel:
    k: int
    centroids: np.ndarray  # (k, m), in normalized feature space
    labels: np.ndarray  # (n,)
    inertia: float
    seed: int
    restarts: int
    columns: tuple[str, ...]
    scales: np.ndarray  # per-column divisors, for de-normalization

    def __post_init__(self) -> None:
        object.__setattr__(self, "centroids", np.asarray(self.centroids, dtype=float))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))
        object.__setattr__(self, "scales", np.asarray(self.scales, dtype=float))

    def denormalized_centroids(self) -> np.ndarray:
        return self.centroids * self.scales


def _plus_plus_init(values: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: spread initial centers by squared-distance sampling."""
    n = values.shape[0]
    centers = np.empty((k, values.shape[1]))
    first = int(rng.integers(n))
    centers[0] = values[first]
    closest = np.sum((values - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = closest.sum()
        if total <= 0:
            # all remaining points coincide with a chosen center
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=closest / total))
        centers[c] = values[idx]
        closest = np.minimum(closest, np.sum((values - centers[c]) ** 2, axis=1))
    return centers


def _assign(values: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = ((values[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)  # first minimum wins: lowest cluster index
    return labels, d2[np.arange(values.shape[0]), labels]


def _lloyd(
    values: np.ndarray, k: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, float, list[float]]:
    """One replicate: returns (centers, labels, inertia, inertia history)."""
    centers = _plus_plus_init(values, k, rng)
    history: list[float] = []
    labels = np.zeros(values.shape[0], dtype=np.int64)
    for _ in range(_MAX_ITER):
        labels, d2 = _assign(values, centers)
        inertia = float(d2.sum())
        history.append(inertia)
        new_centers = centers.copy()
        for c in range(k):
            members = values[labels == c]
            if len(members) == 0:
                # reseed an emptied cluster to the farthest point
                far = int(np.argmax(d2))
                new_centers[c] = values[far]
                d2 = d2.copy()
                d2[far] = 0.0
            else:
                new_centers[c] = members.mean(axis=0)
        if np.allclose(new_centers, centers, atol=_CONVERGENCE_TOL, rtol=0.0):
            break
        centers = new_centers
    labels, d2 = _assign(values, centers)
    inertia = float(d2.sum())
    history.append(inertia)
    return centers, labels, inertia, history


def kmeans_fit(
    matrix: FeatureMatrix,
    k: int,
    seed: int = 0,
    restarts: int = 10,
) -> ClusterModel:
    """Best-of-restarts k-means on a feature matrix.

    Deterministic for fixed (seed, restarts): replicate r uses the r-th
    spawn of the seed sequence and the winner is the lowest inertia, with
    the earlier replicate winning exact ties.
    """
    values = matrix.values
    if k < 1:
        raise ValueError("k must be >= 1")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    distinct = np.unique(values, axis=0).shape[0]
    if distinct < k:
        raise DataError(f"only {distinct} distinct rows for k={k}")
    streams = np.random.SeedSequence(seed).spawn(restarts)
    best: tuple[float, int] | None = None
    best_fit: tuple[np.ndarray, np.ndarray, float] | None = None
    for r, stream in enumerate(streams):
        centers, labels, inertia, _ = _lloyd(values, k, np.random.default_rng(stream))
        if best is None or inertia < best[0]:
            best = (inertia, r)
            best_fit = (centers, labels, inertia)
    assert best_fit is not None
    centers, labels, inertia = best_fit
    return ClusterModel(
        k=k,
        centroids=centers,
        labels=labels,
        inertia=inertia,
        seed=seed,
        restarts=restarts,
        columns=matrix.columns,
        scales=matrix.scales,
    )


def assign_label(model: ClusterModel, vector: np.ndarray) -> int:
    """Nearest-centroid label for one normalized feature vector."""
    vec = np.asarray(vector, dtype=float)
    if vec.shape != (model.centroids.shape[1],):
        raise ValueError(
            f"vector length {vec.shape} does not match model width {model.centroids.shape[1]}"
        )
    d2 = ((model.centroids - vec) ** 2).sum(axis=1)
    return int(np.argmin(d2))


@dataclass(frozen=True)
class BootstrapReport:
    """Label stability under resampling.

    ``accuracy`` is the mean fraction of original rows that keep their
    reference label when reassigned by a bootstrap refit (after centroid
    alignment); ``centroid_ci`` holds the per-coordinate 2.5th and 97.5th
    percentiles of the aligned centroids, shaped (k, m, 2).
    """

    accuracy: float
    centroid_ci: np.ndarray
    resamples: int
    dropped: int


def _align(reference: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Permute ``centers`` rows to minimize total distance to the reference."""
    cost = ((reference[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    rows, cols = linear_sum_assignment(cost)
    aligned = np.empty_like(centers)
    aligned[rows] = centers[cols]
    return aligned


def bootstrap_stability(
    matrix: FeatureMatrix,
    k: int,
    resamples: int = 100,
    seed: int = 0,
    restarts: int = 10,
) -> BootstrapReport:
    """Refit on bootstrap resamples and measure label agreement.

    Resamples with fewer than k distinct rows cannot support a k-way fit;
    they are dropped and counted.
    """
    if resamples < 2:
        raise ValueError("need at least 2 resamples")
    reference = kmeans_fit(matrix, k, seed=seed, restarts=restarts)
    values = matrix.values
    n = values.shape[0]
    root = np.random.SeedSequence(seed).spawn(resamples + 1)
    accuracies: list[float] = []
    aligned_centroids: list[np.ndarray] = []
    dropped = 0
    for b in range(resamples):
        rng = np.random.default_rng(root[b + 1])
        idx = rng.integers(0, n, size=n)
        sample = values[idx]
        if np.unique(sample, axis=0).shape[0] < k:
            dropped += 1
            continue
        boot = FeatureMatrix(sample, tuple(str(i) for i in idx), matrix.columns, matrix.scales)
        refit = kmeans_fit(boot, k, seed=seed, restarts=restarts)
        centers = _align(reference.centroids, refit.centroids)
        d2 = ((values[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        relabeled = np.argmin(d2, axis=1)
        accuracies.append(float(np.mean(relabeled == reference.labels)))
        aligned_centroids.append(centers)
    if not accuracies:
        raise DataError("every bootstrap resample was degenerate")
    stack = np.stack(aligned_centroids)  # (kept, k, m)
    ci = np.stack(
        [np.percentile(stack, 2.5, axis=0), np.percentile(stack, 97.5, axis=0)],
        axis=-1,
    )
    return BootstrapReport(
        accuracy=float(np.mean(accuracies)),
        centroid_ci=ci,
        resamples=resamples,
        dropped=dropped,
    )


@dataclass(frozen=True)
class GapCurve:
    """Gap statistic across candidate cluster counts.

    Gap(k) compares the fitted log inertia against uniform draws over the
    data's bounding box; ``chosen_k`` is the smallest k whose gap is within
    one reference standard error of the next gap, falling back to the
    largest candidate when no k qualifies.
    """

    ks: tuple[int, ...]
    gaps: tuple[float, ...]
    errors: tuple[float, ...]
    chosen_k: int
    log_inertia: tuple[float, ...]
    reference_draws: int
    reference: str = "uniform-bounding-box"


def _safe_log(w: float) -> float:
    return float(np.log(max(w, 1e-300)))


def gap_statistic(
    matrix: FeatureMatrix,
    k_max: int,
    reference_draws: int = 10,
    seed: int = 0,
    restarts: int = 4,
) -> GapCurve:
    """Tibshirani-style gap curve with a uniform bounding-box reference."""
    values = matrix.values
    n, m = values.shape
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if n < k_max:
        raise DataError(f"need at least k_max={k_max} rows, have {n}")
    if reference_draws < 2:
        raise ValueError("need at least 2 reference draws")
    lo = values.min(axis=0)
    hi = values.max(axis=0)
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    refs = [lo + (hi - lo) * rng.random((n, m)) for _ in range(reference_draws)]

    ks = tuple(range(1, k_max + 1))
    log_w: list[float] = []
    gaps: list[float] = []
    errors: list[float] = []
    for k in ks:
        fit = kmeans_fit(matrix, k, seed=seed, restarts=restarts)
        lw = _safe_log(fit.inertia)
        log_w.append(lw)
        ref_logs = np.empty(reference_draws)
        for b, ref in enumerate(refs):
            ref_matrix = FeatureMatrix(
                ref, matrix.rows, matrix.columns, np.ones(m)
            )
            ref_fit = kmeans_fit(ref_matrix, k, seed=seed + 1 + b, restarts=restarts)
            ref_logs[b] = _safe_log(ref_fit.inertia)
        gaps.append(float(ref_logs.mean() - lw))
        sd = float(ref_logs.std(ddof=0))
        errors.append(sd * float(np.sqrt(1.0 + 1.0 / reference_draws)))

    chosen = k_max
    for i in range(k_max - 1):
        if gaps[i] >= gaps[i + 1] - errors[i + 1]:
            chosen = ks[i]
            break
    return GapCurve(
        ks=ks,
        gaps=tuple(gaps),
        errors=tuple(errors),
        chosen_k=chosen,
        log_inertia=tuple(log_w),
        reference_draws=reference_draws,
    )


def save_model(model: ClusterModel, path: str) -> None:
    """Write a model as tab-separated key/value lines.

    Floats serialize with repr, which round-trips exactly, so a reloaded
    model reproduces assign_label bit for bit.
    """
    lines = [
        "civicbudget-cluster-model\tv1",
        f"k\t{model.k}",
        f"seed\t{model.seed}",
        f"restarts\t{model.restarts}",
        f"inertia\t{model.inertia!r}",
        "columns\t" + ",".join(model.columns),
        "scales\t" + ",".join(repr(float(s)) for s in model.scales),
    ]
    for c in range(model.k):
        row = ",".join(repr(float(x)) for x in model.centroids[c])
        lines.append(f"centroid\t{c}\t{row}")
    lines.append("labels\t" + ",".join(str(int(x)) for x in model.labels))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path: str) -> ClusterModel:
    """Inverse of save_model."""
    fields: dict[str, str] = {}
    centroid_rows: dict[int, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if first != "civicbudget-cluster-model\tv1":
            raise DataError(f"{path}: not a cluster model file")
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            if parts[0] == "centroid":
                centroid_rows[int(parts[1])] = parts[2]
            else:
                fields[parts[0]] = parts[1] if len(parts) > 1 else ""
    try:
        k = int(fields["k"])
        columns = tuple(fields["columns"].split(","))
        scales = np.array([float(x) for x in fields["scales"].split(",")])
        centroids = np.array(
            [[float(x) for x in centroid_rows[c].split(",")] for c in range(k)]
        )
        labels = np.array([int(x) for x in fields["labels"].split(",")]) if fields["labels"] else np.empty(0, dtype=np.int64)
        return ClusterModel(
            k=k,
            centroids=centroids,
            labels=labels,
            inertia=float(fields["inertia"]),
            seed=int(fields["seed"]),
            restarts=int(fields["restarts"]),
            columns=columns,
            scales=scales,
        )
    except (KeyError, ValueError, IndexError) as exc:
        raise DataError(f"{path}: malformed cluster model file ({exc})") from exc

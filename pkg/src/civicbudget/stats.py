"""Follow-up survey statistics and demographic reweighting.

Cross-tabs, chi-square goodness of fit against reference proportions,
Spearman rank correlation on ordinal pairs, and post-stratification weights
that match a sample to published marginals on one demographic axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
from scipy import stats as sps

from .aggregate import Distribution, tally_distribution
from .ballots import UNANSWERED, Question, ResponseRecord, answer_category, answer_value
from .errors import DataError


@dataclass(frozen=True)
class CrossTab:
    """Counts of paired categorical answers in declared category order."""

    row_label: str
    col_label: str
    row_categories: tuple[str, ...]
    col_categories: tuple[str, ...]
    counts: np.ndarray

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", counts)
        if counts.shape != (len(self.row_categories), len(self.col_categories)):
            raise ValueError("counts shape does not match category lists")

    @property
    def n(self) -> int:
        return int(self.counts.sum())


def crosstab(
    pairs: Iterable[tuple[str, str]],
    row_categories: Sequence[str],
    col_categories: Sequence[str],
    row_label: str = "rows",
    col_label: str = "columns",
) -> CrossTab:
    """Tabulate paired answers; categories outside the declared sets error."""
    rows = tuple(row_categories)
    cols = tuple(col_categories)
    row_idx = {c: i for i, c in enumerate(rows)}
    col_idx = {c: i for i, c in enumerate(cols)}
    counts = np.zeros((len(rows), len(cols)), dtype=np.int64)
    n = 0
    for r, c in pairs:
        if r not in row_idx:
            raise DataError(f"unknown row category {r!r}")
        if c not in col_idx:
            raise DataError(f"unknown column category {c!r}")
        counts[row_idx[r], col_idx[c]] += 1
        n += 1
    if n == 0:
        raise DataError("no pairs to tabulate")
    return CrossTab(row_label, col_label, rows, cols, counts)


def expand_crosstab(ct: CrossTab) -> list[tuple[str, str]]:
    """Pairs whose tabulation reproduces the cross-tab exactly."""
    out: list[tuple[str, str]] = []
    for i, r in enumerate(ct.row_categories):
        for j, c in enumerate(ct.col_categories):
            out.extend([(r, c)] * int(ct.counts[i, j]))
    return out


@dataclass(frozen=True)
class GofResult:
    statistic: float
    df: int
    p_value: float
    expected: tuple[float, ...]


def chi_square_gof(
    observed: Sequence[float], reference: Sequence[float]
) -> GofResult:
    """Chi-square goodness of fit of counts against reference proportions.

    The reference is renormalized to sum 1 and scaled to the observed total;
    degrees of freedom are categories minus one.
    """
    obs = np.asarray(observed, dtype=float)
    ref = np.asarray(reference, dtype=float)
    if obs.shape != ref.shape or obs.ndim != 1:
        raise ValueError("observed and reference must be 1-d and equal length")
    if len(obs) < 2:
        raise DataError("need at least two categories")
    if np.any(obs < 0) or np.any(ref < 0):
        raise DataError("negative counts or proportions")
    total = obs.sum()
    if total <= 0:
        raise DataError("observed counts sum to zero")
    ref_total = ref.sum()
    if ref_total <= 0:
        raise DataError("reference proportions sum to zero")
    expected = ref / ref_total * total
    bad = (expected == 0) & (obs > 0)
    if bad.any():
        raise DataError(
            f"reference share is zero where counts are observed (index {int(np.argmax(bad))})"
        )
    live = expected > 0
    statistic = float((((obs - expected) ** 2)[live] / expected[live]).sum())
    df = len(obs) - 1
    p = float(sps.chi2.sf(statistic, df))
    return GofResult(statistic, df, p, tuple(float(e) for e in expected))


@dataclass(frozen=True)
class SpearmanResult:
    rho: float
    p_value: float
    n: int


def spearman_rho(
    ct: CrossTab,
    row_scores: Sequence[float] | None = None,
    col_scores: Sequence[float] | None = None,
) -> SpearmanResult:
    """Spearman rank correlation from a cross-tab of ordinal answers.

    Category scores fix the ordinal orientation; they default to the declared
    category order. The tab expands to one pair per respondent, ranks use
    midranks for ties, and the p-value uses the t approximation with n - 2
    degrees of freedom.
    """
    r_scores = (
        np.arange(len(ct.row_categories), dtype=float)
        if row_scores is None
        else np.asarray(row_scores, dtype=float)
    )
    c_scores = (
        np.arange(len(ct.col_categories), dtype=float)
        if col_scores is None
        else np.asarray(col_scores, dtype=float)
    )
    if r_scores.shape != (len(ct.row_categories),):
        raise ValueError("row scores length mismatch")
    if c_scores.shape != (len(ct.col_categories),):
        raise ValueError("column scores length mismatch")
    xs: list[float] = []
    ys: list[float] = []
    for i in range(len(ct.row_categories)):
        for j in range(len(ct.col_categories)):
            reps = int(ct.counts[i, j])
            xs.extend([float(r_scores[i])] * reps)
            ys.extend([float(c_scores[j])] * reps)
    n = len(xs)
    if n < 3:
        raise DataError("need at least three pairs")
    x = np.asarray(xs)
    y = np.asarray(ys)
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise DataError("an axis is constant; rank correlation undefined")
    rx = sps.rankdata(x)
    ry = sps.rankdata(y)
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    rho = float((rx @ ry) / np.sqrt((rx @ rx) * (ry @ ry)))
    if abs(rho) >= 1.0:
        return SpearmanResult(rho, 0.0, n)
    t = rho * np.sqrt((n - 2) / (1.0 - rho * rho))
    p = float(2.0 * sps.t.sf(abs(t), n - 2))
    return SpearmanResult(rho, p, n)


@dataclass(frozen=True)
class WeightScheme:
    """Per-category post-stratification weights for one demographic axis."""

    axis_id: str
    category_weights: Mapping[str, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "category_weights", dict(self.category_weights))

    def weight_for(self, category: str) -> float:
        try:
            return self.category_weights[category]
        except KeyError:
            raise DataError(
                f"axis {self.axis_id!r}: category {category!r} has no weight"
            ) from None


def poststratification_weights(
    categories: Iterable[str],
    axis_id: str,
    target: Mapping[str, float],
) -> WeightScheme:
    """Weights equal to target share over sample share per category.

    ``categories`` are the answered respondents' categories (UNANSWERED is
    ignored). The target marginal is renormalized to sum 1. With these
    weights the weighted sample marginal equals the target exactly and the
    mean weight over answered respondents is 1.
    """
    answered = [c for c in categories if c != UNANSWERED]
    if not answered:
        raise DataError(f"axis {axis_id!r}: no answered respondents")
    t_total = float(sum(target.values()))
    if t_total <= 0:
        raise DataError(f"axis {axis_id!r}: target marginal sums to zero")
    share = {c: v / t_total for c, v in target.items()}
    counts: dict[str, int] = {}
    for c in answered:
        if c not in share:
            raise DataError(f"axis {axis_id!r}: sample category {c!r} not in target")
        counts[c] = counts.get(c, 0) + 1
    n = len(answered)
    weights: dict[str, float] = {}
    for cat, s in share.items():
        if cat not in counts:
            if s > 0:
                raise DataError(
                    f"axis {axis_id!r}: target category {cat!r} has no respondents"
                )
            continue
        weights[cat] = s / (counts[cat] / n)
    return WeightScheme(axis_id, weights)


def weights_for_records(
    records: Sequence[ResponseRecord], scheme: WeightScheme
) -> tuple[list[ResponseRecord], list[float]]:
    """Respondents answered on the scheme's axis, with their weights."""
    kept: list[ResponseRecord] = []
    weights: list[float] = []
    for rec in records:
        cat = answer_category(rec, scheme.axis_id)
        if cat == UNANSWERED:
            continue
        kept.append(rec)
        weights.append(scheme.weight_for(cat))
    return kept, weights


def weighted_tally(
    records: Sequence[ResponseRecord],
    scheme: WeightScheme,
    question: Question,
) -> Distribution:
    """Answer distribution reweighted to the scheme's target marginal.

    Respondents unanswered on the axis are excluded entirely; respondents
    unanswered on the question are excluded by the tally.
    """
    kept, weights = weights_for_records(records, scheme)
    if not kept:
        raise DataError(f"axis {scheme.axis_id!r}: no answered respondents")
    answers = [answer_value(rec, question) for rec in kept]
    return tally_distribution(answers, question.qid, weights)


def demographic_distribution(
    records: Sequence[ResponseRecord], axis_id: str, weights: Sequence[float] | None = None
) -> Distribution:
    """Share of each demographic category among answered respondents."""
    cats: list[Any] = []
    for rec in records:
        cat = answer_category(rec, axis_id)
        cats.append(None if cat == UNANSWERED else cat)
    return tally_distribution(cats, f"dem:{axis_id}", weights)

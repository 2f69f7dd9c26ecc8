"""Ballot types, constraint validation, ordinal encoding, time segmentation.

Everything monetary is integer cents. An expenditure ballot reallocates a
fixed total across service areas on an increment grid, subject to a per-area
spending floor; a revenue ballot answers a property-tax stance plus one
three-level question per fee category; a five-point ballot answers one
direction question per area on a -2..+2 scale. All types are immutable after
construction and all operations are pure.
"""

from __future__ import annotations

import re
from bisect import bisect_right
from dataclasses import dataclass, field
from datetime import datetime
from enum import IntEnum
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from .errors import DataError

UNANSWERED = "unanswered"

# Wire codes. Ballots store plain ints so out-of-domain values survive long
# enough to be reported as violations instead of blowing up in a constructor.
FIVE_POINT_LEVELS = (-2, -1, 0, 1, 2)
FEE_LEVELS = (0, 1, 2)
TAX_LEVELS = (-1, 0, 1)


class FeeLevel(IntEnum):
    NO_CHANGE = 0
    MODERATE_INCREASE = 1
    SIGNIFICANT_INCREASE = 2


class TaxStance(IntEnum):
    OPPOSE = -1
    NO_OPINION = 0
    SUPPORT = 1


class FivePoint(IntEnum):
    SIGNIFICANT_DECREASE = -2
    MODERATE_DECREASE = -1
    NO_CHANGE = 0
    MODERATE_INCREASE = 1
    SIGNIFICANT_INCREASE = 2


@dataclass(frozen=True)
class ServiceArea:
    area_id: str
    name: str
    baseline: int  # cents

    def __post_init__(self) -> None:
        if self.baseline < 0:
            raise DataError(f"area {self.area_id!r}: baseline must be >= 0")


@dataclass(frozen=True)
class DemographicAxis:
    axis_id: str
    categories: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(set(self.categories)) != len(self.categories):
            raise DataError(f"axis {self.axis_id!r}: duplicate categories")


@dataclass(frozen=True)
class BudgetSpec:
    """Static description of one feedback exercise.

    ``increment`` is the grid step in cents; every expenditure delta must be
    a multiple of it. ``floor_fraction`` bounds cuts: an allocation may not
    drop below (1 - floor_fraction) * baseline, evaluated on raw currency.
    """

    areas: tuple[ServiceArea, ...]
    increment: int
    floor_fraction: float
    fee_categories: tuple[str, ...] = ()
    demographic_axes: tuple[DemographicAxis, ...] = ()

    def __post_init__(self) -> None:
        if not self.areas:
            raise DataError("spec has no service areas")
        ids = [a.area_id for a in self.areas]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate area ids")
        if self.increment <= 0:
            raise DataError("increment must be positive")
        if not 0.0 <= self.floor_fraction < 1.0:
            raise DataError("floor_fraction must be in [0, 1)")
        if len(set(self.fee_categories)) != len(self.fee_categories):
            raise DataError("duplicate fee categories")

    @property
    def total(self) -> int:
        return sum(a.baseline for a in self.areas)

    @property
    def area_ids(self) -> tuple[str, ...]:
        return tuple(a.area_id for a in self.areas)

    def area(self, area_id: str) -> ServiceArea:
        for a in self.areas:
            if a.area_id == area_id:
                return a
        raise KeyError(area_id)

    def axis(self, axis_id: str) -> DemographicAxis:
        for ax in self.demographic_axes:
            if ax.axis_id == axis_id:
                return ax
        raise KeyError(axis_id)

    def floor_threshold(self, area: ServiceArea) -> Fraction:
        # Exact rational floor: str() round-trips the float literal so a
        # JSON "0.05" becomes Fraction(1, 20), not a binary approximation.
        return area.baseline * (1 - Fraction(str(self.floor_fraction)))


@dataclass(frozen=True)
class ExpenditureBallot:
    """Proposed allocation in cents per area id."""

    allocation: Mapping[str, int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "allocation", dict(self.allocation))


@dataclass(frozen=True)
class LikertBallot:
    """Five-point direction answer per area id, codes -2..+2."""

    levels: Mapping[str, int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "levels", dict(self.levels))


@dataclass(frozen=True)
class RevenueBallot:
    """Property-tax stance (-1/0/1) plus a 0/1/2 level per fee category."""

    property_tax: int
    fee_levels: Mapping[str, int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "fee_levels", dict(self.fee_levels))


@dataclass(frozen=True)
class ResponseRecord:
    """One respondent's submission.

    ``demographics`` maps axis id to a category or UNANSWERED. Raw intake may
    carry free-text values; the anonymizer coerces anything outside the
    axis's declared set to UNANSWERED.
    """

    respondent_id: str
    timestamp: datetime
    expenditure: ExpenditureBallot | LikertBallot | None = None
    revenue: RevenueBallot | None = None
    demographics: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "demographics", dict(self.demographics))


@dataclass(frozen=True)
class Violation:
    constraint: str  # "balance" | "grid" | "floor" | "coverage"
    area_id: str | None
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def valid(self) -> bool:
        return not self.violations

    def constraints(self) -> set[str]:
        return {v.constraint for v in self.violations}


def validate_expenditure(spec: BudgetSpec, ballot: ExpenditureBallot) -> ValidationReport:
    """Check balance, grid, floor, and coverage; report every failure.

    Balance: allocations sum exactly to the spec total. Grid: each delta from
    baseline is a multiple of the increment. Floor: each allocation is at
    least (1 - floor_fraction) * baseline. Coverage: exactly the spec's areas
    are answered.
    """
    violations: list[Violation] = []
    known = set(spec.area_ids)
    for aid in ballot.allocation:
        if aid not in known:
            violations.append(Violation("coverage", aid, f"unknown area {aid!r}"))
    for aid in spec.area_ids:
        if aid not in ballot.allocation:
            violations.append(Violation("coverage", aid, f"area {aid!r} not allocated"))

    total = sum(v for k, v in ballot.allocation.items() if k in known)
    if not any(v.constraint == "coverage" for v in violations) and total != spec.total:
        violations.append(
            Violation(
                "balance",
                None,
                f"allocations sum to {total}, spec total is {spec.total}",
            )
        )

    for area in spec.areas:
        if area.area_id not in ballot.allocation:
            continue
        alloc = ballot.allocation[area.area_id]
        delta = alloc - area.baseline
        if delta % spec.increment != 0:
            violations.append(
                Violation(
                    "grid",
                    area.area_id,
                    f"delta {delta} is not a multiple of {spec.increment}",
                )
            )
        if alloc < spec.floor_threshold(area):
            violations.append(
                Violation(
                    "floor",
                    area.area_id,
                    f"allocation {alloc} below floor "
                    f"{float(spec.floor_threshold(area)):.0f}",
                )
            )
    return ValidationReport(tuple(violations))


def validate_survey(
    spec: BudgetSpec,
    revenue: RevenueBallot | None = None,
    likert: LikertBallot | None = None,
) -> ValidationReport:
    """Check domain and coverage for revenue and five-point ballots."""
    violations: list[Violation] = []
    if revenue is not None:
        if revenue.property_tax not in TAX_LEVELS:
            violations.append(
                Violation("coverage", None, f"tax stance {revenue.property_tax!r} not in {TAX_LEVELS}")
            )
        known = set(spec.fee_categories)
        for cat in revenue.fee_levels:
            if cat not in known:
                violations.append(Violation("coverage", cat, f"unknown fee category {cat!r}"))
        for cat in spec.fee_categories:
            if cat not in revenue.fee_levels:
                violations.append(Violation("coverage", cat, f"fee category {cat!r} unanswered"))
            elif revenue.fee_levels[cat] not in FEE_LEVELS:
                violations.append(
                    Violation("coverage", cat, f"fee level {revenue.fee_levels[cat]!r} not in {FEE_LEVELS}")
                )
    if likert is not None:
        known = set(spec.area_ids)
        for aid in likert.levels:
            if aid not in known:
                violations.append(Violation("coverage", aid, f"unknown area {aid!r}"))
        for aid in spec.area_ids:
            if aid not in likert.levels:
                violations.append(Violation("coverage", aid, f"area {aid!r} unanswered"))
            elif likert.levels[aid] not in FIVE_POINT_LEVELS:
                violations.append(
                    Violation("coverage", aid, f"level {likert.levels[aid]!r} not in {FIVE_POINT_LEVELS}")
                )
    return ValidationReport(tuple(violations))


# Question kinds and their encoded domains. "delta" encodes an expenditure
# change as delta / increment, the others pass wire codes through.
QUESTION_KINDS = ("delta", "likert", "fee", "tax")


@dataclass(frozen=True)
class Question:
    qid: str
    kind: str
    key: str = ""

    def __post_init__(self) -> None:
        if self.kind not in QUESTION_KINDS:
            raise ValueError(f"unknown question kind {self.kind!r}")


@dataclass(frozen=True)
class EncodingSchema:
    """Ordered question list defining one feature layout."""

    questions: tuple[Question, ...]
    increment: int = 1

    def __post_init__(self) -> None:
        qids = [q.qid for q in self.questions]
        if len(set(qids)) != len(qids):
            raise DataError("duplicate question ids in schema")

    @property
    def qids(self) -> tuple[str, ...]:
        return tuple(q.qid for q in self.questions)

    def question(self, qid: str) -> Question:
        for q in self.questions:
            if q.qid == qid:
                return q
        raise KeyError(qid)


def expenditure_questions(spec: BudgetSpec) -> tuple[Question, ...]:
    return tuple(Question(f"exp:{a.area_id}", "delta", a.area_id) for a in spec.areas)


def likert_questions(spec: BudgetSpec) -> tuple[Question, ...]:
    return tuple(Question(f"lik:{a.area_id}", "likert", a.area_id) for a in spec.areas)


def revenue_questions(spec: BudgetSpec) -> tuple[Question, ...]:
    fees = tuple(Question(f"fee:{c}", "fee", c) for c in spec.fee_categories)
    return (Question("tax", "tax"),) + fees


def build_schema(spec: BudgetSpec, mode: str = "delta") -> EncodingSchema:
    """Full feature layout: expenditure block then revenue block.

    ``mode`` selects the expenditure block: "delta" for allocation ballots,
    "likert" for five-point direction ballots.
    """
    if mode == "delta":
        exp = expenditure_questions(spec)
    elif mode == "likert":
        exp = likert_questions(spec)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return EncodingSchema(exp + revenue_questions(spec), increment=spec.increment)


def answer_value(record: ResponseRecord, question: Question) -> int | None:
    """Raw answer for one question, None when unanswered."""
    if question.kind == "delta":
        if not isinstance(record.expenditure, ExpenditureBallot):
            return None
        return record.expenditure.allocation.get(question.key)
    if question.kind == "likert":
        if not isinstance(record.expenditure, LikertBallot):
            return None
        return record.expenditure.levels.get(question.key)
    if question.kind == "fee":
        if record.revenue is None:
            return None
        return record.revenue.fee_levels.get(question.key)
    if question.kind == "tax":
        if record.revenue is None:
            return None
        return record.revenue.property_tax
    raise ValueError(question.kind)


def encode_ordinal(
    record: ResponseRecord, schema: EncodingSchema, spec: BudgetSpec | None = None
) -> np.ndarray:
    """Encode one record as a float vector in schema order.

    Five-point answers map to -2..+2, fee levels to 0..2, the tax stance to
    -1/0/1, and expenditure allocations to (allocation - baseline) /
    increment. Delta questions need ``spec`` for baselines. An unanswered
    question raises DataError naming it; callers drop or impute upstream.
    """
    out = np.empty(len(schema.questions), dtype=float)
    for i, q in enumerate(schema.questions):
        raw = answer_value(record, q)
        if raw is None:
            raise DataError(f"respondent {record.respondent_id!r}: question {q.qid!r} unanswered")
        if q.kind == "delta":
            if spec is None:
                raise ValueError("delta questions require the budget spec")
            delta = raw - spec.area(q.key).baseline
            out[i] = delta / schema.increment
        else:
            out[i] = float(raw)
    return out


@dataclass(frozen=True)
class Segmentation:
    """Consecutive time segments over [start, end].

    Cut points split the window into half-open intervals [start, cut1),
    [cut1, cut2), ..., with the final segment closed at ``end``. Segments are
    numbered from 1 in time order.
    """

    start: datetime
    end: datetime
    cuts: tuple[datetime, ...] = ()

    def __post_init__(self) -> None:
        if self.start >= self.end:
            raise DataError("segmentation start must precede end")
        prev = self.start
        for c in self.cuts:
            if not prev < c:
                raise DataError("cut points must be strictly increasing inside the window")
            prev = c
        if self.cuts and self.cuts[-1] >= self.end:
            raise DataError("cut points must lie before the window end")

    @property
    def n_segments(self) -> int:
        return len(self.cuts) + 1


def assign_segment(timestamp: datetime, segmentation: Segmentation) -> int:
    """1-based segment index for a timestamp inside the window."""
    if timestamp < segmentation.start or timestamp > segmentation.end:
        raise DataError(f"timestamp {timestamp.isoformat()} outside segmentation window")
    return 1 + bisect_right(list(segmentation.cuts), timestamp)


_SLUG_RE = re.compile(r"[^a-z0-9]+")


def slugify(name: str) -> str:
    """Lowercase identifier from a display name."""
    return _SLUG_RE.sub("_", name.lower()).strip("_")


def ballot_steps(spec: BudgetSpec, ballots: Iterable[ExpenditureBallot]) -> np.ndarray:
    """Ballots as an (n, areas) int array of increment steps from baseline."""
    rows = []
    for b in ballots:
        rows.append(
            [(b.allocation[a.area_id] - a.baseline) // spec.increment for a in spec.areas]
        )
    if not rows:
        return np.empty((0, len(spec.areas)), dtype=np.int64)
    return np.asarray(rows, dtype=np.int64)


def ballot_from_steps(spec: BudgetSpec, steps: Iterable[int]) -> ExpenditureBallot:
    """Inverse of ballot_steps for one vector."""
    alloc = {
        a.area_id: a.baseline + int(s) * spec.increment
        for a, s in zip(spec.areas, steps, strict=True)
    }
    return ExpenditureBallot(alloc)


def floor_min_steps(spec: BudgetSpec) -> np.ndarray:
    """Per-area lowest legal delta in increment steps (always <= 0)."""
    mins = []
    for a in spec.areas:
        # smallest integer k with baseline + k * increment >= floor threshold
        bound = spec.floor_threshold(a) - a.baseline  # <= 0
        mins.append(int(-((-bound) // spec.increment)))
    return np.asarray(mins, dtype=np.int64)


def answer_category(record: ResponseRecord, axis_id: str) -> str:
    """Demographic category for an axis, UNANSWERED when absent or blank."""
    value = record.demographics.get(axis_id, UNANSWERED)
    return value if value else UNANSWERED

"""Synthetic response streams with known cluster structure.

A population profile defines opinion clusters (mean answer per question plus
Gaussian noise); a turnout schedule defines per-cluster arrival rates per day
and an optional shock window that multiplies them. The simulator draws
arrivals, rounds answers to legal levels, repairs expenditure ballots to
exact balance with the same greedy repair the aggregator uses, and returns
the log together with ground-truth cluster labels in arrival order.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Mapping, Sequence

import numpy as np

from .aggregate import rebalance
from .ballots import (
    BudgetSpec,
    EncodingSchema,
    ExpenditureBallot,
    LikertBallot,
    ResponseRecord,
    RevenueBallot,
    build_schema,
    ballot_from_steps,
    floor_min_steps,
)
from .datastore import ResponseLog
from .errors import DataError

_LEVEL_BOUNDS = {"fee": (0, 2), "likert": (-2, 2), "tax": (-1, 1)}


@dataclass(frozen=True)
class ClusterProfile:
    """One opinion cluster: mean answer and noise scale per question id.

    Means are in answer units (steps for allocation deltas, level codes
    otherwise). ``demographics`` optionally gives per-axis category
    probabilities for respondents drawn from this cluster.
    """

    means: Mapping[str, float]
    noise: float = 0.5
    demographics: Mapping[str, Mapping[str, float]] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "means", dict(self.means))
        if self.noise < 0:
            raise DataError("noise must be >= 0")
        if self.demographics is not None:
            object.__setattr__(
                self,
                "demographics",
                {k: dict(v) for k, v in self.demographics.items()},
            )


@dataclass(frozen=True)
class PopulationProfile:
    clusters: tuple[ClusterProfile, ...]

    def __post_init__(self) -> None:
        if not self.clusters:
            raise DataError("profile has no clusters")
        keys = {tuple(sorted(c.means)) for c in self.clusters}
        if len(keys) != 1:
            raise DataError("clusters answer different question sets")

    @property
    def question_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.clusters[0].means))


@dataclass(frozen=True)
class Shock:
    """Multiplies per-cluster arrival rates on days [day, day + duration)."""

    day: int
    duration: int
    multipliers: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.day < 0 or self.duration <= 0:
            raise DataError("shock window must have day >= 0 and duration > 0")
        if any(m < 0 for m in self.multipliers):
            raise DataError("shock multipliers must be >= 0")

    def active(self, day: int) -> bool:
        return self.day <= day < self.day + self.duration


@dataclass(frozen=True)
class TurnoutSchedule:
    horizon_days: int
    base_rates: tuple[float, ...]  # expected arrivals per day per cluster
    shock: Shock | None = None
    start: datetime = datetime(2020, 5, 1, tzinfo=timezone.utc)

    def __post_init__(self) -> None:
        if self.horizon_days <= 0:
            raise DataError("horizon must be positive")
        if any(r < 0 for r in self.base_rates) or sum(self.base_rates) <= 0:
            raise DataError("base rates must be nonnegative with positive sum")
        if self.shock is not None:
            if len(self.shock.multipliers) != len(self.base_rates):
                raise DataError("shock multipliers must match cluster count")
            if self.shock.day + self.shock.duration > self.horizon_days:
                raise DataError("shock window extends past the horizon")

    def rates_for(self, day: int) -> tuple[float, ...]:
        if self.shock is not None and self.shock.active(day):
            return tuple(
                r * m for r, m in zip(self.base_rates, self.shock.multipliers)
            )
        return self.base_rates


@dataclass(frozen=True)
class SimulationResult:
    log: ResponseLog
    labels: tuple[int, ...]  # ground truth, in arrival order


def _legal_level(kind: str, raw: float) -> int:
    level = int(np.floor(raw + 0.5))
    lo, hi = _LEVEL_BOUNDS[kind]
    return min(max(level, lo), hi)


def _draw_record(
    rid: str,
    timestamp: datetime,
    cluster: ClusterProfile,
    spec: BudgetSpec,
    schema: EncodingSchema,
    mode: str,
    floors: np.ndarray,
    rng: np.random.Generator,
) -> ResponseRecord:
    # sorted question order pins the RNG consumption sequence
    raw = {
        qid: cluster.means[qid] + cluster.noise * rng.standard_normal()
        for qid in sorted(cluster.means)
    }
    exp_ballot: ExpenditureBallot | LikertBallot | None = None
    if mode == "delta":
        steps = np.empty(len(spec.areas), dtype=np.int64)
        for j, area in enumerate(spec.areas):
            drawn = int(np.floor(raw[f"exp:{area.area_id}"] + 0.5))
            steps[j] = max(drawn, int(floors[j]))  # clamp to the spending floor
        balanced = rebalance(steps, spec, steps.reshape(1, -1))
        exp_ballot = ballot_from_steps(spec, balanced)
    else:
        exp_ballot = LikertBallot(
            {
                area.area_id: _legal_level("likert", raw[f"lik:{area.area_id}"])
                for area in spec.areas
            }
        )
    fee_levels = {
        cat: _legal_level("fee", raw[f"fee:{cat}"]) for cat in spec.fee_categories
    }
    revenue = RevenueBallot(_legal_level("tax", raw["tax"]), fee_levels)
    demographics = {}
    if cluster.demographics:
        for axis_id, dist in cluster.demographics.items():
            cats = sorted(dist)
            probs = np.array([dist[c] for c in cats], dtype=float)
            probs = probs / probs.sum()
            demographics[axis_id] = cats[int(rng.choice(len(cats), p=probs))]
    return ResponseRecord(rid, timestamp, exp_ballot, revenue, demographics)


def simulate(
    profile: PopulationProfile,
    schedule: TurnoutSchedule,
    spec: BudgetSpec,
    seed: int = 0,
    mode: str = "delta",
) -> SimulationResult:
    """Draw a full response stream; deterministic for a fixed seed.

    Each day draws an independent Poisson count per cluster at that day's
    rate, then interleaves the day's arrivals in a random order, which is
    equivalent to each arrival drawing its cluster by rate share. Allocation
    ballots always validate: drawn steps clamp to the floor and the greedy
    repair restores exact balance.
    """
    if len(schedule.base_rates) != len(profile.clusters):
        raise DataError("schedule rates must match profile clusters")
    schema = build_schema(spec, mode)
    expected = set(schema.qids)
    got = set(profile.question_ids)
    if got != expected:
        missing = sorted(expected - got)
        extra = sorted(got - expected)
        raise DataError(f"profile questions mismatch (missing {missing}, extra {extra})")
    floors = floor_min_steps(spec)
    # an area can gain at most what every other area together may cut
    ceil_by_area = {
        a.area_id: int(-floors.sum() + floors[j]) for j, a in enumerate(spec.areas)
    }
    for ci, cluster in enumerate(profile.clusters):
        for qid, mean in cluster.means.items():
            kind = schema.question(qid).kind
            level = int(np.floor(mean + 0.5))
            if kind in _LEVEL_BOUNDS:
                lo, hi = _LEVEL_BOUNDS[kind]
                if not lo <= level <= hi:
                    raise DataError(
                        f"cluster {ci} mean for {qid} rounds to {level}, outside [{lo}, {hi}]"
                    )
            elif kind == "delta":
                # means are increment steps; anything no balanced ballot can
                # reach would only ever produce clamp artifacts (means below
                # the floor stay legal: drawing clamps them to the floor)
                hi = ceil_by_area[qid.split(":", 1)[1]]
                if level > hi:
                    raise DataError(
                        f"cluster {ci} mean for {qid} rounds to {level} steps, "
                        f"above the feasible maximum {hi}"
                    )
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    records: list[ResponseRecord] = []
    labels: list[int] = []
    counter = 0
    for day in range(schedule.horizon_days):
        rates = schedule.rates_for(day)
        day_labels: list[int] = []
        for ci, rate in enumerate(rates):
            day_labels.extend([ci] * int(rng.poisson(rate)))
        order = rng.permutation(len(day_labels))
        times = np.sort(rng.random(len(day_labels)))
        day_start = schedule.start + timedelta(days=day)
        for slot, idx in enumerate(order):
            ci = day_labels[idx]
            ts = day_start + timedelta(seconds=float(times[slot]) * 86_400.0)
            counter += 1
            records.append(
                _draw_record(
                    f"sim-{counter:06d}",
                    ts,
                    profile.clusters[ci],
                    spec,
                    schema,
                    mode,
                    floors,
                    rng,
                )
            )
            labels.append(ci)
    if not records:
        raise DataError("simulation produced no arrivals; raise the rates")
    return SimulationResult(ResponseLog(spec, tuple(records)), tuple(labels))


def null_schedule(total: int, shares: Sequence[float], seed: int = 0) -> np.ndarray:
    """Random-order labels with fixed composition.

    Cluster counts are apportioned from shares by largest remainder, then the
    label multiset is shuffled uniformly. This is the null hypothesis of the
    arrival-order diagnostics: composition with no time structure.
    """
    if total < 0:
        raise DataError("total must be nonnegative")
    sh = np.asarray(shares, dtype=float)
    if np.any(sh < 0) or sh.sum() <= 0:
        raise DataError("shares must be nonnegative with positive sum")
    if total == 0:
        return np.empty(0, dtype=np.int64)
    sh = sh / sh.sum()
    quotas = sh * total
    counts = np.floor(quotas).astype(np.int64)
    shortfall = total - int(counts.sum())
    if shortfall > 0:
        remainders = quotas - counts
        # ties go to the lower cluster index via stable argsort on -remainder
        order = np.argsort(-remainders, kind="stable")
        for i in range(shortfall):
            counts[order[i]] += 1
    labels = np.repeat(np.arange(len(sh)), counts)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return labels[rng.permutation(total)]

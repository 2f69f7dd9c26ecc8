"""Budget-balanced aggregation of constrained ballots.

The aggregate minimizes the summed (optionally weighted) L1 distance to all
ballots subject to exact balance, the increment grid, and per-area floors.
The coordinatewise weighted lower median minimizes the objective without the
balance constraint; a greedy single-step repair then walks the balance back
to zero. Because the objective is separable convex and each repaired
coordinate only moves away from its unconstrained minimum, picking the
cheapest marginal step each time is exactly optimal, with ties broken toward
the lowest area index for determinism.

All vectors here are integer "steps": expenditure deltas divided by the
increment. Balance reads as step sum zero and floors as per-area lower
bounds that are never positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Iterable, Mapping, Sequence

import numpy as np

from .ballots import BudgetSpec, ExpenditureBallot, ballot_steps, floor_min_steps
from .errors import DataError, InfeasibleError

if TYPE_CHECKING:
    from .datastore import PBElectionLog


@dataclass(frozen=True)
class AreaChange:
    """Aggregate outcome for one service area, in cents."""

    area_id: str
    baseline: int
    change: int

    @property
    def change_pct(self) -> float:
        if self.baseline == 0:
            return 0.0
        return 100.0 * self.change / self.baseline


@dataclass(frozen=True)
class AggregateBudget:
    changes: tuple[AreaChange, ...]
    weight_scheme_id: str | None = None

    def change_for(self, area_id: str) -> int:
        for c in self.changes:
            if c.area_id == area_id:
                return c.change
        raise KeyError(area_id)

    @property
    def total_change(self) -> int:
        return sum(c.change for c in self.changes)


@dataclass(frozen=True)
class Distribution:
    """Answer shares for one question; ``n`` counts answered respondents."""

    question_id: str
    proportions: Mapping[Any, float]
    n: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "proportions", dict(self.proportions))


def coordinate_median(deltas: np.ndarray, weights: Sequence[float] | None = None) -> np.ndarray:
    """Per-column weighted lower median of an (n, m) step matrix.

    The lower median is the smallest value whose cumulative weight reaches
    half the total. It minimizes weighted L1 distance columnwise.
    """
    deltas = np.asarray(deltas)
    if deltas.ndim != 2 or deltas.shape[0] == 0:
        raise DataError("median requires a nonempty (ballots, areas) matrix")
    n, m = deltas.shape
    if weights is None:
        w = np.ones(n)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (n,):
            raise ValueError(f"weights shape {w.shape} does not match {n} ballots")
        if np.any(w < 0) or w.sum() <= 0:
            raise DataError("weights must be nonnegative with positive sum")
    half = w.sum() / 2.0
    eps = 1e-9 * w.sum()
    out = np.empty(m, dtype=np.int64)
    for j in range(m):
        order = np.argsort(deltas[:, j], kind="stable")
        cum = np.cumsum(w[order])
        idx = int(np.searchsorted(cum, half - eps, side="left"))
        out[j] = deltas[order[idx], j]
    return out


def _marginal_costs(
    current: np.ndarray, step: int, deltas: np.ndarray, w: np.ndarray
) -> np.ndarray:
    """Cost change per area for moving that area by ``step``."""
    moved = current + step
    return (np.abs(moved[None, :] - deltas) - np.abs(current[None, :] - deltas)).T @ w


def rebalance(
    median: np.ndarray,
    spec: BudgetSpec,
    deltas: np.ndarray,
    weights: Sequence[float] | None = None,
) -> np.ndarray:
    """Repair a step vector to sum zero by greedy cheapest single steps.

    A surplus moves areas down (never below their floor), a deficit moves
    areas up. Ties go to the lowest area index. Raises InfeasibleError when
    no legal move remains, which cannot happen for floors derived from a
    valid spec (they are never positive).
    """
    current = np.asarray(median, dtype=np.int64).copy()
    deltas = np.asarray(deltas)
    n = deltas.shape[0]
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    floors = floor_min_steps(spec)
    if current.shape != floors.shape:
        raise ValueError("median length does not match spec areas")
    imbalance = int(current.sum())
    while imbalance != 0:
        step = -1 if imbalance > 0 else 1
        costs = _marginal_costs(current, step, deltas, w)
        if step < 0:
            legal = current - 1 >= floors
        else:
            legal = np.ones_like(current, dtype=bool)
        if not legal.any():
            raise InfeasibleError("cannot rebalance: every area is at its floor")
        costs = np.where(legal, costs, np.inf)
        j = int(np.argmin(costs))  # argmin takes the first minimum: lowest index
        current[j] += step
        imbalance += step
    return current


def knapsack_aggregate(
    spec: BudgetSpec,
    ballots: Sequence[ExpenditureBallot],
    weights: Sequence[float] | None = None,
    weight_scheme_id: str | None = None,
) -> AggregateBudget:
    """Aggregate valid expenditure ballots into one balanced budget."""
    if not ballots:
        raise DataError("no expenditure ballots to aggregate")
    deltas = ballot_steps(spec, ballots)
    median = coordinate_median(deltas, weights)
    balanced = rebalance(median, spec, deltas, weights)
    changes = tuple(
        AreaChange(a.area_id, a.baseline, int(s) * spec.increment)
        for a, s in zip(spec.areas, balanced)
    )
    return AggregateBudget(changes, weight_scheme_id)


def tally_distribution(
    answers: Iterable[Any],
    question_id: str,
    weights: Sequence[float] | None = None,
) -> Distribution:
    """Share of each answer value, optionally weighted.

    ``answers`` may contain None for unanswered; those are excluded from both
    the numerator and the denominator. ``n`` is the unweighted answered
    count. Proportions sum to 1 within 1e-9.
    """
    answers = list(answers)
    if weights is None:
        w = [1.0] * len(answers)
    else:
        w = [float(x) for x in weights]
        if len(w) != len(answers):
            raise ValueError("weights length does not match answers")
    totals: dict[Any, float] = {}
    n = 0
    wsum = 0.0
    for a, wi in zip(answers, w):
        if a is None:
            continue
        n += 1
        wsum += wi
        totals[a] = totals.get(a, 0.0) + wi
    if n == 0:
        raise DataError(f"question {question_id!r}: no answered responses")
    if wsum <= 0:
        raise DataError(f"question {question_id!r}: answered weight sums to zero")
    props = {k: v / wsum for k, v in totals.items()}
    return Distribution(question_id, props, n)


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    levels: Mapping[str, int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "levels", dict(self.levels))


@dataclass(frozen=True)
class ScenarioSet:
    scenarios: tuple[Scenario, ...]
    dropped: tuple[str, ...]


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


_KIND_BOUNDS = {"fee": (0, 2), "likert": (-2, 2), "tax": (-1, 1), "delta": None}


def scenarios_from_centroids(
    centroids_denorm: np.ndarray,
    questions: Sequence[tuple[str, str]],
    label_prefix: str = "cluster",
) -> ScenarioSet:
    """Readable per-cluster answer levels from de-normalized centroids.

    ``questions`` pairs (question id, kind). Each centroid coordinate rounds
    half-up to the nearest integer level and clamps to the kind's legal
    range; questions where every cluster lands on the same level are dropped
    as carrying no contrast.
    """
    cent = np.asarray(centroids_denorm, dtype=float)
    if cent.ndim != 2:
        raise ValueError("centroids must be a (k, questions) matrix")
    k, m = cent.shape
    if k < 2:
        raise DataError("scenario extraction needs at least two clusters")
    if m != len(questions):
        raise ValueError("question list does not match centroid width")
    levels = np.empty((k, m), dtype=np.int64)
    for j, (qid, kind) in enumerate(questions):
        if kind not in _KIND_BOUNDS:
            raise ValueError(f"unknown question kind {kind!r}")
        bounds = _KIND_BOUNDS[kind]
        for c in range(k):
            v = _round_half_up(float(cent[c, j]))
            if bounds is not None:
                v = min(max(v, bounds[0]), bounds[1])
            levels[c, j] = v
    kept: list[int] = []
    dropped: list[str] = []
    for j, (qid, _) in enumerate(questions):
        if np.all(levels[:, j] == levels[0, j]):
            dropped.append(qid)
        else:
            kept.append(j)
    scenarios = tuple(
        Scenario(
            f"{label_prefix}-{c}",
            {questions[j][0]: int(levels[c, j]) for j in kept},
        )
        for c in range(k)
    )
    return ScenarioSet(scenarios, tuple(dropped))


@dataclass(frozen=True)
class PBTally:
    approvals: Mapping[str, int]
    winners: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "approvals", dict(self.approvals))


def pb_knapsack_tally(election: "PBElectionLog") -> PBTally:
    """Approval counts and greedy winner set for a participatory election.

    A voter approves a project by allocating any positive amount to it.
    Winners are chosen greedily by approvals (descending), cost (ascending),
    then project id, skipping projects that no longer fit the budget.
    """
    if not election.votes:
        raise DataError(f"election {election.election_id!r} has no votes")
    approvals = {p.project_id: 0 for p in election.projects}
    for vote in election.votes:
        spent = 0
        for pid, amount in vote.allocations.items():
            if pid not in approvals:
                raise DataError(f"voter {vote.voter_id!r}: unknown project {pid!r}")
            if amount < 0:
                raise DataError(f"voter {vote.voter_id!r}: negative allocation")
            spent += amount
            if amount > 0:
                approvals[pid] += 1
        if spent > election.budget:
            raise DataError(f"voter {vote.voter_id!r}: allocations exceed the budget")
    cost = {p.project_id: p.cost for p in election.projects}
    ranked = sorted(approvals, key=lambda pid: (-approvals[pid], cost[pid], pid))
    winners: list[str] = []
    remaining = election.budget
    for pid in ranked:
        if approvals[pid] > 0 and cost[pid] <= remaining:
            winners.append(pid)
            remaining -= cost[pid]
    return PBTally(approvals, tuple(winners))

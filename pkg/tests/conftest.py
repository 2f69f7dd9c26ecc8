"""Shared fixtures: a small synthetic budget spec and record builders."""

from datetime import datetime, timezone

import pytest

from civicbudget.ballots import (
    BudgetSpec,
    DemographicAxis,
    ExpenditureBallot,
    ResponseRecord,
    RevenueBallot,
    ServiceArea,
)
from civicbudget import fixtures


@pytest.fixture(scope="session")
def small_spec() -> BudgetSpec:
    # floors land exactly on the grid: min steps are -1, -2, -3
    return BudgetSpec(
        areas=(
            ServiceArea("parks", "Parks", 1000),
            ServiceArea("roads", "Roads", 2000),
            ServiceArea("safety", "Safety", 3000),
        ),
        increment=100,
        floor_fraction=0.10,
        fee_categories=("golf", "pool"),
        demographic_axes=(
            DemographicAxis("age", ("18-34", "35-64", "65+")),
            DemographicAxis("own", ("own", "rent")),
        ),
    )


@pytest.fixture(scope="session")
def austin2020() -> BudgetSpec:
    return fixtures.austin_2020_spec()


def make_record(
    spec: BudgetSpec,
    rid: str = "r1",
    steps: tuple[int, ...] | None = None,
    tax: int = 0,
    fee: int = 0,
    when: datetime | None = None,
    demographics: dict[str, str] | None = None,
) -> ResponseRecord:
    """Valid record for ``spec``; ``steps`` defaults to the identity ballot."""
    if steps is None:
        steps = (0,) * len(spec.areas)
    alloc = {
        a.area_id: a.baseline + s * spec.increment
        for a, s in zip(spec.areas, steps)
    }
    return ResponseRecord(
        respondent_id=rid,
        timestamp=when or datetime(2020, 5, 10, 12, 0, tzinfo=timezone.utc),
        expenditure=ExpenditureBallot(alloc),
        revenue=RevenueBallot(tax, {c: fee for c in spec.fee_categories}),
        demographics=demographics or {},
    )

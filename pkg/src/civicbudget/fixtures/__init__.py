"""Published reference data from the Austin 2020/2021 feedback exercises.

Loaders return typed objects from the JSON/CSV files in ``data/``: exercise
specs, published outcome tables, the follow-up survey tables, citywide
demographic marginals, and a reconstruction of the 2021 opinion-cluster
model whose de-normalized centroids round to the published scenario levels.
"""

from __future__ import annotations

import csv
import json
from datetime import datetime, timezone
from importlib import resources

import numpy as np

from ..ballots import BudgetSpec, Segmentation
from ..cluster import ClusterModel
from ..datastore import spec_from_wire
from ..stats import CrossTab

FEE_DISPLAY = {
    "animal_services_fees": "Animal Services Fees",
    "aquatic_fees": "Aquatic Fees",
    "ems_transport_fees": "EMS Transport Fees",
    "facility_rental_fees": "Facility Rental Fees",
    "fire_permit_inspection_fees": "Fire Permit & Inspection Fees",
    "golf_fees": "Golf Fees",
    "parks_program_fees": "Parks and Recreation Program Fees",
    "planning_zoning_fees": "Planning and Zoning Fees",
    "public_health_permit_fees": "Public Health Permit Fees",
}

BUDGET_LEVEL_COLUMNS = (
    "significant_decrease",
    "moderate_decrease",
    "no_change",
    "moderate_increase",
    "significant_increase",
)

FEE_LEVEL_COLUMNS = ("no_change", "moderate_increase", "significant_increase")


def _read_text(name: str) -> str:
    return resources.files(__package__).joinpath("data", name).read_text(encoding="utf-8")


def _read_json(name: str) -> dict:
    return json.loads(_read_text(name))


def _read_csv(name: str) -> list[dict[str, str]]:
    return list(csv.DictReader(_read_text(name).splitlines()))


def austin_2020_spec() -> BudgetSpec:
    """The 2020 exercise: 11 areas, $250,000 grid, 5% floor, 9 fee questions."""
    return spec_from_wire(_read_json("austin2020_spec.json"))


def austin_2021_spec() -> BudgetSpec:
    """The 2021 exercise, answered on five-point direction scales.

    Baseline amounts were not part of the published record and are stored as
    zero; they are never used in five-point mode.
    """
    return spec_from_wire(_read_json("austin2021_spec.json"))


def austin_2020_segmentation() -> Segmentation:
    """The three analysis segments: before the shock, the surge, the tail."""
    return Segmentation(
        start=datetime(2020, 5, 1, tzinfo=timezone.utc),
        end=datetime(2020, 7, 1, tzinfo=timezone.utc),
        cuts=(
            datetime(2020, 5, 29, tzinfo=timezone.utc),
            datetime(2020, 6, 6, tzinfo=timezone.utc),
        ),
    )


def fee_change_table(year: int) -> dict[str, tuple[float, float, float]]:
    """Published fee-change answer shares per category."""
    rows = _read_csv(f"fee_change_{year}.csv")
    return {
        r["category"]: tuple(float(r[c]) for c in FEE_LEVEL_COLUMNS)
        for r in rows
    }


def budget_change_table(year: int) -> dict[str, tuple[float, ...]]:
    """Published five-level budget-change answer shares per area."""
    rows = _read_csv(f"budget_change_{year}.csv")
    return {
        r["area"]: tuple(float(r[c]) for c in BUDGET_LEVEL_COLUMNS)
        for r in rows
    }


def aggregate_2020_table() -> list[dict]:
    """The published aggregated 2020 budget (baselines and changes in cents)."""
    rows = _read_csv("aggregate_2020.csv")
    return [
        {
            "area": r["area"],
            "name": r["name"],
            "baseline_cents": int(r["baseline_cents"]),
            "change_cents": int(r["change_cents"]),
        }
        for r in rows
    ]


def followup_crosstab() -> tuple[CrossTab, tuple[int, ...], tuple[int, ...]]:
    """Size-change vs agreement cross-tab with its ordinal category codes.

    The codes order categories as the questionnaire presented them, which
    differs from the table's display order; they orient the rank correlation.
    """
    data = _read_json("followup_crosstab.json")
    ct = CrossTab(
        row_label=data["row_label"],
        col_label=data["col_label"],
        row_categories=tuple(data["row_categories"]),
        col_categories=tuple(data["col_categories"]),
        counts=np.asarray(data["counts"], dtype=np.int64),
    )
    return ct, tuple(data["row_codes"]), tuple(data["col_codes"])


def followup_scenario_counts() -> dict:
    """Preferred-scenario counts by 2021 cluster (revenue and expenditure)."""
    return _read_json("followup_scenarios.json")


def followup_agreement_counts() -> dict:
    """Police-budget agreement counts by 2021 cluster."""
    return _read_json("followup_agreement.json")


def followup_rankings() -> list[dict[str, int]]:
    """Scenario rank counts from the follow-up survey."""
    rows = _read_csv("followup_rankings.csv")
    return [{k: int(v) for k, v in row.items()} for row in rows]


def acs_marginals() -> dict[str, dict[str, float]]:
    """Citywide demographic marginals for post-stratification."""
    data = _read_json("acs_2018.json")
    return {k: v for k, v in data.items() if isinstance(v, dict)}


def centroid_model_2021() -> tuple[ClusterModel, tuple[tuple[str, str], ...]]:
    """Reconstructed 2021 cluster model and its (question, kind) layout.

    The centroids are normalized; de-normalizing and rounding them yields the
    published scenario levels (cluster 0 pairs with the moderate-fee and
    moderate-expenditure scenarios, cluster 1 with the tax-increase and
    police-decrease scenarios, cluster 2 with the minimal-change and
    police-increase scenarios).
    """
    data = _read_json("centroids_2021.json")
    columns = tuple(data["columns"])
    model = ClusterModel(
        k=len(data["centroids"]),
        centroids=np.asarray(data["centroids"], dtype=float),
        labels=np.empty(0, dtype=np.int64),
        inertia=0.0,
        seed=0,
        restarts=0,
        columns=columns,
        scales=np.asarray(data["scales"], dtype=float),
    )
    questions = tuple(zip(columns, data["kinds"]))
    return model, questions


def scenario_aliases_2021() -> dict[str, list[str]]:
    """Published names for the extracted 2021 scenarios, keyed by cluster."""
    return dict(_read_json("centroids_2021.json")["scenario_aliases"])


def pb_cluster_table() -> list[dict[str, int]]:
    """Cluster counts chosen by the gap statistic across knapsack elections."""
    rows = _read_csv("pb_optimal_clusters.csv")
    return [
        {"election_id": int(r["election_id"]), "votes": int(r["votes"]), "clusters": int(r["clusters"])}
        for r in rows
    ]

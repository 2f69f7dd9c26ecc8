"""Persistence: response logs, anonymization, participatory elections.

Response logs are CSV with one row per respondent. Column headers carry the
question layout: ``exp:<area>`` columns hold allocation deltas in cents,
``lik:<area>`` five-point codes, ``fee:<category>`` 0..2 codes, ``tax`` the
-1/0/1 stance, and ``dem:<axis>`` demographic categories. Blank cells mean
unanswered; a block left entirely blank means that ballot was not cast.
Writing is canonical (spec order, ISO dates, LF endings) so a load/save
cycle is byte-stable.
"""

from __future__ import annotations

import csv
import io
import json
import random
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Mapping, Sequence

import numpy as np

from .ballots import (
    BudgetSpec,
    DemographicAxis,
    ExpenditureBallot,
    LikertBallot,
    ResponseRecord,
    RevenueBallot,
    ServiceArea,
    UNANSWERED,
    build_schema,
    encode_ordinal,
    validate_expenditure,
    validate_survey,
)
from .cluster import FeatureMatrix
from .errors import DataError

MAX_INVALID_FRACTION = 0.10


def spec_from_wire(data: Mapping) -> BudgetSpec:
    """Build a budget spec from its JSON wire form."""
    try:
        areas = tuple(
            ServiceArea(a["id"], a.get("name", a["id"]), int(a["baseline_cents"]))
            for a in data["areas"]
        )
        axes = tuple(
            DemographicAxis(ax["id"], tuple(ax["categories"]))
            for ax in data.get("demographic_axes", [])
        )
        return BudgetSpec(
            areas=areas,
            increment=int(data["increment_cents"]),
            floor_fraction=float(data["floor_fraction"]),
            fee_categories=tuple(data.get("fee_categories", [])),
            demographic_axes=axes,
        )
    except (KeyError, TypeError) as exc:
        raise DataError(f"malformed budget spec: {exc!r}") from exc


def spec_to_wire(spec: BudgetSpec) -> dict:
    """JSON wire form of a budget spec."""
    return {
        "areas": [
            {"id": a.area_id, "name": a.name, "baseline_cents": a.baseline}
            for a in spec.areas
        ],
        "increment_cents": spec.increment,
        "floor_fraction": spec.floor_fraction,
        "fee_categories": list(spec.fee_categories),
        "demographic_axes": [
            {"id": ax.axis_id, "categories": list(ax.categories)}
            for ax in spec.demographic_axes
        ],
    }


def load_spec(path: str) -> BudgetSpec:
    """Read a budget spec JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})") from exc
    return spec_from_wire(data)


@dataclass(frozen=True)
class ResponseLog:
    """Immutable ordered collection of responses for one exercise."""

    spec: BudgetSpec
    records: tuple[ResponseRecord, ...]
    provenance: str = "raw"  # "raw" | "anonymized"

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))

    @property
    def n(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class RejectedRow:
    line_no: int
    reason: str


@dataclass(frozen=True)
class LoadResult:
    log: ResponseLog
    rejected: tuple[RejectedRow, ...]


def _mode_of(header: Sequence[str]) -> str:
    has_exp = any(h.startswith("exp:") for h in header)
    has_lik = any(h.startswith("lik:") for h in header)
    if has_exp and has_lik:
        raise DataError("header mixes allocation and five-point expenditure columns")
    return "likert" if has_lik else "delta"


def response_header(spec: BudgetSpec, mode: str = "delta") -> list[str]:
    head = ["respondent_id", "date"]
    prefix = "exp:" if mode == "delta" else "lik:"
    head += [f"{prefix}{a.area_id}" for a in spec.areas]
    head += [f"fee:{c}" for c in spec.fee_categories]
    head += ["tax"]
    head += [f"dem:{ax.axis_id}" for ax in spec.demographic_axes]
    return head


def _parse_timestamp(text: str) -> datetime:
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


def _format_timestamp(ts: datetime) -> str:
    # day-granular midnight timestamps write as a bare date so anonymized
    # files cannot leak sub-day ordering
    if (ts.hour, ts.minute, ts.second, ts.microsecond) == (0, 0, 0, 0):
        return ts.date().isoformat()
    return ts.astimezone(timezone.utc).replace(tzinfo=None).isoformat()


def _row_to_record(
    spec: BudgetSpec,
    header: Sequence[str],
    row: Sequence[str],
    mode: str,
) -> ResponseRecord:
    if len(row) != len(header):
        raise DataError(f"row has {len(row)} cells, header has {len(header)}")
    cells = dict(zip(header, row))
    rid = cells.get("respondent_id", "").strip()
    if not rid:
        raise DataError("missing respondent_id")
    date_text = cells.get("date", "").strip()
    if not date_text:
        raise DataError("missing date")
    try:
        ts = _parse_timestamp(date_text)
    except ValueError as exc:
        raise DataError(f"bad date {date_text!r}") from exc

    def intcell(name: str) -> int | None:
        text = cells.get(name, "").strip()
        if text == "":
            return None
        try:
            return int(text)
        except ValueError as exc:
            raise DataError(f"column {name!r}: not an integer: {text!r}") from exc

    expenditure: ExpenditureBallot | LikertBallot | None = None
    if mode == "delta":
        deltas = {a.area_id: intcell(f"exp:{a.area_id}") for a in spec.areas}
        answered = {k: v for k, v in deltas.items() if v is not None}
        if answered:
            if len(answered) != len(spec.areas):
                missing = sorted(set(deltas) - set(answered))
                raise DataError(f"partial allocation ballot (missing {missing})")
            expenditure = ExpenditureBallot(
                {a.area_id: a.baseline + answered[a.area_id] for a in spec.areas}
            )
    else:
        levels = {a.area_id: intcell(f"lik:{a.area_id}") for a in spec.areas}
        answered = {k: v for k, v in levels.items() if v is not None}
        if answered:
            if len(answered) != len(spec.areas):
                missing = sorted(set(levels) - set(answered))
                raise DataError(f"partial five-point ballot (missing {missing})")
            expenditure = LikertBallot(answered)

    revenue: RevenueBallot | None = None
    fee_cells = {c: intcell(f"fee:{c}") for c in spec.fee_categories}
    tax_cell = intcell("tax")
    fee_answered = {k: v for k, v in fee_cells.items() if v is not None}
    if fee_answered or tax_cell is not None:
        if tax_cell is None or len(fee_answered) != len(spec.fee_categories):
            raise DataError("partial revenue ballot")
        revenue = RevenueBallot(tax_cell, fee_answered)

    demographics = {}
    for ax in spec.demographic_axes:
        text = cells.get(f"dem:{ax.axis_id}", "").strip()
        demographics[ax.axis_id] = text if text else UNANSWERED
    return ResponseRecord(rid, ts, expenditure, revenue, demographics)


def _validate_record(spec: BudgetSpec, record: ResponseRecord) -> None:
    if isinstance(record.expenditure, ExpenditureBallot):
        report = validate_expenditure(spec, record.expenditure)
        if not report.valid:
            raise DataError(
                "; ".join(f"{v.constraint}: {v.detail}" for v in report.violations)
            )
    likert = record.expenditure if isinstance(record.expenditure, LikertBallot) else None
    report = validate_survey(spec, record.revenue, likert)
    if not report.valid:
        raise DataError("; ".join(f"{v.constraint}: {v.detail}" for v in report.violations))


def load_responses(path: str, spec: BudgetSpec) -> LoadResult:
    """Read and validate a response CSV.

    Every row passes ballot validation; invalid rows are excluded and
    reported with their 1-based line numbers. More than 10% invalid rows, or
    a malformed header, is an error for the whole file.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return _load_responses(fh, spec, path)


def _load_responses(fh, spec: BudgetSpec, name: str) -> LoadResult:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError(f"{name}: empty file") from None
    if header[:2] != ["respondent_id", "date"]:
        raise DataError(f"{name}: header must start with respondent_id,date")
    mode = _mode_of(header)
    expected = set(response_header(spec, mode))
    unknown = [h for h in header if h not in expected and h != "segment"]
    if unknown:
        raise DataError(f"{name}: unknown columns {unknown}")
    records: list[ResponseRecord] = []
    rejected: list[RejectedRow] = []
    total = 0
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        total += 1
        try:
            record = _row_to_record(spec, header, row, mode)
            _validate_record(spec, record)
        except DataError as exc:
            rejected.append(RejectedRow(line_no, str(exc)))
            continue
        records.append(record)
    if total > 0 and len(rejected) > MAX_INVALID_FRACTION * total:
        raise DataError(
            f"{name}: {len(rejected)} of {total} rows invalid "
            f"(limit {MAX_INVALID_FRACTION:.0%}); first: "
            f"line {rejected[0].line_no}: {rejected[0].reason}"
        )
    return LoadResult(ResponseLog(spec, tuple(records)), tuple(rejected))


def save_responses(log: ResponseLog, path: str, mode: str | None = None) -> None:
    """Write a response CSV in canonical column order."""
    if mode is None:
        mode = "likert" if any(
            isinstance(r.expenditure, LikertBallot) for r in log.records
        ) else "delta"
    header = response_header(log.spec, mode)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for rec in log.records:
        writer.writerow(_record_to_row(log.spec, rec, mode))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def _record_to_row(spec: BudgetSpec, rec: ResponseRecord, mode: str) -> list[str]:
    row = [rec.respondent_id, _format_timestamp(rec.timestamp)]
    if mode == "delta":
        if isinstance(rec.expenditure, ExpenditureBallot):
            row += [
                str(rec.expenditure.allocation[a.area_id] - a.baseline) for a in spec.areas
            ]
        else:
            row += [""] * len(spec.areas)
    else:
        if isinstance(rec.expenditure, LikertBallot):
            row += [str(rec.expenditure.levels[a.area_id]) for a in spec.areas]
        else:
            row += [""] * len(spec.areas)
    if rec.revenue is not None:
        row += [str(rec.revenue.fee_levels[c]) for c in spec.fee_categories]
        row += [str(rec.revenue.property_tax)]
    else:
        row += [""] * (len(spec.fee_categories) + 1)
    for ax in spec.demographic_axes:
        val = rec.demographics.get(ax.axis_id, UNANSWERED)
        row += [val if val != UNANSWERED else UNANSWERED]
    return row


def anonymize(log: ResponseLog, seed: int = 0) -> ResponseLog:
    """Strip identity and sub-day timing from a response log.

    Timestamps truncate to day granularity, rows are shuffled within each
    day (seeded, deterministic), respondent ids are replaced with fresh
    opaque tokens in output order, and demographic values outside the
    declared category sets become unanswered. Ballot content is untouched.
    """
    by_day: dict = {}
    for rec in log.records:
        by_day.setdefault(rec.timestamp.date(), []).append(rec)
    rng = random.Random(seed)
    out: list[ResponseRecord] = []
    axes = {ax.axis_id: set(ax.categories) for ax in log.spec.demographic_axes}
    for day in sorted(by_day):
        group = list(by_day[day])
        rng.shuffle(group)
        for rec in group:
            demographics = {}
            for axis_id, allowed in axes.items():
                val = rec.demographics.get(axis_id, UNANSWERED)
                demographics[axis_id] = val if val in allowed else UNANSWERED
            out.append(
                ResponseRecord(
                    respondent_id=f"a{len(out):06d}",
                    timestamp=datetime(day.year, day.month, day.day, tzinfo=timezone.utc),
                    expenditure=rec.expenditure,
                    revenue=rec.revenue,
                    demographics=demographics,
                )
            )
    return ResponseLog(log.spec, tuple(out), provenance="anonymized")


@dataclass(frozen=True)
class PBProject:
    project_id: str
    cost: int

    def __post_init__(self) -> None:
        if self.cost <= 0:
            raise DataError(f"project {self.project_id!r}: cost must be positive")


@dataclass(frozen=True)
class PBVote:
    voter_id: str
    allocations: Mapping[str, int]  # project id -> amount, zero entries allowed
    start: datetime | None = None
    end: datetime | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "allocations", dict(self.allocations))

    @property
    def empty(self) -> bool:
        return not any(v > 0 for v in self.allocations.values())

    @property
    def duration(self) -> float:
        if self.start is None or self.end is None:
            raise DataError(f"voter {self.voter_id!r}: missing timing")
        return (self.end - self.start).total_seconds()


@dataclass(frozen=True)
class PBElectionLog:
    election_id: str
    budget: int
    projects: tuple[PBProject, ...]
    votes: tuple[PBVote, ...]  # in arrival order

    def __post_init__(self) -> None:
        ids = [p.project_id for p in self.projects]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate project ids")
        if self.budget <= 0:
            raise DataError("budget must be positive")


def load_pb_election(path: str) -> PBElectionLog:
    """Read a participatory election file.

    Line format: ``election,<id>``; ``budget,<amount>``; one
    ``project,<id>,<cost>`` per project; a ``votes`` header line; then one
    ``<voter>,<project>,<amount>,<start>,<end>`` row per positive
    allocation. Vote arrival order is the order of first appearance.
    """
    election_id = None
    budget = None
    projects: list[PBProject] = []
    votes: dict[str, dict] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        in_votes = False
        for line_no, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            key = row[0].strip()
            if not in_votes:
                if key == "election":
                    election_id = row[1].strip()
                elif key == "budget":
                    budget = int(row[1])
                elif key == "project":
                    projects.append(PBProject(row[1].strip(), int(row[2])))
                elif key == "votes":
                    in_votes = True
                else:
                    raise DataError(f"{path}:{line_no}: unexpected line {key!r}")
                continue
            if len(row) != 5:
                raise DataError(f"{path}:{line_no}: vote rows need 5 fields")
            voter, pid, amount, start, end = (c.strip() for c in row)
            entry = votes.setdefault(
                voter,
                {
                    "allocations": {},
                    "start": _parse_timestamp(start) if start else None,
                    "end": _parse_timestamp(end) if end else None,
                },
            )
            entry["allocations"][pid] = entry["allocations"].get(pid, 0) + int(amount)
    if election_id is None or budget is None:
        raise DataError(f"{path}: missing election id or budget")
    vote_list = tuple(
        PBVote(voter, data["allocations"], data["start"], data["end"])
        for voter, data in votes.items()
    )
    log = PBElectionLog(election_id, budget, tuple(projects), vote_list)
    _validate_pb(log)
    return log


def save_pb_election(log: PBElectionLog, path: str) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["election", log.election_id])
    writer.writerow(["budget", str(log.budget)])
    for p in log.projects:
        writer.writerow(["project", p.project_id, str(p.cost)])
    writer.writerow(["votes", "voter_id", "project_id", "amount", "start", "end"])
    for vote in log.votes:
        start = vote.start.astimezone(timezone.utc).replace(tzinfo=None).isoformat() if vote.start else ""
        end = vote.end.astimezone(timezone.utc).replace(tzinfo=None).isoformat() if vote.end else ""
        for pid, amount in vote.allocations.items():
            if amount > 0:
                writer.writerow([vote.voter_id, pid, str(amount), start, end])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def _validate_pb(log: PBElectionLog) -> None:
    costs = {p.project_id: p.cost for p in log.projects}
    for vote in log.votes:
        spent = 0
        for pid, amount in vote.allocations.items():
            if pid not in costs:
                raise DataError(f"voter {vote.voter_id!r}: unknown project {pid!r}")
            if amount < 0:
                raise DataError(f"voter {vote.voter_id!r}: negative allocation")
            if amount > costs[pid]:
                raise DataError(
                    f"voter {vote.voter_id!r}: allocation {amount} exceeds "
                    f"cost of {pid!r} ({costs[pid]})"
                )
            spent += amount
        if spent > log.budget:
            raise DataError(f"voter {vote.voter_id!r}: allocations exceed the budget")


def clean_pb_election(log: PBElectionLog, min_votes: int = 100) -> PBElectionLog:
    """Drop empty votes, trim timing outliers, enforce a minimum size.

    Empty votes (no positive allocation) are removed first. Then the
    floor(0.1 * n) fastest and equally many slowest voters by completion
    time are trimmed, ties broken by voter id. Fewer than ``min_votes``
    remaining rejects the election outright.
    """
    nonempty = [v for v in log.votes if not v.empty]
    if not nonempty:
        raise DataError(f"election {log.election_id!r}: every vote is empty")
    durations = {v.voter_id: v.duration for v in nonempty}  # raises on missing timing
    trim = len(nonempty) // 10
    by_speed = sorted(nonempty, key=lambda v: (durations[v.voter_id], v.voter_id))
    cut = {v.voter_id for v in by_speed[:trim]}
    if trim:
        cut |= {v.voter_id for v in by_speed[-trim:]}
    kept = tuple(v for v in nonempty if v.voter_id not in cut)
    if len(kept) < min_votes:
        raise DataError(
            f"election {log.election_id!r}: only {len(kept)} votes after "
            f"cleaning (minimum {min_votes})"
        )
    return PBElectionLog(log.election_id, log.budget, log.projects, kept)


def pb_feature_vectors(log: PBElectionLog) -> FeatureMatrix:
    """Voter-by-project matrix of approved cost portions in [0, 1]."""
    if not log.votes:
        raise DataError(f"election {log.election_id!r} has no votes")
    cols = tuple(p.project_id for p in log.projects)
    costs = np.array([p.cost for p in log.projects], dtype=float)
    values = np.zeros((len(log.votes), len(cols)))
    for i, vote in enumerate(log.votes):
        for j, pid in enumerate(cols):
            values[i, j] = vote.allocations.get(pid, 0) / costs[j]
    rows = tuple(v.voter_id for v in log.votes)
    return FeatureMatrix(values, rows, cols, np.ones(len(cols)))


def feature_matrix_from_log(
    log: ResponseLog, mode: str = "delta"
) -> FeatureMatrix:
    """Encode complete responses as raw ordinal features in schema order.

    Records missing any schema answer are dropped (listwise deletion); row
    order follows the log. Raw features are unnormalized; pass the result
    through normalization before clustering.
    """
    schema = build_schema(log.spec, mode)
    rows: list[str] = []
    vectors: list[np.ndarray] = []
    for rec in log.records:
        try:
            vec = encode_ordinal(rec, schema, log.spec)
        except DataError:
            continue
        rows.append(rec.respondent_id)
        vectors.append(vec)
    if not vectors:
        raise DataError("no complete responses to encode")
    return FeatureMatrix(
        np.vstack(vectors), tuple(rows), schema.qids, np.ones(len(schema.qids))
    )

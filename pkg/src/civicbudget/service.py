"""HTTP collection service: serve the spec, accept ballots, expose results.

Submissions are validated server side with the same ballot checks the
analysis pipeline applies, so nothing invalid is ever persisted. The store
is in memory and append-only; results are computed from immutable snapshots,
so readers never block writers.

Status codes on POST /api/ballot: 200 with a receipt, 400 for a payload
that does not parse into a response record, 403 for a failed residency
self-certification or challenge, 422 with the ValidationReport for a
well-formed but invalid ballot.
"""

from __future__ import annotations

import json
import os
import random
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .aggregate import AggregateBudget, knapsack_aggregate, tally_distribution
from .ballots import (
    UNANSWERED,
    BudgetSpec,
    ExpenditureBallot,
    LikertBallot,
    ResponseRecord,
    RevenueBallot,
    ValidationReport,
    answer_value,
    build_schema,
    validate_expenditure,
    validate_survey,
)
from .datastore import spec_from_wire, spec_to_wire
from .errors import DataError

PORT_ENV = "CIVICBUDGET_PORT"
ADMIN_TOKEN_ENV = "CIVICBUDGET_ADMIN_TOKEN"


@dataclass(frozen=True)
class SubmissionReceipt:
    """Issued only for accepted ballots."""

    receipt_id: str
    accepted_at: datetime
    validation: ValidationReport = field(default_factory=ValidationReport)


@dataclass(frozen=True)
class ServiceConfig:
    spec: BudgetSpec
    mode: str = "delta"
    admin_token: str = "change-me"
    challenge_token: str | None = None  # None disables the challenge check
    port: int = 8000
    token_seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in ("delta", "likert"):
            raise DataError(f"unknown mode {self.mode!r}")


def load_config(path: str) -> ServiceConfig:
    """Read a JSON config file; the environment overrides port and token.

    Keys: ``spec`` (inline spec document or a path relative to the config
    file), ``mode``, ``admin_token``, ``challenge_token``, ``port``,
    ``token_seed``.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or "spec" not in raw:
        raise DataError(f"{path}: config must be an object with a 'spec' key")
    spec_entry = raw["spec"]
    if isinstance(spec_entry, str):
        spec_path = os.path.join(os.path.dirname(os.path.abspath(path)), spec_entry)
        with open(spec_path, "r", encoding="utf-8") as fh:
            spec = spec_from_wire(json.load(fh))
    else:
        spec = spec_from_wire(spec_entry)
    port = int(os.environ.get(PORT_ENV, raw.get("port", 8000)))
    admin = os.environ.get(ADMIN_TOKEN_ENV, raw.get("admin_token", "change-me"))
    return ServiceConfig(
        spec=spec,
        mode=raw.get("mode", "delta"),
        admin_token=admin,
        challenge_token=raw.get("challenge_token"),
        port=port,
        token_seed=int(raw.get("token_seed", 0)),
    )


def static_challenge(expected: str | None) -> Callable[[str | None], bool]:
    """Deterministic stand-in for a human-verification widget.

    With ``expected`` None every request passes; otherwise the submitted
    token must equal the configured constant.
    """

    def check(token: str | None) -> bool:
        return expected is None or token == expected

    return check


class LiveLog:
    """Append-only response store, safe under a threaded server.

    Appends are serialized by one lock, which also mints the respondent id
    and the receipt token, so ids are unique by construction. ``snapshot``
    returns an immutable copy; readers never see a half-appended state.
    """

    def __init__(self, spec: BudgetSpec, token_seed: int = 0) -> None:
        self.spec = spec
        self._lock = threading.Lock()
        self._records: list[ResponseRecord] = []
        self._rng = random.Random(token_seed)

    def append(
        self,
        expenditure: ExpenditureBallot | LikertBallot | None,
        revenue: RevenueBallot | None,
        demographics: dict[str, str],
        timestamp: datetime,
    ) -> SubmissionReceipt:
        with self._lock:
            index = len(self._records)
            receipt_id = f"{index:06d}-{self._rng.getrandbits(40):010x}"
            record = ResponseRecord(
                respondent_id=f"w{index:06d}",
                timestamp=timestamp,
                expenditure=expenditure,
                revenue=revenue,
                demographics=demographics,
            )
            self._records.append(record)
        return SubmissionReceipt(receipt_id, timestamp)

    def snapshot(self) -> tuple[ResponseRecord, ...]:
        with self._lock:
            return tuple(self._records)

    @property
    def count(self) -> int:
        with self._lock:
            return len(self._records)


def report_to_wire(report: ValidationReport) -> dict:
    return {
        "valid": report.valid,
        "violations": [
            {"constraint": v.constraint, "area_id": v.area_id, "detail": v.detail}
            for v in report.violations
        ],
    }


def aggregate_to_wire(agg: AggregateBudget) -> dict:
    return {
        "weight_scheme_id": agg.weight_scheme_id,
        "changes": [
            {
                "area_id": c.area_id,
                "baseline_cents": c.baseline,
                "change_cents": c.change,
                "change_pct": c.change_pct,
            }
            for c in agg.changes
        ],
    }


class _Malformed(Exception):
    """Payload does not parse into a response record."""


def _require_int(key: str, value) -> int:
    # bool is an int subclass; a JSON true/false is still not an answer code
    if isinstance(value, bool) or not isinstance(value, int):
        raise _Malformed(f"answer {key!r} must be an integer, got {value!r}")
    return value


def parse_answers(
    spec: BudgetSpec, mode: str, answers
) -> tuple[ExpenditureBallot | LikertBallot | None, RevenueBallot | None, dict[str, str]]:
    """Build ballots from a wire answer mapping; structural errors only.

    Keys follow the response-table columns: ``exp:<area>`` holding a change
    from baseline in cents (delta mode), ``lik:<area>`` (five-point mode),
    ``fee:<category>``, ``tax``, and ``dem:<axis>``. Null values count as
    unanswered. Semantic problems (coverage, domain, balance, grid, floor)
    are left for ballot validation so they reach the ValidationReport.
    """
    if not isinstance(answers, dict):
        raise _Malformed("'answers' must be an object")
    exp_deltas: dict[str, int] = {}
    lik_levels: dict[str, int] = {}
    fee_levels: dict[str, int] = {}
    tax: int | None = None
    demographics = {ax.axis_id: UNANSWERED for ax in spec.demographic_axes}
    for key, value in answers.items():
        if not isinstance(key, str):
            raise _Malformed(f"answer key {key!r} is not a string")
        if value is None:
            continue
        if key == "tax":
            tax = _require_int(key, value)
        elif key.startswith("exp:"):
            if mode != "delta":
                raise _Malformed(f"{key!r} not asked in five-point mode")
            exp_deltas[key[4:]] = _require_int(key, value)
        elif key.startswith("lik:"):
            if mode != "likert":
                raise _Malformed(f"{key!r} not asked in allocation mode")
            lik_levels[key[4:]] = _require_int(key, value)
        elif key.startswith("fee:"):
            fee_levels[key[4:]] = _require_int(key, value)
        elif key.startswith("dem:"):
            axis = key[4:]
            if axis not in demographics:
                raise _Malformed(f"unknown demographic axis {axis!r}")
            if not isinstance(value, str):
                raise _Malformed(f"answer {key!r} must be a string, got {value!r}")
            demographics[axis] = value if value.strip() else UNANSWERED
        else:
            raise _Malformed(f"unknown question key {key!r}")

    expenditure: ExpenditureBallot | LikertBallot | None = None
    if exp_deltas:
        # unknown areas keep the raw value; validation flags the key itself
        expenditure = ExpenditureBallot(
            {
                aid: (spec.area(aid).baseline + d if aid in spec.area_ids else d)
                for aid, d in exp_deltas.items()
            }
        )
    elif lik_levels:
        expenditure = LikertBallot(lik_levels)

    revenue: RevenueBallot | None = None
    if fee_levels or tax is not None:
        revenue = RevenueBallot(property_tax=tax, fee_levels=fee_levels)

    if expenditure is None and revenue is None and all(
        v == UNANSWERED for v in demographics.values()
    ):
        raise _Malformed("submission carries no answers")
    return expenditure, revenue, demographics


def validate_submission(
    spec: BudgetSpec,
    expenditure: ExpenditureBallot | LikertBallot | None,
    revenue: RevenueBallot | None,
) -> ValidationReport:
    """Every check the analysis loader would apply, merged into one report."""
    violations = []
    if isinstance(expenditure, ExpenditureBallot):
        violations.extend(validate_expenditure(spec, expenditure).violations)
    likert = expenditure if isinstance(expenditure, LikertBallot) else None
    violations.extend(validate_survey(spec, revenue, likert).violations)
    return ValidationReport(tuple(violations))


def compute_results(spec: BudgetSpec, mode: str, records) -> dict:
    """Results document over one snapshot: counts, distributions, aggregate."""
    records = list(records)
    daily: dict[str, int] = {}
    for rec in records:
        day = rec.timestamp.date().isoformat()
        daily[day] = daily.get(day, 0) + 1

    distributions = {}
    for q in build_schema(spec, mode).questions:
        if q.kind == "delta":
            continue  # allocation answers feed the aggregate, not a tally
        answers = [answer_value(rec, q) for rec in records]
        if all(a is None for a in answers):
            continue
        dist = tally_distribution(answers, q.qid)
        distributions[q.qid] = {
            "proportions": {str(k): v for k, v in sorted(dist.proportions.items())},
            "n": dist.n,
        }

    aggregate = None
    ballots = [
        rec.expenditure for rec in records if isinstance(rec.expenditure, ExpenditureBallot)
    ]
    if ballots:
        aggregate = aggregate_to_wire(knapsack_aggregate(spec, ballots))

    return {
        "count": len(records),
        "daily_counts": dict(sorted(daily.items())),
        "distributions": distributions,
        "aggregate": aggregate,
    }


def create_app(
    config: ServiceConfig,
    challenge: Callable[[str | None], bool] | None = None,
    clock: Callable[[], datetime] | None = None,
) -> FastAPI:
    """Wire the service together; dependencies are injectable for tests."""
    check_challenge = challenge or static_challenge(config.challenge_token)
    now = clock or (lambda: datetime.now(timezone.utc))
    app = FastAPI(title="civicbudget collection service", docs_url=None, redoc_url=None)
    log = LiveLog(config.spec, token_seed=config.token_seed)
    app.state.log = log
    app.state.config = config
    spec_wire = spec_to_wire(config.spec)
    spec_wire["mode"] = config.mode

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "responses": log.count}

    @app.get("/api/spec")
    def get_spec() -> dict:
        return spec_wire

    @app.post("/api/ballot")
    async def submit_ballot(request: Request) -> JSONResponse:
        try:
            body = json.loads(await request.body())
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            return _malformed(f"body is not valid JSON: {exc}")
        if not isinstance(body, dict):
            return _malformed("body must be a JSON object")

        if body.get("self_cert") is not True:
            return _forbidden("residency self-certification is required")
        token = body.get("challenge_token")
        if token is not None and not isinstance(token, str):
            return _malformed("'challenge_token' must be a string")
        if not check_challenge(token):
            return _forbidden("challenge failed")

        try:
            expenditure, revenue, demographics = parse_answers(
                config.spec, config.mode, body.get("answers")
            )
        except _Malformed as exc:
            return _malformed(str(exc))

        report = validate_submission(config.spec, expenditure, revenue)
        if not report.valid:
            return JSONResponse(
                status_code=422,
                content={"error": "invalid_ballot", "validation": report_to_wire(report)},
            )

        receipt = log.append(expenditure, revenue, demographics, now())
        return JSONResponse(
            status_code=200,
            content={
                "receipt_id": receipt.receipt_id,
                "accepted_at": receipt.accepted_at.isoformat(),
                "validation": report_to_wire(receipt.validation),
            },
        )

    @app.get("/api/results")
    def get_results(token: str = "") -> JSONResponse:
        if token != config.admin_token:
            return _forbidden("bad admin token")
        return JSONResponse(
            status_code=200,
            content=compute_results(config.spec, config.mode, log.snapshot()),
        )

    return app


def _malformed(detail: str) -> JSONResponse:
    return JSONResponse(status_code=400, content={"error": "malformed", "detail": detail})


def _forbidden(detail: str) -> JSONResponse:
    return JSONResponse(status_code=403, content={"error": "not_authorized", "detail": detail})

"""Command-line front door for the toolkit.

Every randomized subcommand takes an explicit --seed, so reruns are byte
identical. Exit codes: 0 success, 1 usage, 2 data error, 3 infeasible.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from operator import attrgetter

import numpy as np

from . import fixtures
from .aggregate import (
    AggregateBudget,
    AreaChange,
    knapsack_aggregate,
    pb_knapsack_tally,
    scenarios_from_centroids,
    tally_distribution,
)
from .ballots import (
    UNANSWERED,
    BudgetSpec,
    ExpenditureBallot,
    LikertBallot,
    Question,
    Segmentation,
    answer_category,
    answer_value,
    assign_segment,
    build_schema,
    encode_ordinal,
)
from .cluster import (
    assign_label,
    bootstrap_stability,
    gap_statistic,
    kmeans_fit,
    load_model,
    normalize_features,
    save_model,
)
from .datastore import (
    ResponseLog,
    _parse_timestamp,
    clean_pb_election,
    feature_matrix_from_log,
    load_pb_election,
    load_responses,
    load_spec,
    save_pb_election,
    save_responses,
)
from .errors import DataError, InfeasibleError
from .progression import (
    bands_for,
    cumulative_cluster_fraction,
    daily_cluster_proportions,
    scan_excursions,
)
from .report import (
    ReportBundle,
    Table,
    aggregate_table,
    crosstab_table,
    daily_plot_series,
    format_prop,
    format_stat,
    gap_table,
    progression_plot_series,
    stat_tests_table,
    write_bundle,
)
from .simulator import ClusterProfile, PopulationProfile, Shock, TurnoutSchedule, simulate
from .stats import (
    chi_square_gof,
    crosstab,
    poststratification_weights,
    spearman_rho,
    weights_for_records,
)


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage problems; this toolkit reserves 2 for data."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already wrote its message
        code = exc.code
        return code if isinstance(code, int) else 1
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="civicbudget", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a response file, listing rejected rows")
    p.add_argument("--spec", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("aggregate", help="compute the balanced consensus budget")
    p.add_argument("--spec", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--weights", help="respondent weight file from `reweight`")
    p.add_argument("--out")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("tally", help="per-question answer distributions")
    p.add_argument("--spec")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--weights")
    p.add_argument("--pb", action="store_true", help="treat input as a participatory election")
    p.add_argument("--out")
    p.set_defaults(func=cmd_tally)

    p = sub.add_parser("cluster", help="fit opinion clusters")
    p.add_argument("--spec", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--boots", type=int, help="bootstrap resamples for a stability report")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("gap", help="choose the cluster count by the gap statistic")
    p.add_argument("--spec", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--kmax", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--boots", type=int, default=10, help="reference draws")
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gap)

    p = sub.add_parser("progression", help="arrival-order band diagnostics")
    p.add_argument("--spec", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--model", required=True, help="cluster model file from `cluster`")
    p.add_argument("--z", default="1,2", help="comma-separated band levels")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_progression)

    p = sub.add_parser("reweight", help="post-stratification weights for one axis")
    p.add_argument("--spec", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--axis", required=True)
    p.add_argument("--target", required=True, help="marginals file, or 'acs2018'")
    p.add_argument("--out")
    p.set_defaults(func=cmd_reweight)

    p = sub.add_parser("crosstab", help="cross-tabulate two answer keys")
    p.add_argument("--spec", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--rows", required=True, help="question id, dem:<axis>, or 'segment'")
    p.add_argument("--cols", required=True)
    p.add_argument("--segments", help="start,cut...,end dates for the 'segment' key")
    p.add_argument("--out")
    p.set_defaults(func=cmd_crosstab)

    p = sub.add_parser("scenarios", help="readable answer profiles from a cluster model")
    p.add_argument("--model", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_scenarios)

    p = sub.add_parser("simulate", help="draw a synthetic response stream")
    p.add_argument("--spec", required=True)
    p.add_argument("--profile", required=True, help="population and turnout config (JSON)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="response CSV path; labels written beside it")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("clean-pb", help="clean a participatory election log")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--min-votes", type=int, default=100)
    p.add_argument("--out")
    p.set_defaults(func=cmd_clean_pb)

    p = sub.add_parser("report", help="emit result tables and figures")
    p.add_argument("--fixtures", choices=["published-tables"], help="render the shipped reference tables")
    p.add_argument("--spec")
    p.add_argument("--in", dest="infile")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="run the collection service")
    p.add_argument("--config", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve)

    return parser


# ---------------------------------------------------------------- helpers


def _spec_arg(value: str) -> BudgetSpec:
    if value == "austin2020":
        return fixtures.austin_2020_spec()
    if value == "austin2021":
        return fixtures.austin_2021_spec()
    return load_spec(value)


def _load_log(path: str, spec: BudgetSpec) -> ResponseLog:
    result = load_responses(path, spec)
    if result.rejected:
        print(f"note: {len(result.rejected)} invalid rows excluded", file=sys.stderr)
    return result.log


def _mode_of_log(log: ResponseLog) -> str:
    return "likert" if any(isinstance(r.expenditure, LikertBallot) for r in log.records) else "delta"


def _emit(table: Table, out: str | None) -> None:
    if out:
        table.write(out)
    else:
        sys.stdout.write(table.to_csv())


def _read_weights(path: str) -> dict[str, float]:
    import csv as _csv

    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["respondent_id", "weight"]:
            raise DataError(f"{path}: expected header respondent_id,weight")
        out: dict[str, float] = {}
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            try:
                out[row[0]] = float(row[1])
            except (IndexError, ValueError) as exc:
                raise DataError(f"{path}: bad weight row {row!r}") from exc
    if not out:
        raise DataError(f"{path}: no weights")
    return out


def _coded_answer(spec: BudgetSpec, rec, q: Question) -> int | None:
    raw = answer_value(rec, q)
    if raw is None:
        return None
    if q.kind == "delta":
        return (raw - spec.area(q.key).baseline) // spec.increment
    return raw


def _parse_segments(text: str) -> Segmentation:
    """start,cut...,end — at least two dates, each ISO, naive read as UTC."""
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if len(parts) < 2:
        raise DataError("--segments needs at least start,end")
    try:
        stamps = [_parse_timestamp(p) for p in parts]
    except ValueError as exc:
        raise DataError(f"--segments: {exc}") from exc
    return Segmentation(start=stamps[0], end=stamps[-1], cuts=tuple(stamps[1:-1]))


def _parse_z(text: str) -> tuple[float, ...]:
    try:
        levels = tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError as exc:
        raise DataError(f"--z: {exc}") from exc
    if not levels or any(z <= 0 for z in levels):
        raise DataError("--z needs positive levels like 1,2")
    return levels


def _normalized_matrix(log: ResponseLog, mode: str):
    raw = feature_matrix_from_log(log, mode)
    return normalize_features(raw.values, raw.rows, raw.columns)


_KIND_BY_PREFIX = {"exp": "delta", "lik": "likert", "fee": "fee"}


def _kind_of_qid(qid: str) -> str:
    if qid == "tax":
        return "tax"
    prefix = qid.split(":", 1)[0]
    if ":" in qid and prefix in _KIND_BY_PREFIX:
        return _KIND_BY_PREFIX[prefix]
    raise DataError(f"cannot infer the question kind of {qid!r}")


# ------------------------------------------------------------- subcommands


def cmd_validate(args) -> int:
    spec = _spec_arg(args.spec)
    result = load_responses(args.infile, spec)
    rows = tuple((str(r.line_no), r.reason) for r in result.rejected)
    print(f"{result.log.n} valid, {len(result.rejected)} rejected")
    if rows or args.out:
        _emit(Table("rejected", ("line", "reason"), rows), args.out)
    return 0


def cmd_aggregate(args) -> int:
    spec = _spec_arg(args.spec)
    log = _load_log(args.infile, spec)
    scheme_id = None
    if args.weights:
        wmap = _read_weights(args.weights)
        scheme_id = os.path.basename(args.weights)
        pairs = [
            (r.expenditure, wmap[r.respondent_id])
            for r in log.records
            if isinstance(r.expenditure, ExpenditureBallot) and r.respondent_id in wmap
        ]
        ballots = [b for b, _ in pairs]
        weights = [w for _, w in pairs]
    else:
        ballots = [r.expenditure for r in log.records if isinstance(r.expenditure, ExpenditureBallot)]
        weights = None
    agg = knapsack_aggregate(spec, ballots, weights, scheme_id)
    names = {a.area_id: a.name for a in spec.areas}
    _emit(aggregate_table("aggregate", agg, names), args.out)
    return 0


def cmd_tally(args) -> int:
    if args.pb:
        election = load_pb_election(args.infile)
        tally = pb_knapsack_tally(election)
        rows = tuple(
            (
                p.project_id,
                str(tally.approvals.get(p.project_id, 0)),
                str(p.cost),
                "selected" if p.project_id in tally.winners else "",
            )
            for p in election.projects
        )
        _emit(Table("tally", ("project", "approvals", "cost", "outcome"), rows), args.out)
        return 0
    if not args.spec:
        raise DataError("tally over responses needs --spec")
    spec = _spec_arg(args.spec)
    log = _load_log(args.infile, spec)
    mode = _mode_of_log(log)
    records = list(log.records)
    weights = None
    if args.weights:
        wmap = _read_weights(args.weights)
        records = [r for r in records if r.respondent_id in wmap]
        weights = [wmap[r.respondent_id] for r in records]
        if not records:
            raise DataError("no responses carry a weight")
    rows: list[tuple[str, ...]] = []
    for q in build_schema(spec, mode).questions:
        answers = [_coded_answer(spec, r, q) for r in records]
        if all(a is None for a in answers):
            continue
        dist = tally_distribution(answers, q.qid, weights)
        for value in sorted(dist.proportions):
            rows.append((q.qid, str(value), format_prop(dist.proportions[value]), str(dist.n)))
    if not rows:
        raise DataError("no answered questions to tally")
    _emit(Table("tally", ("question", "value", "share", "n"), tuple(rows)), args.out)
    return 0


def cmd_cluster(args) -> int:
    spec = _spec_arg(args.spec)
    log = _load_log(args.infile, spec)
    matrix = _normalized_matrix(log, _mode_of_log(log))
    model = kmeans_fit(matrix, args.k, seed=args.seed, restarts=args.restarts)
    os.makedirs(args.out, exist_ok=True)
    save_model(model, os.path.join(args.out, "model.tsv"))
    labels = Table(
        "labels",
        ("respondent_id", "cluster"),
        tuple((rid, str(int(lab))) for rid, lab in zip(matrix.rows, model.labels)),
    )
    labels.write(os.path.join(args.out, "labels.csv"))
    denorm = model.denormalized_centroids()
    centroids = Table(
        "centroids",
        ("cluster",) + model.columns,
        tuple(
            (str(c),) + tuple(format_stat(x) for x in denorm[c]) for c in range(model.k)
        ),
    )
    centroids.write(os.path.join(args.out, "centroids.csv"))
    sizes = np.bincount(model.labels, minlength=args.k)
    print(f"k={args.k} inertia={model.inertia!r} sizes={list(map(int, sizes))}")
    if matrix.dropped:
        print(f"note: constant columns dropped: {', '.join(matrix.dropped)}", file=sys.stderr)
    if args.boots:
        rep = bootstrap_stability(
            matrix, args.k, resamples=args.boots, seed=args.seed, restarts=args.restarts
        )
        print(f"bootstrap accuracy={rep.accuracy:.4f} over {rep.resamples - rep.dropped} resamples")
    return 0


def cmd_gap(args) -> int:
    spec = _spec_arg(args.spec)
    log = _load_log(args.infile, spec)
    matrix = _normalized_matrix(log, _mode_of_log(log))
    curve = gap_statistic(
        matrix, args.kmax, reference_draws=args.boots, seed=args.seed, restarts=args.restarts
    )
    _emit(gap_table("gap", curve), args.out)
    print(f"chosen k: {curve.chosen_k}")
    return 0


def cmd_progression(args) -> int:
    spec = _spec_arg(args.spec)
    log = _load_log(args.infile, spec)
    mode = _mode_of_log(log)
    model = load_model(args.model)
    schema = build_schema(spec, mode)
    index = {qid: i for i, qid in enumerate(schema.qids)}
    try:
        cols = [index[c] for c in model.columns]
    except KeyError as exc:
        raise DataError(f"model question {exc.args[0]!r} is not in this exercise") from exc
    z_levels = _parse_z(args.z)
    labels: list[int] = []
    times = []
    for rec in sorted(log.records, key=attrgetter("timestamp")):
        try:
            raw = encode_ordinal(rec, schema, spec)
        except DataError:
            continue  # incomplete answers cannot be assigned a cluster
        labels.append(assign_label(model, raw[cols] / model.scales))
        times.append(rec.timestamp)
    if not labels:
        raise DataError("no complete responses to order")
    series = cumulative_cluster_fraction(labels)
    bands = bands_for(series)
    excursions = scan_excursions(series, bands, z_levels)
    exc_rows = tuple(
        (str(c), f"{z:g}", str(run.start), str(run.end), str(run.length))
        for c, by_z in excursions.intervals.items()
        for z in z_levels
        for run in by_z[z]
    )
    bundle = ReportBundle(
        tables={"excursions": Table("excursions", ("cluster", "z", "start", "end", "length"), exc_rows)},
        series={
            "progression": progression_plot_series("progression", series, bands, z_levels),
            "daily_proportions": daily_plot_series(
                "daily_proportions", daily_cluster_proportions(times, labels)
            ),
        },
    )
    write_bundle(bundle, args.out)
    print(f"n={series.total} max_z={excursions.max_z:.3f}")
    for c, by_z in excursions.intervals.items():
        for z in z_levels:
            for run in by_z[z]:
                print(f"cluster {c}: beyond {z:g} sigma at positions {run.start}..{run.end}")
    return 0


def cmd_reweight(args) -> int:
    spec = _spec_arg(args.spec)
    log = _load_log(args.infile, spec)
    try:
        spec.axis(args.axis)  # unknown axis fails before any work
    except KeyError:
        raise DataError(f"unknown demographic axis {args.axis!r}") from None
    if args.target == "acs2018":
        marginals = fixtures.acs_marginals()
    else:
        with open(args.target, "r", encoding="utf-8") as fh:
            marginals = json.load(fh)
    if args.axis in marginals and isinstance(marginals[args.axis], dict):
        target = marginals[args.axis]
    elif all(isinstance(v, (int, float)) for v in marginals.values()):
        target = marginals
    else:
        raise DataError(f"{args.target}: no marginal for axis {args.axis!r}")
    cats = [answer_category(r, args.axis) for r in log.records]
    scheme = poststratification_weights(cats, args.axis, target)
    kept, weights = weights_for_records(log.records, scheme)
    if args.out:
        Table(
            "weights",
            ("respondent_id", "weight"),
            tuple((r.respondent_id, format_stat(w)) for r, w in zip(kept, weights)),
        ).write(args.out)
    summary = Table(
        "weight_scheme",
        ("category", "weight"),
        tuple((c, format_stat(w)) for c, w in sorted(scheme.category_weights.items())),
    )
    sys.stdout.write(summary.to_csv())
    print(f"{len(kept)} of {log.n} responses answered {args.axis!r}")
    return 0


def cmd_crosstab(args) -> int:
    spec = _spec_arg(args.spec)
    log = _load_log(args.infile, spec)
    mode = _mode_of_log(log)
    schema = build_schema(spec, mode)
    segmentation = _parse_segments(args.segments) if args.segments else None

    def getter(key: str):
        if key == "segment":
            if segmentation is None:
                raise DataError("the 'segment' key needs --segments")
            return lambda rec: str(assign_segment(rec.timestamp, segmentation))
        if key.startswith("dem:"):
            axis = key[4:]
            try:
                spec.axis(axis)
            except KeyError:
                raise DataError(f"unknown demographic axis {axis!r}") from None
            return lambda rec: (
                None if (c := answer_category(rec, axis)) == UNANSWERED else c
            )
        try:
            q = schema.question(key)
        except KeyError:
            raise DataError(f"unknown answer key {key!r}") from None
        return lambda rec: (
            None if (v := _coded_answer(spec, rec, q)) is None else str(v)
        )

    row_of = getter(args.rows)
    col_of = getter(args.cols)
    pairs = [
        (r, c)
        for rec in log.records
        if (r := row_of(rec)) is not None and (c := col_of(rec)) is not None
    ]
    if not pairs:
        raise DataError("no responses answered both keys")
    ct = crosstab(
        pairs,
        _sorted_categories(p[0] for p in pairs),
        _sorted_categories(p[1] for p in pairs),
        row_label=args.rows,
        col_label=args.cols,
    )
    _emit(crosstab_table("crosstab", ct), args.out)
    return 0


def _sorted_categories(values) -> tuple[str, ...]:
    cats = sorted(set(values))
    try:
        return tuple(sorted(cats, key=int))
    except ValueError:
        return tuple(cats)


def cmd_scenarios(args) -> int:
    model = load_model(args.model)
    questions = [(qid, _kind_of_qid(qid)) for qid in model.columns]
    sset = scenarios_from_centroids(model.denormalized_centroids(), questions)
    rows = tuple(
        (sc.scenario_id, qid, str(level))
        for sc in sset.scenarios
        for qid, level in sc.levels.items()
    )
    _emit(Table("scenarios", ("scenario", "question", "level"), rows), args.out)
    if sset.dropped:
        print(f"no contrast (dropped): {', '.join(sset.dropped)}")
    return 0


def cmd_simulate(args) -> int:
    spec = _spec_arg(args.spec)
    with open(args.profile, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    try:
        profile, schedule, mode = _profile_from_wire(cfg)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{args.profile}: bad profile ({exc})") from exc
    result = simulate(profile, schedule, spec, seed=args.seed, mode=mode)
    save_responses(result.log, args.out, mode=mode)
    labels_path = os.path.splitext(args.out)[0] + "_labels.csv"
    Table(
        "labels",
        ("respondent_id", "cluster"),
        tuple(
            (rec.respondent_id, str(lab))
            for rec, lab in zip(result.log.records, result.labels)
        ),
    ).write(labels_path)
    counts = np.bincount(result.labels, minlength=len(profile.clusters))
    print(f"{result.log.n} responses over {schedule.horizon_days} days; "
          f"cluster sizes {list(map(int, counts))}")
    return 0


def _profile_from_wire(cfg: dict) -> tuple[PopulationProfile, TurnoutSchedule, str]:
    mode = cfg.get("mode", "delta")
    clusters = tuple(
        ClusterProfile(
            means={str(k): float(v) for k, v in c["means"].items()},
            noise=float(c.get("noise", 0.5)),
            demographics=c.get("demographics"),
        )
        for c in cfg["clusters"]
    )
    rates = tuple(float(c["rate"]) for c in cfg["clusters"])
    shock = None
    if "shock" in cfg and cfg["shock"] is not None:
        s = cfg["shock"]
        shock = Shock(int(s["day"]), int(s["duration"]), tuple(float(m) for m in s["multipliers"]))
    start = cfg.get("start", "2020-05-01")
    schedule = TurnoutSchedule(
        horizon_days=int(cfg["horizon_days"]),
        base_rates=rates,
        shock=shock,
        start=_parse_timestamp(start),
    )
    return PopulationProfile(clusters), schedule, mode


def cmd_clean_pb(args) -> int:
    election = load_pb_election(args.infile)
    cleaned = clean_pb_election(election, min_votes=args.min_votes)
    if args.out:
        save_pb_election(cleaned, args.out)
    print(
        f"election {election.election_id}: {len(election.votes)} votes in, "
        f"{len(cleaned.votes)} kept"
    )
    return 0


def cmd_report(args) -> int:
    if args.fixtures == "published-tables":
        bundle = published_tables_bundle()
    else:
        if not (args.spec and args.infile):
            raise DataError("report needs --fixtures published-tables, or --spec with --in")
        bundle = _dataset_bundle(_spec_arg(args.spec), args.infile)
    written = write_bundle(bundle, args.out)
    for path in written:
        print(path)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app, load_config

    config = load_config(args.config)
    uvicorn.run(create_app(config), host=args.host, port=config.port, log_level="warning")
    return 0


# ----------------------------------------------------------- report bundles


def _dataset_bundle(spec: BudgetSpec, infile: str) -> ReportBundle:
    result = load_responses(infile, spec)
    log = result.log
    mode = _mode_of_log(log)
    tables: dict[str, Table] = {}
    rows: list[tuple[str, ...]] = []
    for q in build_schema(spec, mode).questions:
        answers = [_coded_answer(spec, r, q) for r in log.records]
        if all(a is None for a in answers):
            continue
        dist = tally_distribution(answers, q.qid)
        for value in sorted(dist.proportions):
            rows.append((q.qid, str(value), format_prop(dist.proportions[value]), str(dist.n)))
    tables["distributions"] = Table("distributions", ("question", "value", "share", "n"), tuple(rows))
    ballots = [r.expenditure for r in log.records if isinstance(r.expenditure, ExpenditureBallot)]
    if ballots:
        names = {a.area_id: a.name for a in spec.areas}
        tables["aggregate"] = aggregate_table(
            "aggregate", knapsack_aggregate(spec, ballots), names
        )
    daily: dict[str, int] = {}
    for rec in log.records:
        day = rec.timestamp.date().isoformat()
        daily[day] = daily.get(day, 0) + 1
    tables["daily_counts"] = Table(
        "daily_counts",
        ("day", "responses"),
        tuple((d, str(n)) for d, n in sorted(daily.items())),
    )
    return ReportBundle(tables=tables, series={})


def published_tables_bundle() -> ReportBundle:
    """The shipped reference tables, formatted without recomputation.

    Statistical results in the bundle come from the stats module run on the
    shipped counts; the formatting layer adds nothing.
    """
    tables: dict[str, Table] = {}
    for year in (2020, 2021):
        fee = fixtures.fee_change_table(year)
        tables[f"fee_change_{year}"] = Table(
            f"fee_change_{year}",
            ("category",) + fixtures.FEE_LEVEL_COLUMNS,
            tuple((cat,) + tuple(format_prop(v) for v in props) for cat, props in fee.items()),
        )
        budget = fixtures.budget_change_table(year)
        tables[f"budget_change_{year}"] = Table(
            f"budget_change_{year}",
            ("area",) + fixtures.BUDGET_LEVEL_COLUMNS,
            tuple((area,) + tuple(format_prop(v) for v in props) for area, props in budget.items()),
        )

    rows_2020 = fixtures.aggregate_2020_table()
    agg = AggregateBudget(
        tuple(AreaChange(r["area"], r["baseline_cents"], r["change_cents"]) for r in rows_2020),
        None,
    )
    tables["aggregate_2020"] = aggregate_table(
        "aggregate_2020", agg, {r["area"]: r["name"] for r in rows_2020}
    )

    ct, row_codes, col_codes = fixtures.followup_crosstab()
    tables["followup_crosstab"] = crosstab_table("followup_crosstab", ct)

    entries: list[tuple[str, float, int | None, float]] = []
    scen = fixtures.followup_scenario_counts()
    for block in ("revenue", "expenditure"):
        counts = np.asarray(scen[block]["counts_by_cluster"], dtype=float)
        pooled = counts.sum(axis=0)
        for c in range(counts.shape[0]):
            g = chi_square_gof(counts[c], pooled)
            entries.append((f"{block}_scenario_cluster{c}_vs_pooled", g.statistic, g.df, g.p_value))
    agreement = np.asarray(fixtures.followup_agreement_counts()["counts_by_cluster"], dtype=float)
    pooled = agreement.sum(axis=0)
    for c in range(agreement.shape[0]):
        g = chi_square_gof(agreement[c], pooled)
        entries.append((f"police_agreement_cluster{c}_vs_pooled", g.statistic, g.df, g.p_value))
    sp = spearman_rho(ct, row_scores=row_codes, col_scores=col_codes)
    entries.append(("size_vs_agreement_spearman", sp.rho, None, sp.p_value))
    tables["followup_tests"] = stat_tests_table("followup_tests", entries)

    pb = fixtures.pb_cluster_table()
    tables["pb_optimal_clusters"] = Table(
        "pb_optimal_clusters",
        ("election_id", "votes", "clusters"),
        tuple((str(r["election_id"]), str(r["votes"]), str(r["clusters"])) for r in pb),
    )
    return ReportBundle(tables=tables, series={})


if __name__ == "__main__":
    sys.exit(main())

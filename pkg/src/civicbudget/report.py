"""Deterministic rendering of analysis outputs as tables and figures.

Nothing in this module computes a statistic. Builders take finished module
outputs (distributions, aggregates, cross-tabs, test results, curves) and
format them; emitters write delimited tables and SVG figures whose bytes are
stable across reruns, so outputs can be golden-file tested.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from typing import Mapping, Sequence

import matplotlib
from matplotlib.figure import Figure

from .aggregate import AggregateBudget, Distribution
from .cluster import GapCurve
from .errors import DataError
from .progression import BandSpec, DailyProportions, ProgressionSeries
from .stats import CrossTab

# one fixed salt so the SVG backend's generated ids never vary run to run
SVG_HASH_SALT = "civicbudget"


def format_cents(cents: int) -> str:
    """Integer cents as a dollar amount with thousands separators, exactly."""
    sign = "-" if cents < 0 else ""
    dollars, rem = divmod(abs(int(cents)), 100)
    return f"{sign}{dollars:,}.{rem:02d}"


def format_pct(x: float) -> str:
    return f"{x:.2f}%"


def format_prop(p: float) -> str:
    return f"{p:.3f}"


def format_stat(x: float) -> str:
    # repr round-trips the float, keeping the table equal to the module output
    return repr(float(x))


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]

    def __post_init__(self) -> None:
        for r in self.rows:
            if len(r) != len(self.columns):
                raise ValueError(f"table {self.name!r}: row width {len(r)} != {len(self.columns)}")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        writer.writerows(self.rows)
        return buf.getvalue()

    def write(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())


@dataclass(frozen=True)
class PlotSeries:
    """One figure's worth of curves over a shared x axis.

    ``curves`` are the data lines; ``mean`` and ``bands`` are null-reference
    lines drawn in muted styles (a band label containing "1sd" renders
    dashed, other bands dotted).
    """

    name: str
    x: tuple[float, ...]
    curves: tuple[tuple[str, tuple[float, ...]], ...]
    bands: tuple[tuple[str, tuple[float, ...]], ...] = ()
    mean: tuple[float, ...] | None = None
    x_label: str = "position"
    y_label: str = "fraction"
    x_ticks: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        n = len(self.x)
        for label, ys in self.curves + self.bands:
            if len(ys) != n:
                raise ValueError(f"series {label!r}: {len(ys)} points over {n} x values")
        if self.mean is not None and len(self.mean) != n:
            raise ValueError("mean length does not match x")


@dataclass(frozen=True)
class ReportBundle:
    tables: Mapping[str, Table]
    series: Mapping[str, PlotSeries]

    def __post_init__(self) -> None:
        object.__setattr__(self, "tables", dict(self.tables))
        object.__setattr__(self, "series", dict(self.series))


def distribution_table(
    name: str,
    dists: Mapping[str, Distribution],
    levels: Sequence[int],
    level_names: Sequence[str],
    key_column: str = "question",
    row_names: Mapping[str, str] | None = None,
) -> Table:
    """Answer-share table: one row per question, one column per level."""
    if len(levels) != len(level_names):
        raise ValueError("levels and level_names differ in length")
    rows = []
    for qid, dist in dists.items():
        label = row_names.get(qid, qid) if row_names else qid
        rows.append(
            (label,) + tuple(format_prop(dist.proportions.get(lv, 0.0)) for lv in levels)
        )
    return Table(name, (key_column,) + tuple(level_names), tuple(rows))


def aggregate_table(
    name: str, agg: AggregateBudget, area_names: Mapping[str, str] | None = None
) -> Table:
    rows = []
    for c in agg.changes:
        label = area_names.get(c.area_id, c.area_id) if area_names else c.area_id
        rows.append(
            (
                c.area_id,
                label,
                format_cents(c.baseline),
                format_cents(c.change),
                format_pct(c.change_pct),
            )
        )
    return Table(name, ("area", "name", "baseline", "change", "change_pct"), tuple(rows))


def crosstab_table(name: str, ct: CrossTab) -> Table:
    rows = tuple(
        (rc,) + tuple(str(int(v)) for v in ct.counts[i])
        for i, rc in enumerate(ct.row_categories)
    )
    return Table(name, (ct.row_label,) + tuple(ct.col_categories), rows)


def stat_tests_table(
    name: str, entries: Sequence[tuple[str, float, int | None, float]]
) -> Table:
    """Rows of (label, statistic, degrees of freedom, p-value)."""
    rows = tuple(
        (label, format_stat(stat), "" if df is None else str(df), format_stat(p))
        for label, stat, df, p in entries
    )
    return Table(name, ("test", "statistic", "df", "p_value"), rows)


def gap_table(name: str, curve: GapCurve) -> Table:
    rows = tuple(
        (
            str(k),
            format_stat(curve.gaps[i]),
            format_stat(curve.errors[i]),
            format_stat(curve.log_inertia[i]),
            "chosen" if k == curve.chosen_k else "",
        )
        for i, k in enumerate(curve.ks)
    )
    return Table(name, ("k", "gap", "se", "log_within_dispersion", "selected"), rows)


def progression_plot_series(
    name: str,
    series: ProgressionSeries,
    bands: BandSpec,
    z_levels: Sequence[float] = (1.0, 2.0),
) -> PlotSeries:
    """Completion curves with shared display bands.

    Band sigma differs by cluster size, so the displayed band at each z is
    the widest one (pointwise max over clusters): a curve outside the drawn
    band is outside its own cluster's band as well.
    """
    if series.total != bands.total or series.cluster_ids != bands.cluster_ids:
        raise ValueError("series and bands describe different label sets")
    x = tuple(float(i) for i in range(1, series.total + 1))
    curves = tuple(
        (str(c), tuple(float(v) for v in series.series[i]))
        for i, c in enumerate(series.cluster_ids)
    )
    sigma = bands.sigma.max(axis=0)
    band_rows = []
    for z in z_levels:
        zt = f"{z:g}sd"
        band_rows.append((f"plus_{zt}", tuple(float(v) for v in bands.mean + z * sigma)))
        band_rows.append((f"minus_{zt}", tuple(float(v) for v in bands.mean - z * sigma)))
    return PlotSeries(
        name=name,
        x=x,
        curves=curves,
        bands=tuple(band_rows),
        mean=tuple(float(v) for v in bands.mean),
        x_label="arrival position",
        y_label="fraction of final cluster votes",
    )


def daily_plot_series(name: str, daily: DailyProportions) -> PlotSeries:
    x = tuple(float(i) for i in range(1, len(daily.days) + 1))
    curves = tuple(
        (str(c), tuple(float(v) for v in daily.proportions[:, i]))
        for i, c in enumerate(daily.cluster_ids)
    )
    return PlotSeries(
        name=name,
        x=x,
        curves=curves,
        x_label="day",
        y_label="share of responses",
        x_ticks=tuple(d.isoformat() for d in daily.days),
    )


def render_figure(series: PlotSeries) -> Figure:
    """One axes: data curves, then the mean, then the band lines.

    Every line carries an SVG id (curve:<label>, mean, band:<label>) so the
    emitted file's structure is checkable.
    """
    if not series.curves:
        raise DataError(f"series {series.name!r} has no curves")
    fig = Figure(figsize=(8.0, 5.0))
    ax = fig.add_subplot(111)
    for label, ys in series.curves:
        (line,) = ax.plot(series.x, ys, linewidth=1.6, label=label)
        line.set_gid(f"curve:{label}")
    if series.mean is not None:
        (line,) = ax.plot(series.x, series.mean, color="0.25", linewidth=1.0)
        line.set_gid("mean")
    for label, ys in series.bands:
        style = "--" if "1sd" in label else ":"
        (line,) = ax.plot(series.x, ys, color="0.5", linewidth=0.9, linestyle=style)
        line.set_gid(f"band:{label}")
    ax.set_xlabel(series.x_label)
    ax.set_ylabel(series.y_label)
    if series.x_ticks is not None and len(series.x_ticks) <= 20:
        ax.set_xticks(list(series.x))
        ax.set_xticklabels(series.x_ticks, rotation=45, ha="right", fontsize=7)
    ax.legend(loc="upper left", frameon=False, fontsize=8)
    fig.tight_layout()
    return fig


def series_csv(series: PlotSeries) -> str:
    """The raw numbers behind a figure, one row per x position."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["x"]
    if series.x_ticks is not None:
        header.append("x_tick")
    header += [label for label, _ in series.curves]
    if series.mean is not None:
        header.append("mean")
    header += [label for label, _ in series.bands]
    writer.writerow(header)
    for i, xv in enumerate(series.x):
        row: list[str] = [format_stat(xv)]
        if series.x_ticks is not None:
            row.append(series.x_ticks[i])
        row += [format_stat(ys[i]) for _, ys in series.curves]
        if series.mean is not None:
            row.append(format_stat(series.mean[i]))
        row += [format_stat(ys[i]) for _, ys in series.bands]
        writer.writerow(row)
    return buf.getvalue()


def emit_plot_series(bundle: ReportBundle, name: str, path: str) -> None:
    """Write the named series as an SVG figure plus its delimited numbers.

    The companion file replaces the figure extension with .csv. Output bytes
    are reproducible: fixed hash salt, no embedded creation date.
    """
    if name not in bundle.series:
        raise DataError(f"unknown plot series {name!r}")
    series = bundle.series[name]
    fig = render_figure(series)
    with matplotlib.rc_context({"svg.hashsalt": SVG_HASH_SALT}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    csv_path = os.path.splitext(path)[0] + ".csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(series_csv(series))


def write_bundle(bundle: ReportBundle, out_dir: str) -> list[str]:
    """Write every table and figure; returns the paths written."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for name, table in bundle.tables.items():
        path = os.path.join(out_dir, f"{name}.csv")
        table.write(path)
        written.append(path)
    for name in bundle.series:
        path = os.path.join(out_dir, f"{name}.svg")
        emit_plot_series(bundle, name, path)
        written.append(path)
        written.append(os.path.splitext(path)[0] + ".csv")
    return written

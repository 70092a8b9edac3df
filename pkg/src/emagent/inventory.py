"""Emission-inventory store, constrained aggregation, and chart payloads.

The inventory is a flat CSV of (region, year, sector, subsector, pollutant,
amount) rows, held immutable in memory and scanned row by row. Queries are a
conjunction of equality filters plus an optional year range, never free-form
SQL. Charts are renderer-agnostic payloads consumed by the CLI and the web
client; all numbers are computed here, never client-side.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from .corpus import SPECIES_REGISTRY
from .errors import ConflictingFilters, ExecutionError, IoError, KindMismatch, SchemaError
from .toolchain import FunctionRegistry, FunctionSpec, ParamSpec

CSV_HEADER = ("region", "year", "sector", "subsector", "pollutant", "amount_tonnes")

GROUP_KEYS = ("sector", "subsector", "pollutant", "year")

CHART_KINDS = ("pie", "stacked_bar", "line")

AMOUNT_UNITS = "tonnes/year"


@dataclass(frozen=True)
class InventoryRecord:
    region: str
    year: int
    sector: str
    subsector: str
    pollutant: str
    amount: float

    def __post_init__(self):
        if self.pollutant not in SPECIES_REGISTRY:
            raise ValueError(f"pollutant {self.pollutant!r} is not a registered species")
        if not 1900 <= self.year <= 2100:
            raise ValueError(f"year {self.year} outside [1900, 2100]")
        if self.amount < 0:
            raise ValueError(f"amount must be >= 0, got {self.amount}")


@dataclass(frozen=True)
class FilterSpec:
    region: str | None = None
    year: int | None = None
    sector: str | None = None
    subsector: str | None = None
    pollutant: str | None = None
    year_range: tuple[int, int] | None = None

    def __post_init__(self):
        if self.year is not None and self.year_range is not None:
            raise ConflictingFilters("year and year_range are mutually exclusive")
        if self.year_range is not None and self.year_range[0] > self.year_range[1]:
            raise ConflictingFilters(f"empty year_range {self.year_range}")

    def matches(self, rec: InventoryRecord) -> bool:
        if self.region is not None and rec.region != self.region:
            return False
        if self.year is not None and rec.year != self.year:
            return False
        if self.sector is not None and rec.sector != self.sector:
            return False
        if self.subsector is not None and rec.subsector != self.subsector:
            return False
        if self.pollutant is not None and rec.pollutant != self.pollutant:
            return False
        if self.year_range is not None and not (self.year_range[0] <= rec.year <= self.year_range[1]):
            return False
        return True


@dataclass(frozen=True)
class AggregateTable:
    """Per-group totals with shares of the grand total.

    Rows are (key, total, share), sorted total-descending then key-ascending.
    An empty filtered set gives an empty table.
    """

    group_key: str
    rows: tuple[tuple[Any, float, float], ...]

    @property
    def grand_total(self) -> float:
        return sum(total for _, total, _ in self.rows)


@dataclass(frozen=True)
class Trend:
    """Sparse per-(year, group) totals backing stacked-bar and line charts."""

    group_key: str
    years: tuple[int, ...]                       # ascending, dense over the queried range
    cells: tuple[tuple[int, str, float], ...]    # (year, group value, total)


@dataclass(frozen=True)
class ChartData:
    kind: str
    title: str
    categories: tuple[str, ...]
    series: tuple[tuple[str, tuple[float, ...]], ...]
    units: str

    def __post_init__(self):
        if self.kind not in CHART_KINDS:
            raise ValueError(f"unknown chart kind {self.kind!r}")
        for name, values in self.series:
            if len(values) != len(self.categories):
                raise ValueError(f"series {name!r} has {len(values)} values "
                                 f"for {len(self.categories)} categories")
        if self.kind == "pie":
            if len(self.series) != 1:
                raise ValueError("pie charts take exactly one series")
            if any(v < 0 for v in self.series[0][1]):
                raise ValueError("pie slices must be non-negative")


class InventoryStore:
    """Immutable row store; every query is a full scan in input order."""

    def __init__(self, records: Sequence[InventoryRecord]):
        self._records = tuple(records)

    def __len__(self) -> int:
        return len(self._records)

    @property
    def records(self) -> tuple[InventoryRecord, ...]:
        return self._records


def load_inventory(path) -> InventoryStore:
    """Parse the inventory CSV; fails atomically at the first bad row."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            rows = list(reader)
    except OSError as exc:
        raise IoError(f"cannot read inventory file {path}: {exc}") from exc

    if not rows or tuple(h.strip() for h in rows[0]) != CSV_HEADER:
        raise SchemaError(
            f"header must be exactly {','.join(CSV_HEADER)}", line=1)

    records: list[InventoryRecord] = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(CSV_HEADER):
            raise SchemaError(f"line {lineno}: expected {len(CSV_HEADER)} columns, "
                              f"got {len(row)}", line=lineno)
        region, year_s, sector, subsector, pollutant, amount_s = (c.strip() for c in row)
        try:
            record = InventoryRecord(
                region=region,
                year=int(year_s),
                sector=sector,
                subsector=subsector,
                pollutant=pollutant,
                amount=float(amount_s),
            )
        except ValueError as exc:
            raise SchemaError(f"line {lineno}: {exc}", line=lineno) from exc
        records.append(record)
    return InventoryStore(records)


def query_records(filters: FilterSpec, store: InventoryStore) -> list[InventoryRecord]:
    """Rows matching the conjunction of all present filters, input order kept."""
    if filters.year is not None and filters.year_range is not None:
        raise ConflictingFilters("year and year_range are mutually exclusive")
    return [rec for rec in store.records if filters.matches(rec)]


def aggregate(filters: FilterSpec, group_key: str, store: InventoryStore) -> AggregateTable:
    """Sum amounts per group value over the filtered rows."""
    if group_key not in GROUP_KEYS:
        raise ValueError(f"group_key must be one of {GROUP_KEYS}, got {group_key!r}")
    totals: dict[Any, float] = {}
    for rec in query_records(filters, store):
        key = getattr(rec, group_key)
        totals[key] = totals.get(key, 0.0) + rec.amount
    grand = sum(totals.values())
    rows = sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))
    return AggregateTable(
        group_key=group_key,
        rows=tuple((key, total, total / grand if grand > 0 else 0.0)
                   for key, total in rows),
    )


def aggregate_by_year(filters: FilterSpec, group_key: str, store: InventoryStore) -> Trend:
    """Per-(year, group) totals. With a year_range filter the trend covers the
    whole range densely; otherwise only years present in the data."""
    if group_key not in GROUP_KEYS or group_key == "year":
        raise ValueError(f"trend group_key must be one of "
                         f"{tuple(k for k in GROUP_KEYS if k != 'year')}, got {group_key!r}")
    cells: dict[tuple[int, str], float] = {}
    seen_years: set[int] = set()
    for rec in query_records(filters, store):
        key = (rec.year, getattr(rec, group_key))
        cells[key] = cells.get(key, 0.0) + rec.amount
        seen_years.add(rec.year)
    if filters.year_range is not None:
        years = tuple(range(filters.year_range[0], filters.year_range[1] + 1))
    elif filters.year is not None:
        years = (filters.year,)
    else:
        years = tuple(sorted(seen_years))
    return Trend(
        group_key=group_key,
        years=years,
        cells=tuple(sorted((y, g, total) for (y, g), total in cells.items())),
    )


def make_chart(table_or_trend: AggregateTable | Trend, kind: str,
               title: str, units: str = AMOUNT_UNITS) -> ChartData:
    """Shape a table (pie) or year trend (stacked_bar / line) into a chart.

    Missing (year, series) cells are filled with 0 so every series aligns
    with the category axis.
    """
    if kind == "pie":
        if not isinstance(table_or_trend, AggregateTable):
            raise KindMismatch("pie charts require an AggregateTable")
        table = table_or_trend
        return ChartData(
            kind="pie",
            title=title,
            categories=tuple(str(key) for key, _, _ in table.rows),
            series=(("total", tuple(total for _, total, _ in table.rows)),),
            units=units,
        )
    if kind in ("stacked_bar", "line"):
        if not isinstance(table_or_trend, Trend):
            raise KindMismatch(f"{kind} charts require a year-indexed Trend")
        trend = table_or_trend
        names = sorted({g for _, g, _ in trend.cells})
        by_cell = {(y, g): total for y, g, total in trend.cells}
        return ChartData(
            kind=kind,
            title=title,
            categories=tuple(str(y) for y in trend.years),
            series=tuple(
                (name, tuple(by_cell.get((y, name), 0.0) for y in trend.years))
                for name in names
            ),
            units=units,
        )
    raise KindMismatch(f"unknown chart kind {kind!r}")


def table_to_payload(table: AggregateTable) -> dict:
    return {
        "group_key": table.group_key,
        "rows": [
            {"key": key, "total": total, "share": share}
            for key, total, share in table.rows
        ],
        "grand_total": table.grand_total,
        "units": AMOUNT_UNITS,
    }


def chart_to_payload(chart: ChartData) -> dict:
    return {
        "kind": chart.kind,
        "title": chart.title,
        "categories": list(chart.categories),
        "series": [{"name": name, "values": list(values)} for name, values in chart.series],
        "units": chart.units,
    }


# --- the Category II tool set -------------------------------------------------

SHARE_UNITS = "share of pollutant total"


def _require_rows(rows, what: str):
    if not rows:
        raise ExecutionError(f"empty result: no inventory rows match {what}")
    return rows


def run_aggregate_emissions(args: Mapping[str, Any], store: InventoryStore) -> ChartData:
    """Single-pollutant sectoral profile for one year, as a pie chart."""
    filters = FilterSpec(pollutant=args["pollutant"], year=args["year"])
    group_by = args.get("group_by", "sector")
    table = aggregate(filters, group_by, store)
    _require_rows(table.rows, f"pollutant={args['pollutant']} year={args['year']}")
    title = f"{args['pollutant']} emission contribution by {group_by} in {args['year']}"
    return make_chart(table, "pie", title)


def run_emission_trend(args: Mapping[str, Any], store: InventoryStore) -> ChartData:
    """Annual emissions of one pollutant within a sector, stacked by sub-source."""
    group_by = args.get("group_by", "subsector")
    filters = FilterSpec(
        pollutant=args["pollutant"],
        sector=args["sector"],
        year_range=(args["from_year"], args["to_year"]),
    )
    trend = aggregate_by_year(filters, group_by, store)
    _require_rows(trend.cells,
                  f"pollutant={args['pollutant']} sector={args['sector']} "
                  f"years={args['from_year']}-{args['to_year']}")
    title = (f"Annual {args['pollutant']} emissions from {args['sector']} "
             f"by {group_by}, {args['from_year']}-{args['to_year']}")
    return make_chart(trend, "stacked_bar", title)


def run_cross_pollutant_contribution(args: Mapping[str, Any],
                                     store: InventoryStore) -> ChartData:
    """Share of each source group in each pollutant's total for one year.

    Pollutants span the category axis; values are per-pollutant shares so
    species with very different magnitudes stay comparable.
    """
    group_by = args.get("group_by", "sector")
    year = args["year"]
    pollutants = list(args["pollutants"])
    if not pollutants:
        raise ExecutionError("empty result: pollutants list is empty")
    tables = []
    for pollutant in pollutants:
        if pollutant not in SPECIES_REGISTRY:
            raise ExecutionError(f"unknown pollutant {pollutant!r}")
        tables.append(aggregate(FilterSpec(pollutant=pollutant, year=year), group_by, store))
    if all(not t.rows for t in tables):
        raise ExecutionError(f"empty result: no inventory rows match year={year} "
                             f"pollutants={pollutants}")
    names = sorted({key for t in tables for key, _, _ in t.rows})
    shares = {(p, key): share
              for p, t in zip(pollutants, tables)
              for key, _, share in t.rows}
    return ChartData(
        kind="stacked_bar",
        title=f"Cross-pollutant emission contributions by {group_by} in {year}",
        categories=tuple(pollutants),
        series=tuple(
            (name, tuple(shares.get((p, name), 0.0) for p in pollutants))
            for name in names
        ),
        units=SHARE_UNITS,
    )


def run_sub_source_breakdown(args: Mapping[str, Any], store: InventoryStore) -> ChartData:
    """Within one sector and year, each pollutant's split across sub-sources."""
    group_by = args.get("group_by", "subsector")
    per = args.get("per", "pollutant")
    sector = args["sector"]
    year = args["year"]
    rows = query_records(FilterSpec(sector=sector, year=year), store)
    _require_rows(rows, f"sector={sector} year={year}")
    pollutants = sorted({rec.pollutant for rec in rows})
    tables = [
        aggregate(FilterSpec(sector=sector, year=year, pollutant=p), group_by, store)
        for p in pollutants
    ]
    names = sorted({key for t in tables for key, _, _ in t.rows})
    shares = {(p, key): share
              for p, t in zip(pollutants, tables)
              for key, _, share in t.rows}
    return ChartData(
        kind="stacked_bar",
        title=f"{sector} sub-source contributions by {per} in {year}",
        categories=tuple(pollutants),
        series=tuple(
            (name, tuple(shares.get((p, name), 0.0) for p in pollutants))
            for name in names
        ),
        units=SHARE_UNITS,
    )


def build_registry() -> FunctionRegistry:
    """Registry of the four analysis functions, handlers bound."""
    registry = FunctionRegistry()
    registry.register(FunctionSpec(
        name="aggregate_emissions",
        description="Total emissions of one pollutant in one year, grouped by "
                    "source category, as a pie chart of contributions.",
        parameters=(
            ParamSpec("pollutant", "enum", values=SPECIES_REGISTRY,
                      description="pollutant species"),
            ParamSpec("year", "integer", description="inventory year"),
            ParamSpec("group_by", "enum", values=("sector", "subsector"),
                      required=False, description="grouping level, default sector"),
        ),
    ), handler=run_aggregate_emissions)
    registry.register(FunctionSpec(
        name="emission_trend",
        description="Annual emissions of one pollutant within a sector over a "
                    "year range, stacked by sub-source.",
        parameters=(
            ParamSpec("pollutant", "enum", values=SPECIES_REGISTRY),
            ParamSpec("sector", "string", description="source sector, e.g. mobile"),
            ParamSpec("from_year", "integer"),
            ParamSpec("to_year", "integer"),
            ParamSpec("group_by", "enum", values=("subsector", "sector"),
                      required=False, description="series grouping, default subsector"),
        ),
    ), handler=run_emission_trend)
    registry.register(FunctionSpec(
        name="cross_pollutant_contribution",
        description="Contribution share of each source category to several "
                    "pollutants in one year, as a stacked bar per pollutant.",
        parameters=(
            ParamSpec("pollutants", "array", items="string",
                      description="pollutant species to compare"),
            ParamSpec("year", "integer"),
            ParamSpec("group_by", "enum", values=("sector", "subsector"),
                      required=False, description="segment grouping, default sector"),
        ),
    ), handler=run_cross_pollutant_contribution)
    registry.register(FunctionSpec(
        name="sub_source_breakdown",
        description="Within one sector and year, the split of every pollutant "
                    "across sub-sources, as a stacked bar per pollutant.",
        parameters=(
            ParamSpec("sector", "string"),
            ParamSpec("year", "integer"),
            ParamSpec("group_by", "enum", values=("subsector",), required=False),
            ParamSpec("per", "enum", values=("pollutant",), required=False),
        ),
    ), handler=run_sub_source_breakdown)
    return registry

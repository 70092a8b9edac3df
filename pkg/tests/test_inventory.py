from __future__ import annotations

import random

import pytest

from emagent.corpus import SPECIES_REGISTRY
from emagent.errors import ConflictingFilters, ExecutionError, KindMismatch, SchemaError
from emagent.inventory import (
    AggregateTable,
    FilterSpec,
    InventoryRecord,
    InventoryStore,
    Trend,
    aggregate,
    aggregate_by_year,
    build_registry,
    load_inventory,
    make_chart,
    query_records,
    run_cross_pollutant_contribution,
    run_emission_trend,
    run_sub_source_breakdown,
)
from emagent.toolchain import execute_call, parse_function_call


def rec(region="GD", year=2020, sector="mobile", subsector="road",
        pollutant="NOx", amount=1.0) -> InventoryRecord:
    return InventoryRecord(region=region, year=year, sector=sector,
                           subsector=subsector, pollutant=pollutant, amount=amount)


SPEC_EXAMPLE_STORE = InventoryStore([
    rec(region="GD", year=2020, sector="mobile", subsector="road", pollutant="NOx", amount=100),
    rec(region="GD", year=2020, sector="industry", subsector="steel", pollutant="NOx", amount=50),
])


# --- record validation ------------------------------------------------------------

def test_record_rejects_unknown_pollutant():
    with pytest.raises(ValueError):
        rec(pollutant="XYZ")


def test_record_rejects_negative_amount():
    with pytest.raises(ValueError):
        rec(amount=-5)


def test_record_rejects_out_of_range_year():
    with pytest.raises(ValueError):
        rec(year=1800)


# --- load_inventory ------------------------------------------------------------------

def test_load_fixture(inventory_store):
    assert len(inventory_store) == 20


def test_load_rejects_negative_amount(tmp_path):
    path = tmp_path / "inv.csv"
    path.write_text(
        "region,year,sector,subsector,pollutant,amount_tonnes\n"
        "GD,2020,mobile,road,NOx,-5\n", encoding="utf-8")
    with pytest.raises(SchemaError) as err:
        load_inventory(path)
    assert err.value.line == 2


def test_load_rejects_unknown_pollutant(tmp_path):
    path = tmp_path / "inv.csv"
    path.write_text(
        "region,year,sector,subsector,pollutant,amount_tonnes\n"
        "GD,2020,mobile,road,NOx,10\n"
        "GD,2020,mobile,road,XYZ,10\n", encoding="utf-8")
    with pytest.raises(SchemaError) as err:
        load_inventory(path)
    assert err.value.line == 3


def test_load_rejects_wrong_header(tmp_path):
    path = tmp_path / "inv.csv"
    path.write_text("region,year\nGD,2020\n", encoding="utf-8")
    with pytest.raises(SchemaError) as err:
        load_inventory(path)
    assert err.value.line == 1


# --- query_records ----------------------------------------------------------------------

def test_empty_filter_returns_all(inventory_store):
    assert len(query_records(FilterSpec(), inventory_store)) == len(inventory_store)


def test_pollutant_filter():
    store = InventoryStore([
        rec(pollutant="NOx"), rec(pollutant="CO"), rec(pollutant="NOx"),
        rec(pollutant="SO2"), rec(pollutant="NOx"),
    ])
    got = query_records(FilterSpec(pollutant="NOx"), store)
    assert len(got) == 3
    assert all(r.pollutant == "NOx" for r in got)


def test_conflicting_year_filters():
    with pytest.raises(ConflictingFilters):
        FilterSpec(year=2020, year_range=(2018, 2020))


def test_filter_monotonicity(inventory_store):
    base = len(query_records(FilterSpec(pollutant="NOx"), inventory_store))
    narrowed = len(query_records(FilterSpec(pollutant="NOx", sector="mobile"),
                                 inventory_store))
    assert narrowed <= base


def test_stable_input_order(inventory_store):
    got = query_records(FilterSpec(year=2020), inventory_store)
    expected = [r for r in inventory_store.records if r.year == 2020]
    assert got == expected


# --- aggregate -----------------------------------------------------------------------------

def test_spec_example_two_sectors():
    table = aggregate(FilterSpec(pollutant="NOx", year=2020), "sector",
                      SPEC_EXAMPLE_STORE)
    assert table.rows[0][0] == "mobile"
    assert table.rows[0][1] == pytest.approx(100.0)
    assert table.rows[0][2] == pytest.approx(2 / 3, abs=1e-9)
    assert table.rows[1][0] == "industry"
    assert table.rows[1][1] == pytest.approx(50.0)
    assert table.rows[1][2] == pytest.approx(1 / 3, abs=1e-9)


def test_single_row_share_one():
    table = aggregate(FilterSpec(), "sector", InventoryStore([rec(amount=42)]))
    assert table.rows == (("mobile", 42.0, 1.0),)


def test_empty_match_empty_table():
    table = aggregate(FilterSpec(pollutant="CO"), "sector", SPEC_EXAMPLE_STORE)
    assert table.rows == ()
    assert table.grand_total == 0.0


def test_rows_sorted_total_desc_then_key():
    store = InventoryStore([
        rec(sector="b", amount=10), rec(sector="a", amount=10), rec(sector="c", amount=30),
    ])
    table = aggregate(FilterSpec(), "sector", store)
    assert [row[0] for row in table.rows] == ["c", "a", "b"]


def naive_aggregate(records, filters: FilterSpec, group_key: str):
    """Independent oracle: double loop over rows and groups."""
    matching = [r for r in records if filters.matches(r)]
    keys = []
    for r in matching:
        key = getattr(r, group_key)
        if key not in keys:
            keys.append(key)
    totals = {}
    for key in keys:
        total = 0.0
        for r in matching:
            if getattr(r, group_key) == key:
                total += r.amount
        totals[key] = total
    return totals


def random_store(rng: random.Random, n_rows: int) -> InventoryStore:
    regions = ["GD", "JS", "BJ"]
    sectors = ["mobile", "industry", "power", "agriculture"]
    subsectors = ["a", "b", "c", "d", "e"]
    return InventoryStore([
        rec(region=rng.choice(regions), year=rng.randint(2015, 2022),
            sector=rng.choice(sectors), subsector=rng.choice(subsectors),
            pollutant=rng.choice(SPECIES_REGISTRY), amount=round(rng.uniform(0, 500), 3))
        for _ in range(n_rows)
    ])


def test_aggregate_matches_naive_oracle():
    rng = random.Random(99)
    for _ in range(30):
        store = random_store(rng, rng.randint(0, 500))
        filters = FilterSpec(
            pollutant=rng.choice([None, "NOx", "CO"]),
            year=rng.choice([None, 2020]),
            sector=rng.choice([None, "mobile"]),
        )
        group_key = rng.choice(["sector", "subsector", "pollutant", "year"])
        table = aggregate(filters, group_key, store)
        expected = naive_aggregate(store.records, filters, group_key)
        assert {k for k, _, _ in table.rows} == set(expected)
        for key, total, share in table.rows:
            assert total == pytest.approx(expected[key], abs=1e-9)
        if table.rows:
            assert sum(s for _, _, s in table.rows) == pytest.approx(1.0, abs=1e-9)


# --- make_chart ---------------------------------------------------------------------

def test_pie_chart_from_spec_example():
    table = aggregate(FilterSpec(pollutant="NOx", year=2020), "sector",
                      SPEC_EXAMPLE_STORE)
    chart = make_chart(table, "pie", "NOx by sector")
    assert chart.categories == ("mobile", "industry")
    assert chart.series[0][1] == (100.0, 50.0)


def test_stacked_bar_fills_missing_cells():
    store = InventoryStore([
        rec(year=2018, subsector="s1", amount=10),
        rec(year=2019, subsector="s1", amount=12),
        rec(year=2020, subsector="s1", amount=14),
        rec(year=2018, subsector="s2", amount=5),
        rec(year=2020, subsector="s2", amount=6),   # 2019 missing
    ])
    trend = aggregate_by_year(FilterSpec(year_range=(2018, 2020)), "subsector", store)
    chart = make_chart(trend, "stacked_bar", "trend")
    assert chart.categories == ("2018", "2019", "2020")
    series = dict(chart.series)
    assert series["s2"] == (5.0, 0.0, 6.0)


def test_year_range_pads_empty_years():
    store = InventoryStore([rec(year=2018, amount=3), rec(year=2020, amount=4)])
    trend = aggregate_by_year(FilterSpec(year_range=(2017, 2020)), "sector", store)
    chart = make_chart(trend, "line", "trend")
    assert chart.categories == ("2017", "2018", "2019", "2020")
    assert dict(chart.series)["mobile"] == (0.0, 3.0, 0.0, 4.0)


def test_kind_mismatch():
    table = aggregate(FilterSpec(), "sector", SPEC_EXAMPLE_STORE)
    with pytest.raises(KindMismatch):
        make_chart(table, "line", "t")
    trend = aggregate_by_year(FilterSpec(), "sector", SPEC_EXAMPLE_STORE)
    with pytest.raises(KindMismatch):
        make_chart(trend, "pie", "t")


def test_chart_alignment_invariant():
    trend = Trend(group_key="subsector", years=(2018, 2019),
                  cells=((2018, "x", 1.0),))
    chart = make_chart(trend, "stacked_bar", "t")
    for _, values in chart.series:
        assert len(values) == len(chart.categories)


def test_pie_rejects_multiple_series():
    with pytest.raises(ValueError):
        from emagent.inventory import ChartData
        ChartData(kind="pie", title="t", categories=("a",),
                  series=(("s1", (1.0,)), ("s2", (2.0,))), units="u")


# --- the four registered analysis functions ------------------------------------------------

def test_registry_has_four_functions(registry):
    assert [s["name"] for s in registry.describe()] == [
        "aggregate_emissions", "cross_pollutant_contribution",
        "emission_trend", "sub_source_breakdown",
    ]


def test_aggregate_emissions_via_call(registry, inventory_store):
    raw = ('{"name": "aggregate_emissions", '
           '"arguments": {"pollutant": "CO", "year": 2020, "group_by": "sector"}}')
    call = parse_function_call(raw, registry)
    chart = execute_call(call, registry, inventory_store)
    assert chart.kind == "pie"
    # CO 2020: industry 200, mobile 200, power 40
    assert set(chart.categories) == {"industry", "mobile", "power"}


def test_aggregate_emissions_empty_result(registry, inventory_store):
    raw = ('{"name": "aggregate_emissions", '
           '"arguments": {"pollutant": "CH4", "year": 2020, "group_by": "sector"}}')
    call = parse_function_call(raw, registry)
    with pytest.raises(ExecutionError, match="empty result"):
        execute_call(call, registry, inventory_store)


def test_emission_trend_shape(inventory_store):
    chart = run_emission_trend(
        {"pollutant": "NOx", "sector": "mobile", "from_year": 2018, "to_year": 2020},
        inventory_store)
    assert chart.kind == "stacked_bar"
    assert chart.categories == ("2018", "2019", "2020")
    series = dict(chart.series)
    assert series["motorcycle"] == (8.0, 0.0, 5.0)   # zero-filled gap in 2019
    assert series["road_light_duty"] == (30.0, 35.0, 40.0)


def test_cross_pollutant_contribution_shares(inventory_store):
    chart = run_cross_pollutant_contribution(
        {"pollutants": ["NOx", "CO"], "year": 2020}, inventory_store)
    assert chart.categories == ("NOx", "CO")
    by_series = dict(chart.series)
    # each pollutant's shares sum to 1 across sectors
    for column in range(2):
        assert sum(values[column] for values in by_series.values()) == pytest.approx(1.0)
    # NOx 2020: mobile 100 of 210
    assert by_series["mobile"][0] == pytest.approx(100 / 210, abs=1e-9)


def test_sub_source_breakdown(inventory_store):
    chart = run_sub_source_breakdown({"sector": "mobile", "year": 2020}, inventory_store)
    assert chart.kind == "stacked_bar"
    assert set(chart.categories) == {"NOx", "CO", "PM2.5"}
    # NOx within mobile 2020: light 40, heavy 55, moto 5 -> shares of 100
    col = chart.categories.index("NOx")
    assert dict(chart.series)["road_heavy_duty"][col] == pytest.approx(0.55, abs=1e-9)

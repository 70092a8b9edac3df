from __future__ import annotations

import itertools
import random

import pytest

from emagent.efrec import (
    EFQuery,
    EmissionFactorRecord,
    GradeWeights,
    PollutantValue,
    QualityGrades,
    Recommendation,
    RegionHierarchy,
    SourceAttrs,
    auto_grade,
    complete_query,
    composite_score,
    grade_to_score,
    match_guidelines,
    recommend,
    search_literature,
)
from emagent.providers import ProviderConfig

NOW = 2026

FULL_QUERY = EFQuery(vehicle_type="light-duty", fuel_type="gasoline",
                     emission_standard="China III", region="Guangdong")


def make_record(ef_id="ef-1", vehicle="light-duty", fuel="gasoline",
                standard="China III", region="Guangdong", scale="province",
                method="standardized_validated", source="peer_reviewed_journal",
                sample=40, year=2023, authoritative=False,
                grades=None) -> EmissionFactorRecord:
    return EmissionFactorRecord(
        ef_id=ef_id,
        source_attrs=SourceAttrs(vehicle_type=vehicle, fuel_type=fuel,
                                 emission_standard=standard, region=region,
                                 region_scale=scale),
        pollutant_values={"NOx": PollutantValue(0.7, "g/km")},
        method_class=method,
        source_class=source,
        citation=f"citation for {ef_id}",
        sample_size=sample,
        publication_year=year,
        authoritative=authoritative,
    )


# --- complete_query ---------------------------------------------------------------

def test_missing_region_only():
    query = EFQuery(vehicle_type="light-duty", fuel_type="gasoline",
                    emission_standard="China III")
    assert complete_query(query) == ["region"]


def test_all_present_is_complete():
    assert complete_query(FULL_QUERY) == []
    assert FULL_QUERY.complete


def test_all_absent_lists_all_in_order():
    assert complete_query(EFQuery()) == [
        "vehicle_type", "fuel_type", "emission_standard", "region"]


def test_blank_counts_as_missing():
    query = EFQuery(vehicle_type="  ", fuel_type="gasoline",
                    emission_standard="China III", region="Guangdong")
    assert complete_query(query) == ["vehicle_type"]


# --- match_guidelines ------------------------------------------------------------------

def test_exact_match_is_ungraded():
    record = make_record(source="official_standard_or_guideline", authoritative=True)
    matches = match_guidelines(FULL_QUERY, [record])
    assert len(matches) == 1
    assert matches[0].tier == "guideline"
    assert matches[0].grades is None and matches[0].composite_score is None


def test_country_record_matches_province_query_as_ancestor():
    record = make_record(region="China", scale="country",
                         source="official_standard_or_guideline", authoritative=True)
    assert len(match_guidelines(FULL_QUERY, [record])) == 1


def test_fuel_mismatch_no_match():
    record = make_record(fuel="diesel", source="official_standard_or_guideline",
                         authoritative=True)
    assert match_guidelines(FULL_QUERY, [record]) == []


def test_descendant_region_does_not_match():
    # a city guideline does not cover a province query
    record = make_record(region="Guangzhou", scale="city",
                         source="official_standard_or_guideline", authoritative=True)
    assert match_guidelines(FULL_QUERY, [record]) == []


def test_matching_is_case_insensitive():
    record = make_record(vehicle="Light-Duty", fuel="GASOLINE", standard="china iii",
                         source="official_standard_or_guideline", authoritative=True)
    assert len(match_guidelines(FULL_QUERY, [record])) == 1


def test_ordered_by_region_specificity(guideline_db):
    matches = match_guidelines(FULL_QUERY, guideline_db)
    assert [m.record.ef_id for m in matches] == ["gl-gd-001", "gl-cn-001", "gl-gb-001"]
    assert [m.rank for m in matches] == [1, 2, 3]


# --- search_literature --------------------------------------------------------------------

def test_attribute_identical_record_ranks_first(stub_provider):
    exact = make_record(ef_id="exact")
    others = [
        make_record(ef_id="far-1", vehicle="heavy-duty", fuel="diesel",
                    standard="China VI", region="Jiangsu"),
        make_record(ef_id="far-2", vehicle="motorcycle", fuel="electric",
                    standard="none", region="Bavaria"),
    ]
    got = search_literature(FULL_QUERY, [*others, exact], stub_provider)
    assert got[0].ef_id == "exact"


def test_k_larger_than_db(stub_provider, literature_db):
    assert len(search_literature(FULL_QUERY, literature_db, stub_provider, k=100)) == 8


def test_empty_db(stub_provider):
    assert search_literature(FULL_QUERY, [], stub_provider) == []


# --- auto_grade -------------------------------------------------------------------------------

def test_best_case_all_a():
    record = make_record(region="Guangdong", year=NOW - 3, method="standardized_validated",
                         sample=40, source="peer_reviewed_journal")
    grades = auto_grade(record, FULL_QUERY, NOW)
    assert grades.as_tuple() == ("A", "A", "A", "A")


def test_unknown_year_forces_d_data_representativeness():
    record = make_record(year=None)
    grades = auto_grade(record, FULL_QUERY, NOW)
    assert grades.data_representativeness == "D"


def test_sample_size_boundaries():
    assert auto_grade(make_record(sample=30), FULL_QUERY, NOW).sample_representativeness == "A"
    assert auto_grade(make_record(sample=29), FULL_QUERY, NOW).sample_representativeness == "B"
    assert auto_grade(make_record(sample=10), FULL_QUERY, NOW).sample_representativeness == "B"
    assert auto_grade(make_record(sample=9), FULL_QUERY, NOW).sample_representativeness == "C"
    assert auto_grade(make_record(sample=1), FULL_QUERY, NOW).sample_representativeness == "C"
    assert auto_grade(make_record(sample=None), FULL_QUERY, NOW).sample_representativeness == "D"


def test_recency_caps_data_representativeness():
    same_region = dict(region="Guangdong", scale="province")
    assert auto_grade(make_record(year=NOW - 5, **same_region), FULL_QUERY,
                      NOW).data_representativeness == "A"
    assert auto_grade(make_record(year=NOW - 6, **same_region), FULL_QUERY,
                      NOW).data_representativeness == "B"
    assert auto_grade(make_record(year=NOW - 11, **same_region), FULL_QUERY,
                      NOW).data_representativeness == "C"
    assert auto_grade(make_record(year=NOW - 16, **same_region), FULL_QUERY,
                      NOW).data_representativeness == "D"


def test_region_distance_grades():
    fresh = NOW - 1
    one_level = make_record(region="China", scale="country", year=fresh)
    assert auto_grade(one_level, FULL_QUERY, NOW).data_representativeness == "B"
    two_levels = make_record(region="Global", scale="global", year=fresh)
    assert auto_grade(two_levels, FULL_QUERY, NOW).data_representativeness == "C"
    city_within = make_record(region="Guangzhou", scale="city", year=fresh)
    assert auto_grade(city_within, FULL_QUERY, NOW).data_representativeness == "B"
    unrelated = make_record(region="Bavaria", scale="province", year=fresh)
    assert auto_grade(unrelated, FULL_QUERY, NOW).data_representativeness == "D"


def test_method_and_authority_maps():
    grades = auto_grade(make_record(method="reliable_unstandardized",
                                    source="thesis_or_conference"), FULL_QUERY, NOW)
    assert grades.methodological_reliability == "B"
    assert grades.data_authority == "B"
    grades = auto_grade(make_record(method="undocumented", source="unverifiable"),
                        FULL_QUERY, NOW)
    assert grades.methodological_reliability == "D"
    assert grades.data_authority == "D"


# --- scoring ---------------------------------------------------------------------------------

def test_grade_scores():
    assert grade_to_score("A") == 4
    assert grade_to_score("B") == 3
    assert grade_to_score("C") == 2
    assert grade_to_score("D") == 1


def test_composite_extremes():
    assert composite_score(QualityGrades("A", "A", "A", "A")) == pytest.approx(4.0, abs=1e-9)
    assert composite_score(QualityGrades("D", "D", "D", "D")) == pytest.approx(1.0, abs=1e-9)


def test_composite_aabc():
    grades = QualityGrades("A", "A", "B", "C")
    assert composite_score(grades) == pytest.approx(3.6, abs=1e-9)


def brute_force_score(grades: QualityGrades) -> float:
    table = {"A": 4, "B": 3, "C": 2, "D": 1}
    weights = (0.35, 0.35, 0.20, 0.10)
    return sum(w * table[g] for w, g in zip(weights, grades.as_tuple()))


def test_exhaustive_256_combinations_match_brute_force():
    for combo in itertools.product("ABCD", repeat=4):
        grades = QualityGrades(*combo)
        assert composite_score(grades) == pytest.approx(brute_force_score(grades), abs=1e-9)
        assert 1.0 - 1e-9 <= composite_score(grades) <= 4.0 + 1e-9


def test_single_grade_improvement_never_decreases_score():
    order = "DCBA"  # ascending quality
    for combo in itertools.product("ABCD", repeat=4):
        base = composite_score(QualityGrades(*combo))
        for dim in range(4):
            current = order.index(combo[dim])
            if current == len(order) - 1:
                continue
            improved = list(combo)
            improved[dim] = order[current + 1]
            assert composite_score(QualityGrades(*improved)) >= base


def test_single_a_profiles_follow_weight_order():
    profiles = [QualityGrades(*["A" if i == d else "D" for i in range(4)])
                for d in range(4)]
    scores = [composite_score(p) for p in profiles]
    assert scores[0] == scores[1]          # equal weights on the first two dims
    assert scores[1] > scores[2] > scores[3]


def test_weights_must_sum_to_one():
    with pytest.raises(ValueError):
        GradeWeights(0.5, 0.3, 0.1, 0.2)
    with pytest.raises(ValueError):
        GradeWeights(0.35, 0.35, 0.20, -0.1)


# --- recommend ----------------------------------------------------------------------------------

def test_incomplete_query_returns_missing(stub_provider, guideline_db, literature_db):
    outcome = recommend(EFQuery(vehicle_type="light-duty", fuel_type="gasoline",
                                emission_standard="China III"),
                        guideline_db, literature_db, stub_provider)
    assert not outcome.complete
    assert outcome.missing == ("region",)
    assert outcome.recommendations == ()


def test_literature_tier_truncates_to_five(stub_provider):
    records = [make_record(ef_id=f"ef-{i}", sample=30 + i, year=2019 + (i % 6))
               for i in range(7)]
    outcome = recommend(FULL_QUERY, [], records, stub_provider, now_year=NOW)
    lit = [r for r in outcome.recommendations if r.tier == "literature"]
    assert len(lit) == 5
    scores = [r.composite_score for r in lit]
    assert scores == sorted(scores, reverse=True)


def test_guideline_entries_precede_literature(stub_provider, guideline_db, literature_db):
    outcome = recommend(FULL_QUERY, guideline_db, literature_db, stub_provider,
                        now_year=NOW)
    tiers = [r.tier for r in outcome.recommendations]
    assert tiers == sorted(tiers, key=lambda t: 0 if t == "guideline" else 1)
    guideline = [r for r in outcome.recommendations if r.tier == "guideline"]
    assert len(guideline) == 3
    assert all(r.grades is None for r in guideline)


def test_one_guideline_two_literature(stub_provider):
    guideline = [make_record(ef_id="gl", source="official_standard_or_guideline",
                             authoritative=True)]
    literature = [make_record(ef_id="lit-a"), make_record(ef_id="lit-b", sample=5)]
    outcome = recommend(FULL_QUERY, guideline, literature, stub_provider, now_year=NOW)
    assert len(outcome.recommendations) == 3
    assert outcome.recommendations[0].tier == "guideline"
    assert [r.rank for r in outcome.recommendations] == [1, 1, 2]


def test_tie_broken_by_later_publication_year(stub_provider):
    older = make_record(ef_id="older", year=NOW - 2)
    newer = make_record(ef_id="newer", year=NOW - 1)
    outcome = recommend(FULL_QUERY, [], [older, newer], stub_provider, now_year=NOW)
    lit = [r.record.ef_id for r in outcome.recommendations]
    assert lit == ["newer", "older"]


def test_score_tie_and_year_tie_falls_back_to_ef_id(stub_provider):
    a = make_record(ef_id="aaa", year=NOW - 1)
    b = make_record(ef_id="bbb", year=NOW - 1)
    outcome = recommend(FULL_QUERY, [], [b, a], stub_provider, now_year=NOW)
    assert [r.record.ef_id for r in outcome.recommendations] == ["aaa", "bbb"]


def test_recommend_deterministic(stub_provider, guideline_db, literature_db):
    first = recommend(FULL_QUERY, guideline_db, literature_db, stub_provider, now_year=NOW)
    second = recommend(FULL_QUERY, guideline_db, literature_db, stub_provider, now_year=NOW)
    assert first == second


def test_manual_grades_override_auto(stub_provider):
    manual = QualityGrades("D", "D", "D", "D")
    record = EmissionFactorRecord(
        ef_id="manual", source_attrs=make_record().source_attrs,
        pollutant_values={"NOx": PollutantValue(0.7, "g/km")},
        method_class="standardized_validated", source_class="peer_reviewed_journal",
        citation="c", sample_size=40, publication_year=NOW - 1, grades=manual)
    outcome = recommend(FULL_QUERY, [], [record], stub_provider, now_year=NOW)
    assert outcome.recommendations[0].composite_score == pytest.approx(1.0)


# --- randomized ranking-contract property ------------------------------------------------------

def test_randomized_ranking_contract(stub_provider):
    rng = random.Random(42)
    methods = ("standardized_validated", "reliable_unstandardized",
               "unvalidated", "undocumented")
    sources = ("peer_reviewed_journal", "thesis_or_conference",
               "technical_report", "unverifiable")
    regions = (("Guangdong", "province"), ("China", "country"),
               ("Guangzhou", "city"), ("Bavaria", "province"), ("Global", "global"))
    for _ in range(200):
        n = rng.randint(0, 12)
        records = []
        for i in range(n):
            region, scale = rng.choice(regions)
            records.append(make_record(
                ef_id=f"r{i:03d}",
                region=region, scale=scale,
                method=rng.choice(methods),
                source=rng.choice(sources),
                sample=rng.choice([None, 3, 9, 10, 29, 30, 80]),
                year=rng.choice([None, NOW - 2, NOW - 7, NOW - 12, NOW - 20]),
            ))
        outcome = recommend(FULL_QUERY, [], records, stub_provider, now_year=NOW)
        lit = [r for r in outcome.recommendations if r.tier == "literature"]
        assert len(lit) <= 5
        keys = [(-r.composite_score,
                 -(r.record.publication_year if r.record.publication_year else -10**9),
                 r.record.ef_id) for r in lit]
        assert keys == sorted(keys)
        assert [r.rank for r in lit] == list(range(1, len(lit) + 1))

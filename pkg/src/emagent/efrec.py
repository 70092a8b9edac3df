"""Emission-factor recommendation: guided attribute completion, two retrieval
tiers, automatic A-D quality grading, and weighted composite ranking.

Tier one matches the query's source attributes against official guideline
entries, which are recommended as-is, ungraded. Tier two searches the
literature database semantically, grades every candidate on four quality
dimensions, scores them with a weighted sum of the numeric grades
(A=4 .. D=1), and keeps the top five.

Grading thresholds that the quality rubric leaves qualitative (sample-size
cutoffs, the source-class-to-authority map) are fixed here so grades are
reproducible; see auto_grade.
"""

from __future__ import annotations

import datetime
import json
import math
from dataclasses import dataclass
from typing import Mapping

from .errors import IoError, SchemaError
from .providers import ProviderConfig, embed_text
from .retrieval import cosine_similarity

EF_ATTRIBUTES = ("vehicle_type", "fuel_type", "emission_standard", "region")

REGION_SCALES = ("city", "province", "country", "global")

GRADES = ("A", "B", "C", "D")
_GRADE_SCORE = {"A": 4, "B": 3, "C": 2, "D": 1}
_GRADE_RANK = {"A": 0, "B": 1, "C": 2, "D": 3}

METHOD_CLASSES = ("standardized_validated", "reliable_unstandardized",
                  "unvalidated", "undocumented")
_METHOD_GRADE = {
    "standardized_validated": "A",
    "reliable_unstandardized": "B",
    "unvalidated": "C",
    "undocumented": "D",
}

SOURCE_CLASSES = ("peer_reviewed_journal", "official_standard_or_guideline",
                  "thesis_or_conference", "technical_report", "unverifiable")
_AUTHORITY_GRADE = {
    "peer_reviewed_journal": "A",
    "official_standard_or_guideline": "A",
    "thesis_or_conference": "B",
    "technical_report": "C",
    "unverifiable": "D",
}

# sample_representativeness cutoffs: >=30 A, >=10 B, >=1 C, unknown D
SAMPLE_SIZE_A = 30
SAMPLE_SIZE_B = 10

# recency caps in years: <=5 A, <=10 B, <=15 C, older/unknown D
RECENCY_CAPS = ((5, "A"), (10, "B"), (15, "C"))

LITERATURE_TOP_K = 20
RECOMMENDATION_LIMIT = 5


@dataclass(frozen=True)
class EFQuery:
    vehicle_type: str | None = None
    fuel_type: str | None = None
    emission_standard: str | None = None
    region: str | None = None

    @property
    def complete(self) -> bool:
        return not complete_query(self)


def complete_query(partial: EFQuery) -> list[str]:
    """Names of the attributes still missing, in the fixed collection order.

    An empty list means the query is complete and ready for retrieval.
    """
    missing = []
    for name in EF_ATTRIBUTES:
        value = getattr(partial, name)
        if value is None or not str(value).strip():
            missing.append(name)
    return missing


@dataclass(frozen=True)
class SourceAttrs:
    vehicle_type: str
    fuel_type: str
    emission_standard: str
    region: str
    region_scale: str

    def __post_init__(self):
        if self.region_scale not in REGION_SCALES:
            raise ValueError(f"unknown region_scale {self.region_scale!r}")


@dataclass(frozen=True)
class PollutantValue:
    value: float
    units: str

    def __post_init__(self):
        if self.value < 0:
            raise ValueError(f"pollutant value must be >= 0, got {self.value}")
        if not self.units:
            raise ValueError("pollutant value needs non-empty units")


@dataclass(frozen=True)
class QualityGrades:
    data_representativeness: str
    methodological_reliability: str
    sample_representativeness: str
    data_authority: str

    def __post_init__(self):
        for name in ("data_representativeness", "methodological_reliability",
                     "sample_representativeness", "data_authority"):
            if getattr(self, name) not in GRADES:
                raise ValueError(f"{name} must be one of {GRADES}")

    def as_tuple(self) -> tuple[str, str, str, str]:
        return (self.data_representativeness, self.methodological_reliability,
                self.sample_representativeness, self.data_authority)


@dataclass(frozen=True)
class GradeWeights:
    w_data: float = 0.35
    w_method: float = 0.35
    w_sample: float = 0.20
    w_authority: float = 0.10

    def __post_init__(self):
        weights = (self.w_data, self.w_method, self.w_sample, self.w_authority)
        if any(w <= 0 for w in weights):
            raise ValueError("all weights must be positive")
        if abs(math.fsum(weights) - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1.0, got {math.fsum(weights)}")


@dataclass(frozen=True)
class EmissionFactorRecord:
    ef_id: str
    source_attrs: SourceAttrs
    pollutant_values: Mapping[str, PollutantValue]
    method_class: str
    source_class: str
    citation: str
    sample_size: int | None = None
    publication_year: int | None = None
    authoritative: bool = False
    grades: QualityGrades | None = None   # manual override; auto-graded when absent

    def __post_init__(self):
        if not self.ef_id:
            raise ValueError("ef_id must be non-empty")
        if self.method_class not in METHOD_CLASSES:
            raise ValueError(f"unknown method_class {self.method_class!r}")
        if self.source_class not in SOURCE_CLASSES:
            raise ValueError(f"unknown source_class {self.source_class!r}")
        if self.sample_size is not None and self.sample_size <= 0:
            raise ValueError("sample_size must be positive when known")
        if self.authoritative and self.source_class != "official_standard_or_guideline":
            raise ValueError("authoritative records must come from an official "
                             "standard or guideline")
        if not self.pollutant_values:
            raise ValueError(f"record {self.ef_id!r} carries no pollutant values")


@dataclass(frozen=True)
class Recommendation:
    record: EmissionFactorRecord
    rank: int
    tier: str                                  # "guideline" | "literature"
    grades: QualityGrades | None = None        # None for guideline entries
    composite_score: float | None = None

    def __post_init__(self):
        if self.tier not in ("guideline", "literature"):
            raise ValueError(f"unknown tier {self.tier!r}")
        if self.tier == "guideline" and (self.grades is not None
                                         or self.composite_score is not None):
            raise ValueError("guideline entries are recommended without evaluation")


@dataclass(frozen=True)
class RecommendationOutcome:
    """Either the attributes still missing, or the ranked recommendations."""

    missing: tuple[str, ...]
    recommendations: tuple[Recommendation, ...]

    @property
    def complete(self) -> bool:
        return not self.missing


class RegionHierarchy:
    """Region containment chain used for guideline matching and grading.

    Each region maps (case-insensitively) to its scale and parent; walking
    parents reaches the global root. Regions the hierarchy does not know are
    treated as unrelated to everything except global-scale records.
    """

    def __init__(self, nodes: Mapping[str, tuple[str, str | None]]):
        self._nodes = {name.casefold(): (scale, parent.casefold() if parent else None)
                       for name, (scale, parent) in nodes.items()}
        for name, (scale, _) in self._nodes.items():
            if scale not in REGION_SCALES:
                raise ValueError(f"region {name!r} has unknown scale {scale!r}")

    @classmethod
    def default(cls) -> "RegionHierarchy":
        return cls(_DEFAULT_REGIONS)

    @classmethod
    def load(cls, path) -> "RegionHierarchy":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls({name: (node["scale"], node.get("parent")) for name, node in raw.items()})

    def chain(self, region: str) -> list[str]:
        """region plus its ancestors, nearest first, casefolded."""
        out = []
        cursor: str | None = region.casefold()
        while cursor is not None and cursor in self._nodes and cursor not in out:
            out.append(cursor)
            cursor = self._nodes[cursor][1]
        if not out:
            out.append(region.casefold())
        return out

    def scale_of(self, region: str) -> str | None:
        node = self._nodes.get(region.casefold())
        return node[0] if node else None

    def distance(self, query_region: str, record_region: str,
                 record_scale: str) -> int | None:
        """Steps between the two regions along the containment chain.

        0 = same region, 1 = one level apart (either direction), and so on.
        None when the regions are unrelated. Global-scale records relate to
        any known query region by the scale gap up to the global level.
        """
        q = query_region.casefold()
        r = record_region.casefold()
        if q == r:
            return 0
        q_chain = self.chain(query_region)
        if r in q_chain:
            return q_chain.index(r)
        r_chain = self.chain(record_region)
        if q in r_chain:
            return r_chain.index(q)
        if record_scale == "global":
            q_scale = self.scale_of(query_region)
            if q_scale is None:
                return None
            return REGION_SCALES.index("global") - REGION_SCALES.index(q_scale)
        return None


# Desk-scale gazetteer covering fixture regions; extend via RegionHierarchy.load.
_DEFAULT_REGIONS: dict[str, tuple[str, str | None]] = {
    "global": ("global", None),
    "china": ("country", "global"),
    "united states": ("country", "global"),
    "guangdong": ("province", "china"),
    "jiangsu": ("province", "china"),
    "guangzhou": ("city", "guangdong"),
    "shenzhen": ("city", "guangdong"),
    "nanjing": ("city", "jiangsu"),
    "california": ("province", "united states"),
}


def match_guidelines(query: EFQuery, guideline_db: list[EmissionFactorRecord],
                     hierarchy: RegionHierarchy | None = None) -> list[Recommendation]:
    """Tier-one schema match against official guideline entries.

    Vehicle, fuel, and standard must match exactly (case-insensitive); the
    record region must equal the query region or contain it. Matches are
    returned ungraded, closest region first, then by ef_id.
    """
    assert not complete_query(query), "match_guidelines needs a complete query"
    hierarchy = hierarchy or RegionHierarchy.default()
    matched: list[tuple[int, str, EmissionFactorRecord]] = []
    for rec in guideline_db:
        attrs = rec.source_attrs
        if attrs.vehicle_type.casefold() != query.vehicle_type.casefold():
            continue
        if attrs.fuel_type.casefold() != query.fuel_type.casefold():
            continue
        if attrs.emission_standard.casefold() != query.emission_standard.casefold():
            continue
        if attrs.region.casefold() == query.region.casefold():
            specificity = 0
        else:
            chain = hierarchy.chain(query.region)
            if attrs.region.casefold() in chain:
                specificity = chain.index(attrs.region.casefold())
            elif attrs.region_scale == "global":
                # a global guideline contains every region; rank it after
                # anything matched by name
                specificity = len(REGION_SCALES) - 1
            else:
                continue
        matched.append((specificity, rec.ef_id, rec))
    matched.sort(key=lambda t: (t[0], t[1]))
    return [
        Recommendation(record=rec, rank=i + 1, tier="guideline")
        for i, (_, _, rec) in enumerate(matched)
    ]


def _query_text(query: EFQuery) -> str:
    return " ".join(getattr(query, name) for name in EF_ATTRIBUTES)


def _record_text(rec: EmissionFactorRecord) -> str:
    attrs = rec.source_attrs
    return " ".join((attrs.vehicle_type, attrs.fuel_type,
                     attrs.emission_standard, attrs.region))


def search_literature(query: EFQuery, lit_db: list[EmissionFactorRecord],
                      provider: ProviderConfig,
                      k: int = LITERATURE_TOP_K) -> list[EmissionFactorRecord]:
    """Tier-two semantic retrieval: cosine over embedded attribute strings."""
    assert not complete_query(query), "search_literature needs a complete query"
    if not lit_db:
        return []
    query_vec = embed_text(_query_text(query), provider)
    scored = [
        (cosine_similarity(query_vec, embed_text(_record_text(rec), provider)), rec)
        for rec in lit_db
    ]
    scored.sort(key=lambda t: (-t[0], t[1].ef_id))
    return [rec for _, rec in scored[:k]]


def _worse(a: str, b: str) -> str:
    return a if _GRADE_RANK[a] > _GRADE_RANK[b] else b


def auto_grade(record: EmissionFactorRecord, query: EFQuery, now_year: int,
               hierarchy: RegionHierarchy | None = None) -> QualityGrades:
    """Grade one literature record on the four quality dimensions.

    data_representativeness combines region proximity (same region A, one
    level apart B, two C, unrelated D) with a recency cap (within 5y can be
    A, 10y at most B, 15y at most C, unknown or older D); the worse of the
    two wins. The other three dimensions map directly from record metadata.
    """
    assert not complete_query(query), "auto_grade needs a complete query"
    hierarchy = hierarchy or RegionHierarchy.default()

    distance = hierarchy.distance(query.region, record.source_attrs.region,
                                  record.source_attrs.region_scale)
    if distance is None or distance > 2:
        region_grade = "D"
    else:
        region_grade = ("A", "B", "C")[distance]

    if record.publication_year is None:
        recency_cap = "D"
    else:
        age = now_year - record.publication_year
        recency_cap = "D"
        for limit, grade in RECENCY_CAPS:
            if age <= limit:
                recency_cap = grade
                break

    if record.sample_size is None:
        sample_grade = "D"
    elif record.sample_size >= SAMPLE_SIZE_A:
        sample_grade = "A"
    elif record.sample_size >= SAMPLE_SIZE_B:
        sample_grade = "B"
    else:
        sample_grade = "C"

    return QualityGrades(
        data_representativeness=_worse(region_grade, recency_cap),
        methodological_reliability=_METHOD_GRADE[record.method_class],
        sample_representativeness=sample_grade,
        data_authority=_AUTHORITY_GRADE[record.source_class],
    )


def grade_to_score(grade: str) -> int:
    return _GRADE_SCORE[grade]


def composite_score(grades: QualityGrades, weights: GradeWeights = GradeWeights()) -> float:
    """Weighted sum of the numeric grade scores; ranges over [1, 4]."""
    return (weights.w_data * grade_to_score(grades.data_representativeness)
            + weights.w_method * grade_to_score(grades.methodological_reliability)
            + weights.w_sample * grade_to_score(grades.sample_representativeness)
            + weights.w_authority * grade_to_score(grades.data_authority))


def recommend(query: EFQuery, guideline_db: list[EmissionFactorRecord],
              lit_db: list[EmissionFactorRecord], provider: ProviderConfig,
              weights: GradeWeights = GradeWeights(),
              now_year: int | None = None,
              hierarchy: RegionHierarchy | None = None) -> RecommendationOutcome:
    """Full recommendation flow.

    Incomplete queries come back unevaluated with the missing-attribute list.
    Otherwise: guideline matches first (ungraded), then the top five scored
    literature candidates, ties broken by later publication year then ef_id.
    """
    missing = complete_query(query)
    if missing:
        return RecommendationOutcome(missing=tuple(missing), recommendations=())
    if now_year is None:
        now_year = datetime.date.today().year

    recs = list(match_guidelines(query, guideline_db, hierarchy=hierarchy))

    candidates = search_literature(query, lit_db, provider)
    graded = []
    for rec in candidates:
        grades = rec.grades or auto_grade(rec, query, now_year, hierarchy=hierarchy)
        graded.append((composite_score(grades, weights), grades, rec))
    graded.sort(key=lambda t: (
        -t[0],
        -(t[2].publication_year if t[2].publication_year is not None else -(10 ** 9)),
        t[2].ef_id,
    ))
    for i, (score, grades, rec) in enumerate(graded[:RECOMMENDATION_LIMIT]):
        recs.append(Recommendation(record=rec, rank=i + 1, tier="literature",
                                   grades=grades, composite_score=score))
    return RecommendationOutcome(missing=(), recommendations=tuple(recs))


# --- JSON Lines persistence ---------------------------------------------------

def load_ef_records(path) -> list[EmissionFactorRecord]:
    """Read an EF database: JSON Lines, one EmissionFactorRecord per line."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoError(f"cannot read EF database {path}: {exc}") from exc
    records: list[EmissionFactorRecord] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            record = record_from_json(raw)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"line {lineno}: {exc}", line=lineno) from exc
        if record.ef_id in seen:
            raise SchemaError(f"line {lineno}: duplicate ef_id {record.ef_id!r}",
                              line=lineno)
        seen.add(record.ef_id)
        records.append(record)
    return records


def record_from_json(raw: dict) -> EmissionFactorRecord:
    attrs = raw["source_attrs"]
    grades_raw = raw.get("grades")
    return EmissionFactorRecord(
        ef_id=raw["ef_id"],
        source_attrs=SourceAttrs(
            vehicle_type=attrs["vehicle_type"],
            fuel_type=attrs["fuel_type"],
            emission_standard=attrs["emission_standard"],
            region=attrs["region"],
            region_scale=attrs["region_scale"],
        ),
        pollutant_values={
            species: PollutantValue(value=float(pv["value"]), units=pv["units"])
            for species, pv in raw["pollutant_values"].items()
        },
        method_class=raw["method_class"],
        source_class=raw["source_class"],
        citation=raw.get("citation", ""),
        sample_size=raw.get("sample_size"),
        publication_year=raw.get("publication_year"),
        authoritative=bool(raw.get("authoritative", False)),
        grades=QualityGrades(**grades_raw) if grades_raw else None,
    )


def recommendation_to_payload(rec: Recommendation) -> dict:
    return {
        "rank": rec.rank,
        "tier": rec.tier,
        "ef_id": rec.record.ef_id,
        "pollutant_values": {
            species: {"value": pv.value, "units": pv.units}
            for species, pv in sorted(rec.record.pollutant_values.items())
        },
        "composite_score": rec.composite_score,
        "grades": (
            {
                "data_representativeness": rec.grades.data_representativeness,
                "methodological_reliability": rec.grades.methodological_reliability,
                "sample_representativeness": rec.grades.sample_representativeness,
                "data_authority": rec.grades.data_authority,
            }
            if rec.grades is not None else None
        ),
        "citation": rec.record.citation,
    }


def outcome_to_payload(outcome: RecommendationOutcome) -> dict:
    return {
        "complete": outcome.complete,
        "missing": list(outcome.missing),
        "recommendations": [recommendation_to_payload(r) for r in outcome.recommendations],
    }

"""Benchmark loading, the six retrieval/generation metrics, stratified
aggregation, and expert pairwise score aggregation.

All metrics are deterministic embedding/threshold definitions so a full
evaluation run is bitwise-reproducible offline; only context precision and
recall are pure set arithmetic over gold context ids.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .corpus import SENTENCE_TERMINATORS
from .errors import DuplicateId, EmptyRuns, IoError, MismatchedQuestionSets, SchemaError
from .providers import ProviderConfig, embed_text
from .retrieval import ScoredChunk, cosine_similarity

CATEGORIES = ("concepts_definitions", "emission_standards",
              "measurement_techniques", "inventories_data_analysis")
DIFFICULTIES = (1, 2, 3)

METRIC_NAMES = ("faithfulness", "answer_relevancy", "semantic_similarity",
                "context_relevance", "context_precision", "context_recall")

RELEVANCE_THRESHOLD = 0.5

EXPERT_DIMENSIONS = ("relevance", "accuracy", "specification",
                     "citation_authority", "overall")


@dataclass(frozen=True)
class EvalItem:
    item_id: str
    question: str
    reference_answer: str
    gold_contexts: tuple[str, ...]
    category: str
    difficulty: int
    context_free: bool = False   # items declared to need no supporting context

    def __post_init__(self):
        if not self.item_id or not self.question or not self.reference_answer:
            raise ValueError("item_id, question, and reference_answer must be non-empty")
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if self.difficulty not in DIFFICULTIES:
            raise ValueError(f"difficulty must be in {DIFFICULTIES}, got {self.difficulty}")
        if not self.gold_contexts and not self.context_free:
            raise ValueError("gold_contexts empty on an item not declared context_free")


@dataclass(frozen=True)
class MetricScores:
    faithfulness: float
    answer_relevancy: float
    semantic_similarity: float
    context_relevance: float
    context_precision: float
    context_recall: float

    def __post_init__(self):
        for name in METRIC_NAMES:
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}


def load_benchmark(path) -> list[EvalItem]:
    """Read a JSON Lines benchmark; fails atomically at the first bad item."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoError(f"cannot read benchmark {path}: {exc}") from exc
    items: list[EvalItem] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line {lineno}: invalid JSON: {exc}", line=lineno) from exc
        item_id = raw.get("item_id", f"<line {lineno}>")
        try:
            item = EvalItem(
                item_id=raw["item_id"],
                question=raw["question"],
                reference_answer=raw["reference_answer"],
                gold_contexts=tuple(raw.get("gold_contexts", ())),
                category=raw["category"],
                difficulty=raw["difficulty"],
                context_free=bool(raw.get("context_free", False)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"item {item_id}: {exc}", item_id=item_id) from exc
        if item.item_id in seen:
            raise DuplicateId(item.item_id)
        seen.add(item.item_id)
        items.append(item)
    return items


def split_sentences(text: str) -> list[str]:
    """Sentences per the corpus terminator set; a trailing fragment counts."""
    out: list[str] = []
    buf: list[str] = []
    for ch in text:
        buf.append(ch)
        if ch in SENTENCE_TERMINATORS:
            sentence = "".join(buf).strip()
            if sentence and sentence not in SENTENCE_TERMINATORS:
                out.append(sentence)
            buf = []
    tail = "".join(buf).strip()
    if tail:
        out.append(tail)
    return out


def _clipped_cosine(a, b) -> float:
    return min(1.0, max(0.0, cosine_similarity(a, b)))


def score_item(item: EvalItem, retrieved: Sequence[ScoredChunk], answer: str,
               provider: ProviderConfig,
               threshold: float = RELEVANCE_THRESHOLD) -> MetricScores:
    """The six metrics for one evaluated question.

    Precision/recall are set arithmetic on chunk ids against the gold
    contexts. The other four compare embeddings: similarity of answer to
    reference, of question to answer, and thresholded question/chunk and
    sentence/chunk similarities for context relevance and faithfulness.
    """
    gold = set(item.gold_contexts)
    retrieved_ids = [s.chunk_id for s in retrieved]
    hit = sum(1 for cid in retrieved_ids if cid in gold)

    context_precision = hit / len(retrieved_ids) if retrieved_ids else 0.0
    context_recall = (len(gold & set(retrieved_ids)) / len(gold)) if gold else 1.0

    question_vec = embed_text(item.question, provider)
    reference_vec = embed_text(item.reference_answer, provider)
    answer_blank = not answer or not answer.strip()
    answer_vec = None if answer_blank else embed_text(answer, provider)

    semantic_similarity = 0.0 if answer_vec is None else _clipped_cosine(answer_vec, reference_vec)
    answer_relevancy = 0.0 if answer_vec is None else _clipped_cosine(question_vec, answer_vec)

    chunk_vecs = [embed_text(s.chunk.index_text, provider) for s in retrieved]
    if chunk_vecs:
        relevant = sum(
            1 for vec in chunk_vecs if _clipped_cosine(question_vec, vec) >= threshold
        )
        context_relevance = relevant / len(chunk_vecs)
    else:
        context_relevance = 0.0

    sentences = [] if answer_blank else split_sentences(answer)
    if sentences:
        supported = 0
        for sentence in sentences:
            sent_vec = embed_text(sentence, provider)
            if any(_clipped_cosine(sent_vec, vec) >= threshold for vec in chunk_vecs):
                supported += 1
        faithfulness = supported / len(sentences)
    else:
        faithfulness = 1.0

    return MetricScores(
        faithfulness=faithfulness,
        answer_relevancy=answer_relevancy,
        semantic_similarity=semantic_similarity,
        context_relevance=context_relevance,
        context_precision=context_precision,
        context_recall=context_recall,
    )


@dataclass(frozen=True)
class StratumStats:
    kind: str          # "overall" | "category" | "difficulty"
    stratum: str
    count: int
    metrics: Mapping[str, tuple[float, float, float]]   # name -> (mean, min, max)


def aggregate_scores(runs: Sequence[tuple[EvalItem, MetricScores]]) -> list[StratumStats]:
    """Mean/min/max of every metric, overall and per category / difficulty.

    Strata come out in a fixed order (overall, categories in enum order,
    difficulties ascending) regardless of input order; empty strata are
    skipped.
    """
    if not runs:
        raise EmptyRuns("aggregate_scores needs at least one scored item")

    def stats(selected: list[MetricScores]) -> dict[str, tuple[float, float, float]]:
        out = {}
        for name in METRIC_NAMES:
            values = sorted(getattr(m, name) for m in selected)
            out[name] = (math.fsum(values) / len(values), values[0], values[-1])
        return out

    report = [StratumStats("overall", "overall", len(runs),
                           stats([m for _, m in runs]))]
    for category in CATEGORIES:
        selected = [m for item, m in runs if item.category == category]
        if selected:
            report.append(StratumStats("category", category, len(selected), stats(selected)))
    for difficulty in DIFFICULTIES:
        selected = [m for item, m in runs if item.difficulty == difficulty]
        if selected:
            report.append(StratumStats("difficulty", str(difficulty),
                                       len(selected), stats(selected)))
    return report


def report_to_payload(report: list[StratumStats]) -> dict:
    return {
        "strata": [
            {
                "kind": s.kind,
                "stratum": s.stratum,
                "count": s.count,
                "metrics": {
                    name: {"mean": mean, "min": lo, "max": hi}
                    for name, (mean, lo, hi) in s.metrics.items()
                },
            }
            for s in report
        ]
    }


def run_benchmark(items: Sequence[EvalItem], provider: ProviderConfig, index,
                  k: int = 5) -> list[tuple[EvalItem, MetricScores]]:
    """Drive the knowledge pipeline over a benchmark and score every item.

    With a stub provider the whole run is reproducible bit for bit.
    """
    from .agent import answer_knowledge_query

    runs = []
    for item in items:
        retrieved = index.search_top_k(item.question, k, provider)
        answer = answer_knowledge_query(item.question, [], provider, index, k=k)
        runs.append((item, score_item(item, retrieved, answer.answer_text, provider)))
    return runs


# --- expert pairwise aggregation ------------------------------------------------

@dataclass(frozen=True)
class ExpertScore:
    question_id: str
    model_id: str
    relevance: int
    accuracy: int
    specification: int
    citation_authority: int
    overall: int

    def __post_init__(self):
        for name in EXPERT_DIMENSIONS:
            value = getattr(self, name)
            if not 0 <= value <= 5:
                raise ValueError(f"{name} must be within 0-5, got {value}")


def load_expert_scores(path) -> list[ExpertScore]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            expected = ["question_id", "model_id", *EXPERT_DIMENSIONS]
            if reader.fieldnames != expected:
                raise SchemaError(f"header must be exactly {','.join(expected)}", line=1)
            scores = []
            for lineno, row in enumerate(reader, start=2):
                try:
                    scores.append(ExpertScore(
                        question_id=row["question_id"],
                        model_id=row["model_id"],
                        **{dim: int(row[dim]) for dim in EXPERT_DIMENSIONS},
                    ))
                except (TypeError, ValueError) as exc:
                    raise SchemaError(f"line {lineno}: {exc}", line=lineno) from exc
            return scores
    except OSError as exc:
        raise IoError(f"cannot read expert scores {path}: {exc}") from exc


@dataclass(frozen=True)
class PairwiseReport:
    model_a: str
    model_b: str
    question_count: int
    # dimension -> (wins_a, ties, wins_b)
    win_tie_loss: Mapping[str, tuple[int, int, int]]
    # model -> dimension -> mean
    dimension_means: Mapping[str, Mapping[str, float]]


def pairwise_win_rates(scores: Sequence[ExpertScore], model_a: str,
                       model_b: str) -> PairwiseReport:
    """Per-dimension win/tie/loss counts and per-model dimension means.

    Multiple raters of the same (question, model) pair are averaged per
    dimension before comparison, so each question contributes exactly one
    win, tie, or loss.
    """
    per_question: dict[str, dict[str, list[ExpertScore]]] = {}
    for score in scores:
        if score.model_id not in (model_a, model_b):
            continue
        per_question.setdefault(score.question_id, {}).setdefault(
            score.model_id, []).append(score)

    questions_a = {q for q, models in per_question.items() if model_a in models}
    questions_b = {q for q, models in per_question.items() if model_b in models}
    if not questions_a or questions_a != questions_b:
        raise MismatchedQuestionSets(
            f"models {model_a!r} and {model_b!r} must be scored on the same questions")

    def mean_of(question: str, model: str, dim: str) -> float:
        values = [getattr(s, dim) for s in per_question[question][model]]
        return math.fsum(values) / len(values)

    questions = sorted(questions_a)
    win_tie_loss: dict[str, tuple[int, int, int]] = {}
    for dim in EXPERT_DIMENSIONS:
        wins_a = ties = wins_b = 0
        for question in questions:
            a = mean_of(question, model_a, dim)
            b = mean_of(question, model_b, dim)
            if a > b:
                wins_a += 1
            elif a < b:
                wins_b += 1
            else:
                ties += 1
        win_tie_loss[dim] = (wins_a, ties, wins_b)

    dimension_means = {
        model: {
            dim: math.fsum(mean_of(q, model, dim) for q in questions) / len(questions)
            for dim in EXPERT_DIMENSIONS
        }
        for model in (model_a, model_b)
    }
    return PairwiseReport(
        model_a=model_a,
        model_b=model_b,
        question_count=len(questions),
        win_tie_loss=win_tie_loss,
        dimension_means=dimension_means,
    )


def pairwise_to_payload(report: PairwiseReport) -> dict:
    return {
        "model_a": report.model_a,
        "model_b": report.model_b,
        "question_count": report.question_count,
        "win_tie_loss": {
            dim: {"wins_a": w, "ties": t, "wins_b": l}
            for dim, (w, t, l) in report.win_tie_loss.items()
        },
        "dimension_means": {
            model: dict(dims) for model, dims in report.dimension_means.items()
        },
    }

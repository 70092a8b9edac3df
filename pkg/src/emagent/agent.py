"""Query routing and the two answer paths.

Every query is classified as knowledge QA or data analysis. Knowledge
queries are answered by retrieval-grounded generation with citations and an
explicit fallback notice when nothing relevant is indexed. Analysis queries
go through the function-calling toolchain with a bounded retry loop: each
invalid or failing call is reported back to the model and retried, and every
attempt stays on the record.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

from .errors import AnalysisFailed, AnswerUnavailable, EmptyText, ExecutionError, TransportError
from .inventory import ChartData, InventoryStore, chart_to_payload
from .providers import ChatMessage, ProviderConfig, chat_complete
from .retrieval import DEFAULT_TOP_K, ScoredChunk, VectorIndex
from .toolchain import (
    FunctionCall,
    FunctionRegistry,
    execute_call,
    parse_function_call,
    violations_text,
)

KNOWLEDGE_QA = "KnowledgeQA"
DATA_ANALYSIS = "DataAnalysis"

FALLBACK_NOTICE = "No sufficient domain context was found to answer this question."

HISTORY_WINDOW = 3
DEFAULT_MAX_RETRIES = 2

# Queries containing any of these go to the analysis toolchain; everything
# else is knowledge QA. Applied lowercased.
_ANALYSIS_KEYWORDS = (
    "plot", "chart", "trend", "contribution", "inventory", "aggregate",
    "by sector", "by year", "by subsector",
    # Chinese equivalents
    "图",        # 图 (chart/figure)
    "趋势",  # 趋势 (trend)
    "贡献",  # 贡献 (contribution)
    "清单",  # 清单 (inventory)
    "占比",  # 占比 (share)
    "汇总",  # 汇总 (aggregate)
    "排放量",        # 排放量 (emission amount)
    "按部门",        # 按部门 (by sector)
    "按年份",        # 按年份 (by year)
)
# "emissions of/from X", "annual ... emissions" are analysis phrasings even
# without an explicit chart word.
_ANALYSIS_PATTERNS = (
    re.compile(r"\bemissions?\s+(?:of|from)\b"),
    re.compile(r"\bannual\b[^.!?。！？]*\bemissions?\b"),
)


def _load_prompt(name: str) -> str:
    return resources.files("emagent.prompts").joinpath(name).read_text(encoding="utf-8")


class PromptPack:
    """Named plain-text templates with ``{{name}}`` placeholders.

    Defaults ship with the package; a directory of same-named .txt files can
    override any of them.
    """

    TEMPLATE_NAMES = ("classification", "grounding", "grounding_fallback",
                      "function_calling")

    def __init__(self, templates: dict[str, str] | None = None):
        self._templates = {name: _load_prompt(f"{name}.txt")
                           for name in self.TEMPLATE_NAMES}
        if templates:
            self._templates.update(templates)

    @classmethod
    def load(cls, directory) -> "PromptPack":
        overrides = {}
        for name in cls.TEMPLATE_NAMES:
            candidate = Path(directory) / f"{name}.txt"
            if candidate.exists():
                overrides[name] = candidate.read_text(encoding="utf-8")
        return cls(overrides)

    def render(self, name: str, **values: str) -> str:
        text = self._templates[name]
        for key, value in values.items():
            text = text.replace("{{" + key + "}}", value)
        return text


@dataclass(frozen=True)
class TraceEntry:
    """One attempt in the analysis retry loop."""

    raw_text: str
    call: FunctionCall | None
    ok: bool
    detail: str


@dataclass(frozen=True)
class ConversationTurn:
    turn_index: int
    user_text: str
    category: str
    answer_text: str
    citations: tuple[str, ...] = ()
    chart: ChartData | None = None
    function_trace: tuple[TraceEntry, ...] = ()

    def __post_init__(self):
        if self.category == KNOWLEDGE_QA and self.function_trace:
            raise ValueError("knowledge turns carry no function trace")
        if self.category == DATA_ANALYSIS and self.citations:
            raise ValueError("analysis turns carry no citations")


@dataclass(frozen=True)
class GroundedAnswer:
    answer_text: str
    citations: tuple[str, ...]
    grounded: bool

    def __post_init__(self):
        if self.grounded and not self.citations:
            raise ValueError("grounded answers must cite at least one chunk")
        if not self.grounded and self.answer_text != FALLBACK_NOTICE:
            raise ValueError("ungrounded answers must be the fallback notice verbatim")


def classify_query(query: str, provider: ProviderConfig,
                   prompts: PromptPack | None = None) -> str:
    """Route a query to KnowledgeQA or DataAnalysis.

    Live mode asks the model for a single-token I/II verdict and falls back
    to the keyword heuristic when the reply is unparsable; stub mode uses the
    heuristic directly so routing stays deterministic offline.
    """
    if not query or not query.strip():
        raise EmptyText("cannot classify an empty query")
    if provider.mode == "live":
        prompts = prompts or PromptPack()
        reply = chat_complete(
            [ChatMessage("user", prompts.render("classification", query=query))],
            provider,
        ).strip().rstrip(".")
        if reply == "I":
            return KNOWLEDGE_QA
        if reply == "II":
            return DATA_ANALYSIS
    return _heuristic_category(query)


def _heuristic_category(query: str) -> str:
    lowered = query.lower()
    if any(keyword in lowered for keyword in _ANALYSIS_KEYWORDS):
        return DATA_ANALYSIS
    if any(pattern.search(lowered) for pattern in _ANALYSIS_PATTERNS):
        return DATA_ANALYSIS
    return KNOWLEDGE_QA


def build_grounded_prompt(query: str, contexts: Sequence[ScoredChunk],
                          history: Sequence[ConversationTurn],
                          prompts: PromptPack | None = None) -> list[ChatMessage]:
    """Messages for a grounded answer: system instruction with delimited
    context blocks, the last HISTORY_WINDOW turns, then the query.

    With no contexts the system message instead instructs the model to return
    the exact fallback notice.
    """
    prompts = prompts or PromptPack()
    if contexts:
        blocks = "\n".join(
            f"[CONTEXT {s.chunk_id}] {s.chunk.display_text} [/CONTEXT]"
            for s in contexts
        )
        system_text = prompts.render("grounding", contexts=blocks)
    else:
        system_text = prompts.render("grounding_fallback",
                                     fallback_notice=FALLBACK_NOTICE)
    messages = [ChatMessage("system", system_text)]
    for turn in history[-HISTORY_WINDOW:]:
        messages.append(ChatMessage("user", turn.user_text))
        messages.append(ChatMessage("assistant", turn.answer_text))
    messages.append(ChatMessage("user", query))
    return messages


def answer_knowledge_query(query: str, history: Sequence[ConversationTurn],
                           provider: ProviderConfig, index: VectorIndex,
                           k: int = DEFAULT_TOP_K,
                           prompts: PromptPack | None = None) -> GroundedAnswer:
    """Retrieve top-k context, ask the provider, and cite what was retrieved.

    An empty retrieval set short-circuits to the fallback notice; the model
    is never asked to improvise without context.
    """
    try:
        retrieved = index.search_top_k(query, k, provider)
        if not retrieved:
            return GroundedAnswer(answer_text=FALLBACK_NOTICE, citations=(), grounded=False)
        messages = build_grounded_prompt(query, retrieved, history, prompts=prompts)
        answer_text = chat_complete(messages, provider)
    except TransportError as exc:
        raise AnswerUnavailable(str(exc)) from exc
    return GroundedAnswer(
        answer_text=answer_text,
        citations=tuple(s.chunk_id for s in retrieved),
        grounded=True,
    )


def render_result_text(result) -> str:
    """Deterministic one-line narration of an analysis result."""
    if isinstance(result, ChartData):
        parts = ", ".join(name for name, _ in result.series[:6])
        return f"{result.title} [{result.kind}; units: {result.units}; series: {parts}]"
    if hasattr(result, "rows"):   # AggregateTable
        parts = "; ".join(f"{key}: {total:g} ({share:.1%})"
                          for key, total, share in result.rows[:6])
        return f"totals by {result.group_key}: {parts}"
    return str(result)


def run_analysis_query(query: str, history: Sequence[ConversationTurn],
                       provider: ProviderConfig, registry: FunctionRegistry,
                       store: InventoryStore,
                       max_retries: int = DEFAULT_MAX_RETRIES,
                       prompts: PromptPack | None = None,
                       turn_index: int = 0) -> ConversationTurn:
    """Ask the model for a function call, validate, execute, retry on failure.

    Each failed attempt appends the error text to the conversation before the
    next try; the whole attempt sequence lands in the turn's function_trace.
    Raises AnalysisFailed (with the trace) after max_retries retries.
    """
    if len(registry) == 0:
        raise AnalysisFailed("no functions registered", trace=())
    prompts = prompts or PromptPack()
    prompt = prompts.render(
        "function_calling",
        functions=json.dumps(registry.describe(), ensure_ascii=False, indent=2),
        query=query,
    )
    messages = [ChatMessage("user", prompt)]
    trace: list[TraceEntry] = []
    last_error = ""
    for _ in range(max_retries + 1):
        try:
            raw = chat_complete(messages, provider)
        except TransportError as exc:
            raise AnalysisFailed(f"provider unavailable: {exc}", trace=trace) from exc
        parsed = parse_function_call(raw, registry)
        if isinstance(parsed, list):
            last_error = violations_text(parsed)
            trace.append(TraceEntry(raw_text=raw, call=None, ok=False, detail=last_error))
        else:
            try:
                result = execute_call(parsed, registry, store)
            except ExecutionError as exc:
                last_error = str(exc)
                trace.append(TraceEntry(raw_text=raw, call=parsed, ok=False,
                                        detail=last_error))
            else:
                trace.append(TraceEntry(raw_text=raw, call=parsed, ok=True, detail="ok"))
                chart = result if isinstance(result, ChartData) else None
                return ConversationTurn(
                    turn_index=turn_index,
                    user_text=query,
                    category=DATA_ANALYSIS,
                    answer_text=render_result_text(result),
                    chart=chart,
                    function_trace=tuple(trace),
                )
        messages = messages + [
            ChatMessage("assistant", raw),
            ChatMessage("user", f"That call was rejected: {last_error}. "
                                "Reply with a corrected JSON function call."),
        ]
    raise AnalysisFailed(last_error or "no valid function call produced", trace=trace)


@dataclass
class Session:
    session_id: str
    turns: list[ConversationTurn] = field(default_factory=list)


class Agent:
    """Binds the provider, index, toolchain, and inventory into one router."""

    def __init__(self, provider: ProviderConfig, index: VectorIndex,
                 registry: FunctionRegistry, store: InventoryStore,
                 k: int = DEFAULT_TOP_K, max_retries: int = DEFAULT_MAX_RETRIES,
                 prompts: PromptPack | None = None):
        self.provider = provider
        self.index = index
        self.registry = registry
        self.store = store
        self.k = k
        self.max_retries = max_retries
        self.prompts = prompts or PromptPack()

    def run_turn(self, query: str, session: Session) -> ConversationTurn:
        """Classify, answer, and append the turn to the session."""
        category = classify_query(query, self.provider, prompts=self.prompts)
        turn_index = len(session.turns)
        if category == KNOWLEDGE_QA:
            answer = answer_knowledge_query(query, session.turns, self.provider,
                                            self.index, k=self.k, prompts=self.prompts)
            turn = ConversationTurn(
                turn_index=turn_index,
                user_text=query,
                category=KNOWLEDGE_QA,
                answer_text=answer.answer_text,
                citations=answer.citations,
            )
        else:
            turn = run_analysis_query(query, session.turns, self.provider,
                                      self.registry, self.store,
                                      max_retries=self.max_retries,
                                      prompts=self.prompts, turn_index=turn_index)
        session.turns.append(turn)
        return turn


def turn_to_payload(turn: ConversationTurn) -> dict:
    return {
        "turn_index": turn.turn_index,
        "user_text": turn.user_text,
        "category": turn.category,
        "answer_text": turn.answer_text,
        "citations": list(turn.citations),
        "chart": chart_to_payload(turn.chart) if turn.chart is not None else None,
        "function_trace": [
            {
                "ok": entry.ok,
                "function": entry.call.name if entry.call else None,
                "arguments": dict(entry.call.arguments) if entry.call else None,
                "detail": entry.detail,
            }
            for entry in turn.function_trace
        ],
    }

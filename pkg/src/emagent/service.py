"""HTTP facade over the agent, EF recommender, inventory analytics, and
evaluation runner.

Endpoints add transport only: every response body is exactly the payload the
corresponding library call produces, so the service can be golden-tested
against direct calls. Sessions are in-memory with idle-TTL eviction;
requests within one session are serialized, sessions run concurrently.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field as dataclass_field

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import efrec, evalkit
from .agent import Agent, PromptPack, Session, turn_to_payload
from .errors import (
    AnalysisFailed,
    AnswerUnavailable,
    ConflictingFilters,
    EmagentError,
    KindMismatch,
    TransportError,
)
from .inventory import (
    CHART_KINDS,
    GROUP_KEYS,
    FilterSpec,
    InventoryStore,
    aggregate,
    aggregate_by_year,
    chart_to_payload,
    make_chart,
    table_to_payload,
)
from .corpus import SPECIES_REGISTRY
from .providers import ProviderConfig
from .retrieval import VectorIndex
from .toolchain import FunctionCall, FunctionRegistry, FunctionSpec, ParamSpec, validate_call

DEFAULT_SESSION_TTL = 3600.0

_STATUS = {
    "bad_request": 400,
    "not_found": 404,
    "provider_unavailable": 503,
    "analysis_failed": 502,
    "internal": 500,
}


def api_error(code: str, message: str, details=None) -> JSONResponse:
    return JSONResponse(
        status_code=_STATUS[code],
        content={"code": code, "message": message, "details": details},
    )


@dataclass
class SessionState:
    session_id: str
    session: Session
    created_at: float
    last_active: float
    lock: threading.Lock = dataclass_field(default_factory=threading.Lock)


class SessionStore:
    """In-memory sessions with lazy idle-TTL eviction."""

    def __init__(self, ttl: float = DEFAULT_SESSION_TTL, now=time.monotonic):
        self.ttl = ttl
        self._now = now
        self._sessions: dict[str, SessionState] = {}
        self._lock = threading.Lock()

    def get_or_create(self, session_id: str | None) -> SessionState:
        with self._lock:
            now = self._now()
            expired = [sid for sid, st in self._sessions.items()
                       if now - st.last_active > self.ttl]
            for sid in expired:
                del self._sessions[sid]
            if not session_id:
                session_id = uuid.uuid4().hex
            state = self._sessions.get(session_id)
            if state is None:
                state = SessionState(
                    session_id=session_id,
                    session=Session(session_id=session_id),
                    created_at=now,
                    last_active=now,
                )
                self._sessions[session_id] = state
            state.last_active = now
            return state


# Body schema for /api/inventory/query, validated with the same machinery
# as model-emitted tool calls.
INVENTORY_QUERY_SPEC = FunctionSpec(
    name="inventory_query",
    description="Filter, group, and aggregate inventory rows.",
    parameters=(
        ParamSpec("group_key", "enum", values=GROUP_KEYS),
        ParamSpec("region", "string", required=False),
        ParamSpec("year", "integer", required=False),
        ParamSpec("sector", "string", required=False),
        ParamSpec("subsector", "string", required=False),
        ParamSpec("pollutant", "enum", values=SPECIES_REGISTRY, required=False),
        ParamSpec("from_year", "integer", required=False),
        ParamSpec("to_year", "integer", required=False),
        ParamSpec("chart", "enum", values=CHART_KINDS, required=False),
        ParamSpec("title", "string", required=False),
    ),
)


def run_inventory_query(body: dict, store: InventoryStore):
    """Library-level twin of the /api/inventory/query endpoint.

    Returns the table payload, or a chart payload when ``chart`` is given.
    Raises ConflictingFilters / KindMismatch / ValueError for bad bodies that
    pass schema validation.
    """
    year_range = None
    if ("from_year" in body) != ("to_year" in body):
        raise ConflictingFilters("from_year and to_year must be given together")
    if "from_year" in body:
        year_range = (body["from_year"], body["to_year"])
    filters = FilterSpec(
        region=body.get("region"),
        year=body.get("year"),
        sector=body.get("sector"),
        subsector=body.get("subsector"),
        pollutant=body.get("pollutant"),
        year_range=year_range,
    )
    group_key = body["group_key"]
    chart_kind = body.get("chart")
    if chart_kind is None:
        return table_to_payload(aggregate(filters, group_key, store))
    title = body.get("title", f"emissions by {group_key}")
    if chart_kind == "pie":
        chart = make_chart(aggregate(filters, group_key, store), "pie", title)
    else:
        chart = make_chart(aggregate_by_year(filters, group_key, store),
                           chart_kind, title)
    return chart_to_payload(chart)


@dataclass
class AppResources:
    provider: ProviderConfig
    index: VectorIndex
    registry: "FunctionRegistry"
    store: InventoryStore
    guideline_db: list = dataclass_field(default_factory=list)
    literature_db: list = dataclass_field(default_factory=list)
    hierarchy: efrec.RegionHierarchy | None = None
    prompts: PromptPack | None = None
    k: int = 5
    max_retries: int = 2
    session_ttl: float = DEFAULT_SESSION_TTL


def create_app(res: AppResources) -> FastAPI:
    app = FastAPI(title="emagent", docs_url=None, redoc_url=None)
    agent = Agent(res.provider, res.index, res.registry, res.store,
                  k=res.k, max_retries=res.max_retries, prompts=res.prompts)
    sessions = SessionStore(ttl=res.session_ttl)
    eval_runs: dict[str, dict] = {}
    eval_lock = threading.Lock()

    async def read_json(request: Request) -> dict | None:
        try:
            body = await request.json()
        except Exception:
            return None
        return body if isinstance(body, dict) else None

    @app.get("/api/health")
    async def health():
        return JSONResponse(content={
            "status": "ok",
            "index_size": len(res.index),
            "inventory_rows": len(res.store),
            "functions": len(res.registry),
        })

    @app.post("/api/chat")
    async def chat(request: Request):
        body = await read_json(request)
        if body is None:
            return api_error("bad_request", "request body must be a JSON object")
        message = body.get("message")
        if not isinstance(message, str) or not message.strip():
            return api_error("bad_request", "message must be a non-empty string")
        state = sessions.get_or_create(body.get("session_id"))
        with state.lock:
            try:
                turn = agent.run_turn(message, state.session)
            except AnalysisFailed as exc:
                return api_error("analysis_failed", str(exc), details={
                    "attempts": len(exc.trace),
                })
            except (AnswerUnavailable, TransportError) as exc:
                return api_error("provider_unavailable", str(exc))
        return JSONResponse(content={"session_id": state.session_id,
                                     **turn_to_payload(turn)})

    @app.post("/api/ef/recommend")
    async def ef_recommend(request: Request):
        body = await read_json(request)
        if body is None:
            return api_error("bad_request", "request body must be a JSON object")
        unknown = set(body) - set(efrec.EF_ATTRIBUTES)
        if unknown:
            return api_error("bad_request", f"unknown fields {sorted(unknown)}")
        for name in efrec.EF_ATTRIBUTES:
            if name in body and body[name] is not None and not isinstance(body[name], str):
                return api_error("bad_request", f"{name} must be a string")
        query = efrec.EFQuery(**{name: body.get(name) for name in efrec.EF_ATTRIBUTES})
        # incomplete queries are the guided-dialogue contract, not an error
        outcome = efrec.recommend(query, res.guideline_db, res.literature_db,
                                  res.provider, hierarchy=res.hierarchy)
        return JSONResponse(content=efrec.outcome_to_payload(outcome))

    @app.post("/api/inventory/query")
    async def inventory_query(request: Request):
        body = await read_json(request)
        if body is None:
            return api_error("bad_request", "request body must be a JSON object")
        violations = validate_call(
            FunctionCall(name=INVENTORY_QUERY_SPEC.name, arguments=body),
            INVENTORY_QUERY_SPEC,
        )
        if violations:
            return api_error("bad_request", "invalid inventory query", details=[
                {"kind": v.kind, "path": v.path, "message": v.message}
                for v in violations
            ])
        try:
            payload = run_inventory_query(body, res.store)
        except (ConflictingFilters, KindMismatch, ValueError) as exc:
            return api_error("bad_request", str(exc),
                             details={"error": type(exc).__name__})
        return JSONResponse(content=payload)

    @app.post("/api/eval/run")
    async def eval_run(request: Request):
        body = await read_json(request)
        if body is None or not isinstance(body.get("benchmark"), str):
            return api_error("bad_request", "body must carry a benchmark file path")
        k = body.get("k", res.k)
        if not isinstance(k, int) or k < 1:
            return api_error("bad_request", "k must be a positive integer")
        try:
            items = evalkit.load_benchmark(body["benchmark"])
            runs = evalkit.run_benchmark(items, res.provider, res.index, k=k)
            report = evalkit.report_to_payload(evalkit.aggregate_scores(runs))
        except EmagentError as exc:
            return api_error("bad_request", str(exc))
        with eval_lock:
            run_id = f"run-{len(eval_runs) + 1}"
            eval_runs[run_id] = report
        return JSONResponse(content={"run_id": run_id, "report": report})

    @app.get("/api/eval/{run_id}")
    async def eval_get(run_id: str):
        report = eval_runs.get(run_id)
        if report is None:
            return api_error("not_found", f"no evaluation run named {run_id!r}")
        return JSONResponse(content={"run_id": run_id, "report": report})

    return app

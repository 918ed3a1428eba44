"""HTTP API tying both workflow stages together for interactive and
programmatic clients. Session state transitions are enforced per request;
every mutation is persisted to the workdir."""

from __future__ import annotations

import logging
import threading
import uuid
from typing import Any, Dict, List, Optional, Tuple

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from . import corpus as corpus_mod
from . import review
from .annotate import annotate_table
from .config import AppConfig
from .domain import PaperRecord, PropertyDef, ResearchInterest, SearchRequest
from .errors import (
    AllConnectorsFailed,
    CellValidated,
    IllegalTransition,
    LitloopError,
    SchemaViolation,
    TargetValidated,
    UnknownCell,
    UnknownConnector,
    UnknownResource,
    UnknownRow,
    UnknownTarget,
)
from .extraction import DataModel, define_model, extract_corpus, reextract_cells, update_model
from .store import Session, Store, record_to_dict

log = logging.getLogger(__name__)

_VALIDATION_ERRORS = (
    "empty_model", "duplicate_property", "invalid_interest", "empty_corpus",
    "not_a_directory", "empty_directory", "malformed_response",
    "budget_exceeded", "schema_violation", "malformed_doi", "empty_title",
)
_NOT_FOUND_ERRORS = (
    "unknown_resource", "unknown_cell", "unknown_row", "unknown_target",
    "unknown_connector",
)


def _status_for(exc: LitloopError) -> int:
    if isinstance(exc, IllegalTransition) or isinstance(exc, (CellValidated, TargetValidated)):
        return 409
    if exc.code in _NOT_FOUND_ERRORS:
        return 404
    if exc.code in _VALIDATION_ERRORS:
        return 422
    return 500


def _session_body(session: Session) -> Dict[str, Any]:
    return {
        "session_id": session.session_id,
        "state": session.state,
        "corpus_id": session.corpus_id,
        "model_id": session.model_id,
        "table_id": session.table_id,
    }


class JobRegistry:
    """In-memory extraction jobs, polled by clients."""

    def __init__(self):
        self._jobs: Dict[str, Dict[str, Any]] = {}
        self._lock = threading.Lock()

    def create(self, session_id: str) -> str:
        job_id = uuid.uuid4().hex[:12]
        with self._lock:
            self._jobs[job_id] = {
                "job_id": job_id, "session_id": session_id,
                "status": "pending", "table_id": None, "error": None,
            }
        return job_id

    def update(self, job_id: str, **fields: Any) -> None:
        with self._lock:
            self._jobs[job_id].update(fields)

    def get(self, job_id: str) -> Dict[str, Any]:
        with self._lock:
            if job_id not in self._jobs:
                raise UnknownResource(f"unknown job {job_id}")
            return dict(self._jobs[job_id])


def create_app(config: AppConfig) -> FastAPI:
    app = FastAPI(title="litloop")
    store = Store(config.workdir)
    jobs = JobRegistry()
    app.state.store = store
    app.state.jobs = jobs
    app.state.config = config

    @app.exception_handler(LitloopError)
    async def litloop_error_handler(request: Request, exc: LitloopError):
        body: Dict[str, Any] = {"code": exc.code, "message": exc.message}
        if isinstance(exc, SchemaViolation) and exc.path:
            body["path"] = exc.path
        return JSONResponse(status_code=_status_for(exc), content=body)

    def commit(session: Session, action: str, transition: Optional[str] = None):
        """Apply a state transition (when given), log the action, persist.
        Callers validate inputs and run the operation before committing."""
        if transition:
            session.apply(transition)
        session.log("user", action)
        store.save_session(session)

    @app.post("/api/sessions", status_code=201)
    def create_session():
        session = store.create_session()
        return _session_body(session)

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        return _session_body(store.get_session(session_id))

    @app.post("/api/sessions/{session_id}/keywords")
    def suggest_keywords(session_id: str, body: Dict[str, Any]):
        session = store.get_session(session_id)
        interest = ResearchInterest(text=str(body.get("interest", "")))
        suggestion = config.gateway.suggest_keywords(interest)
        with store.session_lock(session_id):
            commit(session, "keywords")
        return {"keywords": list(suggestion.keywords),
                "session": _session_body(session)}

    @app.post("/api/sessions/{session_id}/search")
    def search(session_id: str, body: Dict[str, Any]):
        session = store.get_session(session_id)
        with store.session_lock(session_id):
            if "query" not in body or not str(body["query"]).strip():
                raise SchemaViolation("query is required", "$.query")
            connector_ids = tuple(body.get("connector_ids") or config.registry.ids())
            year_range = body.get("year_range")
            try:
                request = SearchRequest(
                    query=str(body["query"]),
                    connector_ids=connector_ids,
                    max_results=int(body.get("limit", 20)),
                    open_access_only=bool(body.get("open_access_only", False)),
                    year_range=tuple(year_range) if year_range else None,
                )
            except ValueError as exc:
                raise SchemaViolation(str(exc), "$") from exc
            session.check("search")
            results = config.registry.search(request)
            session.last_results = list(results.records)
            commit(session, f"search:{request.query}", "search")
        return {
            "records": [record_to_dict(r) for r in results.records],
            "per_connector_status": {
                cid: {"status": status, "detail": detail}
                for cid, (status, detail) in results.per_connector_status.items()
            },
            "dedup_report": results.dedup_report,
            "session": _session_body(session),
        }

    @app.post("/api/sessions/{session_id}/corpus/selection")
    def select(session_id: str, body: Dict[str, Any]):
        session = store.get_session(session_id)
        with store.session_lock(session_id):
            record_ids = body.get("record_ids")
            if not isinstance(record_ids, list) or not record_ids:
                raise SchemaViolation("record_ids must be a non-empty list", "$.record_ids")
            session.check("select")
            by_id = {r.record_id: r for r in session.last_results}
            missing = [rid for rid in record_ids if rid not in by_id]
            if missing:
                raise UnknownResource(f"record ids not in last search results: {missing}")
            if session.corpus_id is None:
                corpus = corpus_mod.new_corpus()
                session.corpus_id = corpus.corpus_id
            else:
                corpus = store.get_corpus(session.corpus_id)
            skipped = corpus_mod.add_selection(corpus, [by_id[rid] for rid in record_ids])
            store.save_corpus(corpus)
            commit(session, f"select:{len(record_ids)}", "select")
        return {"corpus_id": corpus.corpus_id, "entry_count": len(corpus),
                "skipped": skipped, "session": _session_body(session)}

    @app.post("/api/sessions/{session_id}/corpus/fetch")
    def fetch_documents(session_id: str, body: Optional[Dict[str, Any]] = None):
        session = store.get_session(session_id)
        with store.session_lock(session_id):
            session.check("fetch")
            if session.corpus_id is None:
                raise IllegalTransition("no corpus selected yet")
            corpus = store.get_corpus(session.corpus_id)
            if not corpus.entries:
                raise IllegalTransition("corpus is empty")
            corpus_mod.fetch_documents(
                corpus, config.workdir,
                fetcher=config.fetcher,
                max_workers=config.fetch_workers,
            )
            store.save_corpus(corpus)
            commit(session, "fetch", "fetch")
        statuses = [e.fetch_status for e in corpus.entries]
        return {"corpus_id": corpus.corpus_id,
                "fetched": statuses.count("fetched"),
                "failed": sum(1 for s in statuses if s.startswith("failed:")),
                "session": _session_body(session)}

    @app.post("/api/sessions/{session_id}/corpus/import")
    def import_corpus(session_id: str, body: Dict[str, Any]):
        session = store.get_session(session_id)
        with store.session_lock(session_id):
            path = body.get("path")
            if not path:
                raise SchemaViolation("path is required", "$.path")
            session.check("import")
            corpus = corpus_mod.import_corpus(path)
            session.corpus_id = corpus.corpus_id
            store.save_corpus(corpus)
            commit(session, f"import:{path}", "import")
        return {"corpus_id": corpus.corpus_id, "entry_count": len(corpus),
                "session": _session_body(session)}

    @app.put("/api/sessions/{session_id}/model")
    def define_or_edit_model(session_id: str, body: Dict[str, Any]):
        session = store.get_session(session_id)
        with store.session_lock(session_id):
            props_raw = body.get("properties")
            if not isinstance(props_raw, list):
                raise SchemaViolation("properties must be a list", "$.properties")
            try:
                properties = [
                    PropertyDef(
                        name=str(p.get("name", "")),
                        description=p.get("description"),
                        expected_kind=p.get("expected_kind", "free_text"),
                    )
                    for p in props_raw
                ]
            except ValueError as exc:
                raise SchemaViolation(str(exc), "$.properties") from exc
            session.check("define_model")
            if session.model_id is None:
                model = define_model(properties)
                session.model_id = model.model_id
            else:
                model = update_model(store.get_model(session.model_id), properties)
            store.save_model(model)
            commit(session, "define_model", "define_model")
        return {"model_id": model.model_id, "version": model.version,
                "properties": [p.name for p in model.properties],
                "session": _session_body(session)}

    def _run_extraction(session_id: str, job_id: str):
        session = store.get_session(session_id)
        jobs.update(job_id, status="running")
        try:
            model = store.get_model(session.model_id)
            corpus = store.get_corpus(session.corpus_id)
            table = extract_corpus(model, corpus, config.gateway,
                                   max_workers=config.extract_workers)
            with store.session_lock(session_id):
                store.save_table(table)
                session.table_id = table.table_id
                session.apply("finish_extract")
                session.log("machine", f"extracted:{table.table_id}")
                store.save_session(session)
            jobs.update(job_id, status="succeeded", table_id=table.table_id)
        except Exception as exc:
            log.exception("extraction job %s failed", job_id)
            with store.session_lock(session_id):
                try:
                    session.apply("fail_extract")
                except IllegalTransition:
                    pass
                session.log("machine", f"extraction failed: {exc}")
                store.save_session(session)
            jobs.update(job_id, status="failed", error=str(exc))

    @app.post("/api/sessions/{session_id}/extract", status_code=202)
    def extract(session_id: str, body: Optional[Dict[str, Any]] = None):
        session = store.get_session(session_id)
        with store.session_lock(session_id):
            session.check("extract")
            if session.model_id is None:
                raise IllegalTransition("no data model defined")
            if session.corpus_id is None:
                raise IllegalTransition("no corpus available")
            commit(session, "extract", "extract")
        job_id = jobs.create(session_id)
        thread = threading.Thread(target=_run_extraction, args=(session_id, job_id),
                                  daemon=True)
        thread.start()
        return {"job_id": job_id, "session": _session_body(session)}

    @app.get("/api/jobs/{job_id}")
    def job_status(job_id: str):
        return jobs.get(job_id)

    def _session_for_table(table_id: str) -> Optional[Session]:
        for session in store.sessions.values():
            if session.table_id == table_id:
                return session
        return None

    @app.get("/api/tables/{table_id}")
    def get_table(table_id: str):
        return review.table_to_dict(store.get_table(table_id))

    @app.patch("/api/tables/{table_id}/cells/{row_id}/{prop}")
    def patch_cell(table_id: str, row_id: str, prop: str, body: Dict[str, Any]):
        table = store.get_table(table_id)
        session = _session_for_table(table_id)
        lock = store.session_lock(session.session_id) if session else threading.Lock()
        with lock:
            if body.get("reextract"):
                session_ = session
                if session_ is None or session_.corpus_id is None:
                    raise UnknownTarget("table has no backing corpus for re-extraction")
                corpus = store.get_corpus(session_.corpus_id)
                model = DataModel(model_id=session_.model_id or "table",
                                  properties=table.properties,
                                  version=table.model_version)
                reextract_cells(table, model, corpus, [(row_id, prop)], config.gateway)
            elif "validated" in body:
                review.set_validation(table, row_id, prop, bool(body["validated"]))
            elif "value" in body:
                review.edit_cell(table, row_id, prop, str(body["value"] or ""))
            else:
                raise SchemaViolation(
                    "body must set one of value, validated, reextract", "$")
            store.save_table(table)
            if session:
                session.log("user", f"cell:{row_id}:{prop}")
                store.save_session(session)
        cell = table.find_row(row_id).cells[prop]
        return {
            "row_id": row_id,
            "property_name": prop,
            "value": {"kind": "found", "text": cell.value.text}
            if cell.value.is_found else {"kind": "not_found"},
            "state": cell.state,
        }

    @app.patch("/api/tables/{table_id}/rows/{row_id}")
    def patch_row(table_id: str, row_id: str, body: Dict[str, Any]):
        table = store.get_table(table_id)
        if "included" not in body:
            raise SchemaViolation("body must set included", "$.included")
        review.set_row_included(table, row_id, bool(body["included"]))
        store.save_table(table)
        row = table.find_row(row_id)
        return {"row_id": row_id, "included": row.included}

    @app.post("/api/tables/{table_id}/annotations")
    def annotate(table_id: str):
        table = store.get_table(table_id)
        if config.linker is None:
            raise SchemaViolation("no linking service configured", "$.linker")
        annotate_table(table, config.linker)
        store.save_table(table)
        count = sum(len(c.annotations) for r in table.rows for c in r.cells.values())
        return {"table_id": table_id, "annotation_count": count}

    @app.get("/api/tables/{table_id}/export")
    def export(table_id: str, format: str = "csv"):
        table = store.get_table(table_id)
        session = _session_for_table(table_id)
        if session is not None and session.state in ("reviewing", "exported"):
            with store.session_lock(session.session_id):
                session.apply("export")
                session.log("user", f"export:{format}")
                store.save_session(session)
        if format == "csv":
            return Response(content=review.export_csv(table), media_type="text/csv")
        if format == "json":
            return Response(content=review.export_json(table),
                            media_type="application/json")
        raise SchemaViolation(f"unknown format {format!r}", "$.format")

    return app

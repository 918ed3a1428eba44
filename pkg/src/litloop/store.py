"""Workdir-backed persistence for sessions, corpora, models and tables.

Every mutation is written through to JSON documents so a restarted service
recovers all state.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from .corpus import Corpus, CorpusEntry, StoredDocument, TextDocument
from .domain import PaperRecord, PropertyDef
from .errors import IllegalTransition, UnknownResource
from .extraction import DataModel, ExtractionTable
from .review import table_from_dict, table_to_dict

SESSION_STATES = (
    "created", "searching", "corpus_building", "corpus_ready",
    "model_defined", "extracting", "reviewing", "exported",
)

# action -> (allowed source states, target state)
TRANSITIONS: Dict[str, Tuple[Tuple[str, ...], str]] = {
    "search": (("created", "searching", "corpus_building"), "searching"),
    "select": (("searching", "corpus_building"), "corpus_building"),
    "fetch": (("corpus_building",), "corpus_ready"),
    "import": (("created", "searching", "corpus_building"), "corpus_ready"),
    "define_model": (("corpus_ready", "model_defined", "reviewing"), "model_defined"),
    "extract": (("model_defined", "reviewing"), "extracting"),
    "finish_extract": (("extracting",), "reviewing"),
    "fail_extract": (("extracting",), "model_defined"),
    "export": (("reviewing", "exported"), "exported"),
}


@dataclass
class Session:
    session_id: str
    state: str = "created"
    corpus_id: Optional[str] = None
    model_id: Optional[str] = None
    table_id: Optional[str] = None
    event_log: List[Tuple[float, str, str]] = field(default_factory=list)
    last_results: List[PaperRecord] = field(default_factory=list)

    def log(self, actor: str, action: str) -> None:
        self.event_log.append((time.time(), actor, action))

    def check(self, action: str) -> None:
        allowed, _ = TRANSITIONS[action]
        if self.state not in allowed:
            raise IllegalTransition(f"cannot {action} from state {self.state}")

    def apply(self, action: str) -> None:
        self.check(action)
        self.state = TRANSITIONS[action][1]


def record_to_dict(rec: PaperRecord) -> Dict[str, Any]:
    return {
        "record_id": rec.record_id,
        "title": rec.title,
        "doi": rec.doi,
        "abstract": rec.abstract,
        "authors": list(rec.authors),
        "year": rec.year,
        "venue": rec.venue,
        "open_access": rec.open_access,
        "fulltext_url": rec.fulltext_url,
        "provenance": [list(p) for p in rec.provenance],
    }


def record_from_dict(data: Dict[str, Any]) -> PaperRecord:
    return PaperRecord(
        record_id=data["record_id"],
        title=data["title"],
        doi=data.get("doi"),
        abstract=data.get("abstract"),
        authors=tuple(data.get("authors") or ()),
        year=data.get("year"),
        venue=data.get("venue"),
        open_access=data.get("open_access"),
        fulltext_url=data.get("fulltext_url"),
        provenance=tuple(tuple(p) for p in data["provenance"]),
    )


def _document_to_dict(doc: Any) -> Optional[Dict[str, Any]]:
    if isinstance(doc, StoredDocument):
        return {"kind": "stored", "path": doc.path,
                "byte_size": doc.byte_size, "content_hash": doc.content_hash}
    if isinstance(doc, TextDocument):
        return {"kind": "text_only", "path": doc.path}
    return None


def _document_from_dict(data: Optional[Dict[str, Any]]) -> Any:
    if not data:
        return None
    if data["kind"] == "stored":
        return StoredDocument(path=data["path"], byte_size=data["byte_size"],
                              content_hash=data["content_hash"])
    return TextDocument(path=data["path"])


def corpus_to_dict(corpus: Corpus) -> Dict[str, Any]:
    return {
        "corpus_id": corpus.corpus_id,
        "created_at": corpus.created_at,
        "updated_at": corpus.updated_at,
        "entries": [
            {
                "record": record_to_dict(e.record),
                "document": _document_to_dict(e.document),
                "fetch_status": e.fetch_status,
            }
            for e in corpus.entries
        ],
    }


def corpus_from_dict(data: Dict[str, Any]) -> Corpus:
    return Corpus(
        corpus_id=data["corpus_id"],
        created_at=data["created_at"],
        updated_at=data["updated_at"],
        entries=[
            CorpusEntry(
                record=record_from_dict(e["record"]),
                document=_document_from_dict(e.get("document")),
                fetch_status=e["fetch_status"],
            )
            for e in data["entries"]
        ],
    )


def model_to_dict(model: DataModel) -> Dict[str, Any]:
    return {
        "model_id": model.model_id,
        "version": model.version,
        "properties": [
            {"name": p.name, "description": p.description,
             "expected_kind": p.expected_kind}
            for p in model.properties
        ],
    }


def model_from_dict(data: Dict[str, Any]) -> DataModel:
    return DataModel(
        model_id=data["model_id"],
        version=data["version"],
        properties=tuple(
            PropertyDef(name=p["name"], description=p.get("description"),
                        expected_kind=p.get("expected_kind", "free_text"))
            for p in data["properties"]
        ),
    )


def session_to_dict(session: Session) -> Dict[str, Any]:
    return {
        "session_id": session.session_id,
        "state": session.state,
        "corpus_id": session.corpus_id,
        "model_id": session.model_id,
        "table_id": session.table_id,
        "event_log": [list(e) for e in session.event_log],
        "last_results": [record_to_dict(r) for r in session.last_results],
    }


def session_from_dict(data: Dict[str, Any]) -> Session:
    return Session(
        session_id=data["session_id"],
        state=data["state"],
        corpus_id=data.get("corpus_id"),
        model_id=data.get("model_id"),
        table_id=data.get("table_id"),
        event_log=[tuple(e) for e in data.get("event_log", [])],
        last_results=[record_from_dict(r) for r in data.get("last_results", [])],
    )


class Store:
    """Single-process store with write-through JSON persistence."""

    def __init__(self, workdir: Path):
        self.workdir = Path(workdir)
        self.sessions: Dict[str, Session] = {}
        self.corpora: Dict[str, Corpus] = {}
        self.models: Dict[str, DataModel] = {}
        self.tables: Dict[str, ExtractionTable] = {}
        self._locks: Dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self._load()

    def _dir(self, kind: str) -> Path:
        path = self.workdir / "state" / kind
        path.mkdir(parents=True, exist_ok=True)
        return path

    def _load(self) -> None:
        for path in sorted(self._dir("sessions").glob("*.json")):
            data = json.loads(path.read_text(encoding="utf-8"))
            self.sessions[data["session_id"]] = session_from_dict(data)
        for path in sorted(self._dir("corpora").glob("*.json")):
            data = json.loads(path.read_text(encoding="utf-8"))
            self.corpora[data["corpus_id"]] = corpus_from_dict(data)
        for path in sorted(self._dir("models").glob("*.json")):
            data = json.loads(path.read_text(encoding="utf-8"))
            self.models[data["model_id"]] = model_from_dict(data)
        for path in sorted(self._dir("tables").glob("*.json")):
            data = json.loads(path.read_text(encoding="utf-8"))
            self.tables[data["table_id"]] = table_from_dict(data)

    def _write(self, kind: str, name: str, data: Dict[str, Any]) -> None:
        path = self._dir(kind) / f"{name}.json"
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(data, indent=2), encoding="utf-8")
        os.replace(tmp, path)

    def session_lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.Lock())

    def create_session(self) -> Session:
        session = Session(session_id=uuid.uuid4().hex[:12])
        session.log("user", "create")
        self.sessions[session.session_id] = session
        self.save_session(session)
        return session

    def get_session(self, session_id: str) -> Session:
        if session_id not in self.sessions:
            raise UnknownResource(f"unknown session {session_id}")
        return self.sessions[session_id]

    def get_corpus(self, corpus_id: str) -> Corpus:
        if corpus_id not in self.corpora:
            raise UnknownResource(f"unknown corpus {corpus_id}")
        return self.corpora[corpus_id]

    def get_model(self, model_id: str) -> DataModel:
        if model_id not in self.models:
            raise UnknownResource(f"unknown model {model_id}")
        return self.models[model_id]

    def get_table(self, table_id: str) -> ExtractionTable:
        if table_id not in self.tables:
            raise UnknownResource(f"unknown table {table_id}")
        return self.tables[table_id]

    def save_session(self, session: Session) -> None:
        self.sessions[session.session_id] = session
        self._write("sessions", session.session_id, session_to_dict(session))

    def save_corpus(self, corpus: Corpus) -> None:
        self.corpora[corpus.corpus_id] = corpus
        self._write("corpora", corpus.corpus_id, corpus_to_dict(corpus))

    def save_model(self, model: DataModel) -> None:
        self.models[model.model_id] = model
        self._write("models", model.model_id, model_to_dict(model))

    def save_table(self, table: ExtractionTable) -> None:
        self.tables[table.table_id] = table
        self._write("tables", table.table_id, table_to_dict(table))

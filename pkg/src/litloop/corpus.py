"""Corpus persistence: record selection, document retrieval, DOI manifest,
and import of pre-existing corpora.

On-disk layout: <workdir>/corpora/<corpus_id>/docs/<record_id>.<ext>
plus manifest.csv.
"""

from __future__ import annotations

import csv
import hashlib
import io
import logging
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import requests

from .domain import PaperRecord, normalize_doi
from .errors import EmptyCorpus, EmptyDirectory, IoFailure, MalformedDoi, NotADirectory

log = logging.getLogger(__name__)

MANIFEST_HEADER = ["doi", "title", "record_id", "fetch_status"]
DOCUMENT_EXTENSIONS = (".pdf", ".txt")
FETCH_TIMEOUT = 60.0


@dataclass(frozen=True)
class StoredDocument:
    path: str
    byte_size: int
    content_hash: str  # sha256 hex of the stored bytes


@dataclass(frozen=True)
class TextDocument:
    path: str


@dataclass(frozen=True)
class CorpusEntry:
    record: PaperRecord
    document: Optional[object] = None  # StoredDocument | TextDocument | None
    fetch_status: str = "pending"  # pending | fetched | failed:<reason> | user_supplied

    @property
    def failed_reason(self) -> Optional[str]:
        if self.fetch_status.startswith("failed:"):
            return self.fetch_status[len("failed:"):]
        return None


@dataclass
class Corpus:
    corpus_id: str
    entries: List[CorpusEntry] = field(default_factory=list)
    created_at: float = field(default_factory=time.time)
    updated_at: float = field(default_factory=time.time)

    def touch(self) -> None:
        self.updated_at = max(time.time(), self.created_at)

    def __len__(self) -> int:
        return len(self.entries)


def new_corpus() -> Corpus:
    return Corpus(corpus_id=uuid.uuid4().hex[:12])


def add_selection(corpus: Corpus, records: List[PaperRecord]) -> List[str]:
    """Append records as pending entries. Duplicates against existing
    entries (by record_id or normalized DOI) are skipped; returns the
    skipped record_ids."""
    existing_ids = {e.record.record_id for e in corpus.entries}
    existing_dois = {e.record.doi for e in corpus.entries if e.record.doi}
    skipped: List[str] = []
    for rec in records:
        if rec.record_id in existing_ids or (rec.doi and rec.doi in existing_dois):
            skipped.append(rec.record_id)
            continue
        corpus.entries.append(CorpusEntry(record=rec, fetch_status="pending"))
        existing_ids.add(rec.record_id)
        if rec.doi:
            existing_dois.add(rec.doi)
    corpus.touch()
    return skipped


def _http_fetcher(url: str) -> bytes:
    resp = requests.get(url, timeout=FETCH_TIMEOUT)
    resp.raise_for_status()
    return resp.content


def _safe_stem(record_id: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in record_id)


def _doc_extension(url: str, content: bytes) -> str:
    if content[:5] == b"%PDF-":
        return ".pdf"
    if url.lower().split("?")[0].endswith(".pdf"):
        return ".pdf"
    return ".txt"


def fetch_documents(corpus: Corpus, workdir: Path,
                    fetcher: Optional[Callable[[str], bytes]] = None,
                    max_workers: int = 4) -> Corpus:
    """Attempt each pending entry's fulltext_url once, with bounded
    concurrency. Per-entry failures are recorded, never raised."""
    fetcher = fetcher or _http_fetcher
    docs_dir = Path(workdir) / "corpora" / corpus.corpus_id / "docs"
    docs_dir.mkdir(parents=True, exist_ok=True)

    def fetch_one(index: int, entry: CorpusEntry) -> Tuple[int, CorpusEntry]:
        url = entry.record.fulltext_url
        if not url:
            return index, replace(entry, fetch_status="failed:no fulltext url")
        try:
            content = fetcher(url)
        except Exception as exc:
            return index, replace(entry, fetch_status=f"failed:{exc}")
        ext = _doc_extension(url, content)
        path = docs_dir / f"{_safe_stem(entry.record.record_id)}{ext}"
        path.write_bytes(content)
        doc = StoredDocument(
            path=str(path),
            byte_size=len(content),
            content_hash=hashlib.sha256(content).hexdigest(),
        )
        return index, replace(entry, document=doc, fetch_status="fetched")

    pending = [(i, e) for i, e in enumerate(corpus.entries) if e.fetch_status == "pending"]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        results = list(pool.map(lambda pair: fetch_one(*pair), pending))
    for index, entry in results:
        corpus.entries[index] = entry
    corpus.touch()
    return corpus


def verify_document(entry: CorpusEntry) -> bool:
    """Re-read a stored document and check its content hash."""
    if not isinstance(entry.document, StoredDocument):
        return True
    try:
        content = Path(entry.document.path).read_bytes()
    except OSError:
        return False
    return hashlib.sha256(content).hexdigest() == entry.document.content_hash


def write_manifest(corpus: Corpus, destination: Path) -> Path:
    """CSV manifest: header `doi,title,record_id,fetch_status`, one row per
    entry, UTF-8, RFC-4180 quoting."""
    if not corpus.entries:
        raise EmptyCorpus("cannot write a manifest for an empty corpus")
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\r\n")
    writer.writerow(MANIFEST_HEADER)
    for entry in corpus.entries:
        writer.writerow([
            entry.record.doi or "",
            entry.record.title,
            entry.record.record_id,
            entry.fetch_status,
        ])
    destination = Path(destination)
    try:
        destination.parent.mkdir(parents=True, exist_ok=True)
        destination.write_text(buffer.getvalue(), encoding="utf-8", newline="")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return destination


def _read_manifest(path: Path) -> List[Dict[str, str]]:
    with open(path, encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle))


def import_corpus(path: Path) -> Corpus:
    """Build a corpus from a directory of user-supplied documents.

    A sidecar manifest.csv (write_manifest format), when present, supplies
    metadata matched by filename stem = record_id or by doi column; unmatched
    files get title = filename stem and no DOI.
    """
    directory = Path(path)
    if not directory.is_dir():
        raise NotADirectory(f"not a readable directory: {path}")
    files = sorted(
        p for p in directory.iterdir()
        if p.is_file() and p.suffix.lower() in DOCUMENT_EXTENSIONS
    )
    if not files:
        raise EmptyDirectory(f"no document files in {path}")

    by_record_id: Dict[str, Dict[str, str]] = {}
    manifest_path = directory / "manifest.csv"
    if manifest_path.is_file():
        for row in _read_manifest(manifest_path):
            if row.get("record_id"):
                by_record_id[row["record_id"]] = row

    corpus = new_corpus()
    for file in files:
        stem = file.stem
        row = by_record_id.get(stem)
        doi = None
        title = stem
        if row:
            title = row.get("title") or stem
            if row.get("doi"):
                try:
                    doi = normalize_doi(row["doi"])
                except MalformedDoi:
                    log.warning("manifest DOI %r for %s is malformed; dropped", row["doi"], stem)
        record = PaperRecord(
            record_id=stem,
            title=title,
            doi=doi,
            provenance=(("import", stem),),
        )
        if file.suffix.lower() == ".txt":
            document: object = TextDocument(path=str(file))
        else:
            content = file.read_bytes()
            document = StoredDocument(
                path=str(file),
                byte_size=len(content),
                content_hash=hashlib.sha256(content).hexdigest(),
            )
        corpus.entries.append(
            CorpusEntry(record=record, document=document, fetch_status="user_supplied")
        )
    return corpus

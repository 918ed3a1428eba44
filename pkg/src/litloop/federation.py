"""Federated scholarly search: connector contract, schema unification,
filtering and cross-source deduplication."""

from __future__ import annotations

import logging
import os
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import requests

from .domain import PaperRecord, SearchRequest, normalize_doi, normalize_title
from .errors import (
    AllConnectorsFailed,
    EmptyTitle,
    MalformedDoi,
    UnknownConnector,
    UnmappablePayload,
)

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 15.0


@dataclass(frozen=True)
class ConnectorDescriptor:
    connector_id: str
    supports_open_access_filter: bool = False
    supports_year_filter: bool = False
    requires_api_key: bool = False


@dataclass(frozen=True)
class SourcePayload:
    connector_id: str
    raw_body: Any
    retrieved_at: float


@dataclass(frozen=True)
class MappingTable:
    """Declarative payload-to-record mapping: dotted paths into each hit.

    ``hits_path`` locates the list of hits in the payload body; ``fields``
    maps canonical field names to dotted paths within one hit. Adding a
    source is a mapping-table change plus a connector shim.
    """

    hits_path: str
    fields: Dict[str, str]


def _walk(tree: Any, dotted: str) -> Any:
    """Resolve a dotted path in a JSON-like tree; numeric parts index lists."""
    if not dotted:
        return None
    node = tree
    for part in dotted.split("."):
        if isinstance(node, dict) and part in node:
            node = node[part]
        elif isinstance(node, list) and part.isdigit() and int(part) < len(node):
            node = node[int(part)]
        else:
            return None
    return node


def unify(payload: SourcePayload, mapping: MappingTable) -> List[PaperRecord]:
    """Map every hit in a source payload to exactly one PaperRecord.

    Missing optional fields become absent, never empty strings; malformed
    DOIs are dropped to absent with a warning.
    """
    hits = _walk(payload.raw_body, mapping.hits_path) if mapping.hits_path else payload.raw_body
    if not isinstance(hits, list):
        raise UnmappablePayload(
            f"payload from {payload.connector_id}: no hit list at {mapping.hits_path!r}"
        )
    records: List[PaperRecord] = []
    for hit in hits:
        title = _walk(hit, mapping.fields["title"])
        if not title or not str(title).strip():
            log.warning("skipping hit without title from %s", payload.connector_id)
            continue
        doi = None
        raw_doi = _walk(hit, mapping.fields.get("doi", ""))
        if raw_doi:
            try:
                doi = normalize_doi(str(raw_doi))
            except MalformedDoi:
                log.warning("dropping malformed DOI %r from %s", raw_doi, payload.connector_id)
        native_id = _walk(hit, mapping.fields.get("native_id", ""))
        native_id = str(native_id) if native_id is not None else str(uuid.uuid4())

        def opt_text(name: str) -> Optional[str]:
            value = _walk(hit, mapping.fields.get(name, ""))
            if value is None:
                return None
            value = str(value).strip()
            return value or None

        authors_raw = _walk(hit, mapping.fields.get("authors", ""))
        authors: Tuple[str, ...] = ()
        if isinstance(authors_raw, list):
            names = []
            author_name_path = mapping.fields.get("author_name", "")
            for a in authors_raw:
                if isinstance(a, str):
                    names.append(a)
                elif isinstance(a, dict) and author_name_path:
                    name = _walk(a, author_name_path)
                    if name:
                        names.append(str(name))
            authors = tuple(names)

        year_raw = _walk(hit, mapping.fields.get("year", ""))
        year = None
        if year_raw is not None:
            try:
                year = int(str(year_raw)[:4])
            except ValueError:
                pass

        oa_raw = _walk(hit, mapping.fields.get("open_access", ""))
        open_access = bool(oa_raw) if oa_raw is not None else None

        records.append(
            PaperRecord(
                record_id=f"{payload.connector_id}:{native_id}",
                title=str(title).strip(),
                doi=doi,
                abstract=opt_text("abstract"),
                authors=authors,
                year=year,
                venue=opt_text("venue"),
                open_access=open_access,
                fulltext_url=opt_text("fulltext_url"),
                provenance=((payload.connector_id, native_id),),
            )
        )
    return records


def _title_key(title: str) -> str:
    try:
        return normalize_title(title)
    except EmptyTitle:
        # punctuation-only titles cannot produce a word key; fall back
        return title.strip().lower()


def _merge_group(group: List[PaperRecord]) -> PaperRecord:
    """Merge duplicates: fields filled by first-non-absent in input order,
    provenance is the union."""
    first = group[0]
    provenance: List[Tuple[str, str]] = []
    for rec in group:
        for pair in rec.provenance:
            if pair not in provenance:
                provenance.append(pair)

    def first_present(attr: str):
        for rec in group:
            value = getattr(rec, attr)
            if value is not None and value != ():
                return value
        return None

    return PaperRecord(
        record_id=first.record_id,
        title=first.title,
        doi=first_present("doi"),
        abstract=first_present("abstract"),
        authors=first_present("authors") or (),
        year=first_present("year"),
        venue=first_present("venue"),
        open_access=first_present("open_access"),
        fulltext_url=first_present("fulltext_url"),
        provenance=tuple(provenance),
    )


def deduplicate(records: List[PaperRecord]) -> Tuple[List[PaperRecord], List[List[str]]]:
    """Merge records sharing a normalized DOI; among DOI-less records, merge
    exact normalized-title-key matches. Output order preserves first occurrence.

    Returns (records, dedup_report) where the report lists record_ids of each
    merged group of size > 1.
    """
    groups: Dict[str, List[PaperRecord]] = {}
    order: List[str] = []
    for rec in records:
        if rec.doi:
            key = f"doi:{rec.doi}"
        else:
            key = f"title:{_title_key(rec.title)}"
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(rec)
    merged = [_merge_group(groups[key]) for key in order]
    report = [[r.record_id for r in groups[key]] for key in order if len(groups[key]) > 1]
    return merged, report


@dataclass(frozen=True)
class SearchResultSet:
    records: Tuple[PaperRecord, ...]
    # connector_id -> ("ok", count) | ("failed", reason)
    per_connector_status: Dict[str, Tuple[str, Any]]
    dedup_report: List[List[str]] = field(default_factory=list)


class Connector:
    """One scholarly source behind the common contract.

    Subclasses implement fetch(); unification happens in the registry via
    the connector's mapping table.
    """

    descriptor: ConnectorDescriptor
    mapping: MappingTable

    def fetch(self, request: SearchRequest) -> SourcePayload:
        raise NotImplementedError

    def api_key(self) -> Optional[str]:
        return os.environ.get(f"LITLOOP_{self.descriptor.connector_id.upper()}_KEY")


class StubConnector(Connector):
    """Deterministic fixture-backed connector for tests and offline runs."""

    def __init__(self, connector_id: str, raw_body: Any, mapping: MappingTable,
                 supports_open_access_filter: bool = False,
                 supports_year_filter: bool = False,
                 fail_with: Optional[str] = None):
        self.descriptor = ConnectorDescriptor(
            connector_id=connector_id,
            supports_open_access_filter=supports_open_access_filter,
            supports_year_filter=supports_year_filter,
        )
        self.mapping = mapping
        self._raw_body = raw_body
        self._fail_with = fail_with

    def fetch(self, request: SearchRequest) -> SourcePayload:
        if self._fail_with:
            raise ConnectionError(self._fail_with)
        return SourcePayload(
            connector_id=self.descriptor.connector_id,
            raw_body=self._raw_body,
            retrieved_at=time.time(),
        )


SEMANTIC_SCHOLAR_MAPPING = MappingTable(
    hits_path="data",
    fields={
        "title": "title",
        "doi": "externalIds.DOI",
        "native_id": "paperId",
        "abstract": "abstract",
        "authors": "authors",
        "author_name": "name",
        "year": "year",
        "venue": "venue",
        "open_access": "isOpenAccess",
        "fulltext_url": "openAccessPdf.url",
    },
)


class SemanticScholarConnector(Connector):
    BASE_URL = "https://api.semanticscholar.org/graph/v1"
    FIELDS = "title,abstract,authors,year,venue,externalIds,isOpenAccess,openAccessPdf"

    def __init__(self, base_url: Optional[str] = None, timeout: float = DEFAULT_TIMEOUT):
        self.descriptor = ConnectorDescriptor(
            connector_id="semantic_scholar",
            supports_open_access_filter=True,
            supports_year_filter=True,
        )
        self.mapping = SEMANTIC_SCHOLAR_MAPPING
        self.base_url = base_url or self.BASE_URL
        self.timeout = timeout

    def fetch(self, request: SearchRequest) -> SourcePayload:
        params: Dict[str, Any] = {
            "query": request.query,
            "limit": request.max_results,
            "fields": self.FIELDS,
        }
        if request.open_access_only:
            params["openAccessPdf"] = ""
        if request.year_range:
            params["year"] = f"{request.year_range[0]}-{request.year_range[1]}"
        headers = {}
        key = self.api_key()
        if key:
            headers["x-api-key"] = key
        resp = requests.get(
            f"{self.base_url}/paper/search", params=params, headers=headers,
            timeout=self.timeout,
        )
        resp.raise_for_status()
        return SourcePayload("semantic_scholar", resp.json(), time.time())


CROSSREF_MAPPING = MappingTable(
    hits_path="message.items",
    fields={
        "title": "title.0",
        "doi": "DOI",
        "native_id": "DOI",
        "abstract": "abstract",
        "authors": "author",
        "author_name": "family",
        "year": "issued.date-parts.0.0",
        "venue": "container-title.0",
        "fulltext_url": "link.0.URL",
    },
)


class CrossrefConnector(Connector):
    BASE_URL = "https://api.crossref.org"

    def __init__(self, base_url: Optional[str] = None, timeout: float = DEFAULT_TIMEOUT):
        self.descriptor = ConnectorDescriptor(
            connector_id="crossref",
            supports_open_access_filter=False,
            supports_year_filter=True,
        )
        self.mapping = CROSSREF_MAPPING
        self.base_url = base_url or self.BASE_URL
        self.timeout = timeout

    def fetch(self, request: SearchRequest) -> SourcePayload:
        params: Dict[str, Any] = {"query": request.query, "rows": request.max_results}
        if request.year_range:
            params["filter"] = (
                f"from-pub-date:{request.year_range[0]}-01-01,"
                f"until-pub-date:{request.year_range[1]}-12-31"
            )
        resp = requests.get(f"{self.base_url}/works", params=params, timeout=self.timeout)
        resp.raise_for_status()
        return SourcePayload("crossref", resp.json(), time.time())


class ConnectorRegistry:
    """Read-only after startup; queried concurrently by search()."""

    def __init__(self, connectors: Optional[List[Connector]] = None,
                 max_workers: int = 4, retries: int = 1):
        self._connectors: Dict[str, Connector] = {}
        self.max_workers = max_workers
        self.retries = retries
        for c in connectors or []:
            self.register(c)

    def register(self, connector: Connector) -> None:
        cid = connector.descriptor.connector_id
        if cid in self._connectors:
            raise ValueError(f"duplicate connector id: {cid}")
        self._connectors[cid] = connector

    def get(self, connector_id: str) -> Connector:
        if connector_id not in self._connectors:
            raise UnknownConnector(f"unknown connector: {connector_id}")
        return self._connectors[connector_id]

    def ids(self) -> List[str]:
        return list(self._connectors)

    def _query_one(self, connector: Connector, request: SearchRequest) -> List[PaperRecord]:
        last_exc: Optional[Exception] = None
        for _ in range(1 + self.retries):
            try:
                payload = connector.fetch(request)
                return unify(payload, connector.mapping)
            except UnmappablePayload:
                raise
            except Exception as exc:  # transient network failure: one retry
                last_exc = exc
        raise last_exc  # type: ignore[misc]

    def search(self, request: SearchRequest) -> SearchResultSet:
        """Query every requested connector concurrently, unify, filter,
        deduplicate, and order deterministically.

        Partial connector failure yields failed statuses, not a global error.
        """
        connectors = [self.get(cid) for cid in request.connector_ids]

        status: Dict[str, Tuple[str, Any]] = {}
        per_connector: Dict[str, List[PaperRecord]] = {}
        with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
            futures = {
                c.descriptor.connector_id: pool.submit(self._query_one, c, request)
                for c in connectors
            }
            for cid, fut in futures.items():
                try:
                    per_connector[cid] = fut.result()
                except Exception as exc:
                    status[cid] = ("failed", str(exc))

        if not per_connector:
            raise AllConnectorsFailed("no connector returned results")

        # capability-downgraded filters applied post-hoc locally
        ranked: List[Tuple[int, PaperRecord]] = []
        for connector in connectors:
            cid = connector.descriptor.connector_id
            if cid not in per_connector:
                continue
            records = per_connector[cid]
            if request.open_access_only and not connector.descriptor.supports_open_access_filter:
                records = [r for r in records if r.open_access is True]
            if request.year_range and not connector.descriptor.supports_year_filter:
                lo, hi = request.year_range
                records = [r for r in records if r.year is not None and lo <= r.year <= hi]
            records = records[: request.max_results]
            status[cid] = ("ok", len(records))
            for rank, rec in enumerate(records):
                ranked.append((rank, rec))

        # stable order before dedup: source relevance rank, then title key
        ranked.sort(key=lambda pair: (pair[0], _title_key(pair[1].title)))
        merged, report = deduplicate([rec for _, rec in ranked])
        return SearchResultSet(
            records=tuple(merged),
            per_connector_status=status,
            dedup_report=report,
        )

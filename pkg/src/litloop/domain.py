"""Canonical data types shared by all modules, plus normalization primitives."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Tuple

from .errors import EmptyTitle, InvalidInterest, MalformedDoi

_DOI_PREFIXES = (
    "https://doi.org/",
    "http://doi.org/",
    "http://dx.doi.org/",
    "https://dx.doi.org/",
    "doi.org/",
    "doi:",
)

_DOI_RE = re.compile(r"^10\.\d+/\S+$")


def normalize_doi(raw: str) -> str:
    """Normalize a DOI: lowercase, trimmed, resolver prefixes stripped.

    Raises MalformedDoi when the remainder does not look like
    ``10.<registrant>/<suffix>``.
    """
    doi = (raw or "").strip().lower()
    changed = True
    while changed:
        changed = False
        for prefix in _DOI_PREFIXES:
            if doi.startswith(prefix):
                doi = doi[len(prefix):].strip()
                changed = True
    if not _DOI_RE.match(doi):
        raise MalformedDoi(f"not a DOI: {raw!r}")
    return doi


def normalize_title(raw: str) -> str:
    """Collapse a title to a lowercase dedup key: alphanumeric words joined
    by single spaces. Raises EmptyTitle when nothing survives."""
    key = re.sub(r"[^a-z0-9]+", " ", (raw or "").lower()).strip()
    if not key:
        raise EmptyTitle(f"title normalizes to empty: {raw!r}")
    return key


@dataclass(frozen=True)
class PaperRecord:
    """Unified metadata for one publication from any source."""

    record_id: str
    title: str
    doi: Optional[str] = None
    abstract: Optional[str] = None
    authors: Tuple[str, ...] = ()
    year: Optional[int] = None
    venue: Optional[str] = None
    open_access: Optional[bool] = None
    fulltext_url: Optional[str] = None
    # (connector_id, native_id) pairs; ≥ 1 entry
    provenance: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self):
        if not self.title.strip():
            raise ValueError("PaperRecord.title must be non-empty")
        if not self.provenance:
            raise ValueError("PaperRecord.provenance must have at least one entry")


@dataclass(frozen=True)
class SearchRequest:
    query: str
    connector_ids: Tuple[str, ...]
    max_results: int = 20
    open_access_only: bool = False
    year_range: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        if not self.query.strip():
            raise ValueError("query must be non-empty")
        if not self.connector_ids:
            raise ValueError("connector_ids must be non-empty")
        if self.max_results < 1:
            raise ValueError("max_results must be >= 1")
        if self.year_range is not None and self.year_range[0] > self.year_range[1]:
            raise ValueError("year_range min must be <= max")


@dataclass(frozen=True)
class ResearchInterest:
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise InvalidInterest("research interest must be non-empty")


VALID_KINDS = ("free_text", "number", "boolean", "short_phrase")


@dataclass(frozen=True)
class PropertyDef:
    """One user-defined property to extract per paper.

    expected_kind is an extraction hint only; values are always stored as text.
    """

    name: str
    description: Optional[str] = None
    expected_kind: str = "free_text"

    def __post_init__(self):
        if not self.name.strip():
            raise ValueError("property name must be non-empty")
        if self.expected_kind not in VALID_KINDS:
            raise ValueError(f"unknown expected_kind: {self.expected_kind}")


@dataclass(frozen=True)
class CellValue:
    """Either a found text value or the distinct not-found variant."""

    text: Optional[str] = None

    @classmethod
    def found(cls, text: str) -> "CellValue":
        if not text:
            raise ValueError("found value must be non-empty")
        return cls(text=text)

    @classmethod
    def not_found(cls) -> "CellValue":
        return cls(text=None)

    @property
    def is_found(self) -> bool:
        return self.text is not None

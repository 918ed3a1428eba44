"""Turn stored documents into clean body text for prompting: extraction,
back-matter removal, sentence reconstruction, truncation.

The cleanup rules are versioned so extraction results can cite the
preprocessing version they were produced with.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

from .corpus import CorpusEntry, StoredDocument, TextDocument
from .errors import ExtractionFailed, NoDocument
from .llm import CHARS_PER_UNIT

PREPROCESS_VERSION = "pp-1"

TRUNCATION_MARKER = "[TRUNCATED]"

_REFERENCE_HEADINGS = {"references", "bibliography", "works cited"}
_APPENDIX_HEADINGS = {"appendix", "appendices", "supplementary material"}

# optional section-number prefix: "7", "7.", "A.", "IV." etc.
_SECTION_PREFIX = r"(?:(?:\d+(?:\.\d+)*|[ivxlc]+|[a-z])[.):]?\s+)?"


@dataclass(frozen=True)
class RawText:
    text: str
    extractor_id: str

    def __post_init__(self):
        if not self.text:
            raise ValueError("RawText.text must be non-empty")


@dataclass(frozen=True)
class BodyText:
    text: str
    removed_sections: Tuple[Tuple[str, str, int], ...] = ()  # (kind, heading_line, offset)


@dataclass(frozen=True)
class CleanText:
    text: str
    dehyphenations: int = 0
    joined_lines: int = 0
    original_chars: int = 0
    final_chars: int = 0


# extension -> extractor; the plain-text passthrough is always available,
# a PDF toolkit can be registered by the application
_EXTRACTORS: Dict[str, Callable[[Path], str]] = {}


def register_extractor(extension: str, extractor: Callable[[Path], str]) -> None:
    _EXTRACTORS[extension.lower()] = extractor


def _read_text(path: Path) -> str:
    return path.read_text(encoding="utf-8", errors="replace")


register_extractor(".txt", _read_text)


def extract_text(entry: CorpusEntry) -> RawText:
    """Raw text for one corpus entry; empty or unreadable documents are an
    error, not empty text."""
    document = entry.document
    if document is None:
        raise NoDocument(f"entry {entry.record.record_id} has no document")
    if isinstance(document, TextDocument):
        path = Path(document.path)
        extractor_id = "text-passthrough"
        extractor = _read_text
    elif isinstance(document, StoredDocument):
        path = Path(document.path)
        extension = path.suffix.lower()
        extractor = _EXTRACTORS.get(extension)
        if extractor is None:
            raise ExtractionFailed(f"no extractor registered for {extension!r}")
        extractor_id = "text-passthrough" if extension == ".txt" else f"extractor{extension}"
    else:
        raise NoDocument(f"entry {entry.record.record_id} has no document")
    try:
        text = extractor(path)
    except OSError as exc:
        raise ExtractionFailed(str(exc)) from exc
    if not text.strip():
        raise ExtractionFailed(f"document {path} extracted to empty text")
    return RawText(text=text, extractor_id=extractor_id)


def _heading_kind(line: str) -> Optional[str]:
    content = line.strip().casefold()
    for kind, headings in (("references", _REFERENCE_HEADINGS),
                           ("appendix", _APPENDIX_HEADINGS)):
        for heading in headings:
            if re.fullmatch(_SECTION_PREFIX + re.escape(heading), content):
                return kind
    return None


def strip_backmatter(raw: RawText) -> BodyText:
    """Cut the document at its back matter, scanning headings from the end.

    The cut starts at the last references-style heading (or, failing that,
    the last appendix-style heading); headings after the cut are recorded
    as additional removed sections. No matching heading leaves the text
    unchanged.
    """
    lines = raw.text.split("\n")
    offsets: List[int] = []
    position = 0
    for line in lines:
        offsets.append(position)
        position += len(line) + 1

    headings: List[Tuple[int, str, str]] = []  # (offset, kind, line)
    for index, line in enumerate(lines):
        kind = _heading_kind(line)
        if kind:
            headings.append((offsets[index], kind, line))

    cut_offset: Optional[int] = None
    for offset, kind, _ in reversed(headings):
        if kind == "references":
            cut_offset = offset
            break
    if cut_offset is None and headings:
        cut_offset = headings[-1][0]
    if cut_offset is None:
        return BodyText(text=raw.text, removed_sections=())

    removed = tuple(
        (kind, line, offset) for offset, kind, line in headings if offset >= cut_offset
    )
    return BodyText(text=raw.text[:cut_offset], removed_sections=removed)


_DEHYPHEN_RE = re.compile(r"(?<=[a-z])-\n(?=[a-z])")
_JOIN_RE = re.compile(r"(?<=[^.!?:\n])\n(?=[a-z0-9])")
_PARA_RE = re.compile(r"\n{2,}")


def reconstruct(body: BodyText) -> CleanText:
    """Regex cleanup, applied once in order: (a) join hyphen-split words,
    (b) join single line breaks inside sentences, (c) collapse blank runs
    to one paragraph break."""
    original = body.text
    text, dehyphenations = _DEHYPHEN_RE.subn("", original)
    text, joined = _JOIN_RE.subn(" ", text)
    text = _PARA_RE.sub("\n\n", text)
    return CleanText(
        text=text,
        dehyphenations=dehyphenations,
        joined_lines=joined,
        original_chars=len(original),
        final_chars=len(text),
    )


def budget_text(clean: CleanText, max_units: int,
                chars_per_unit: int = CHARS_PER_UNIT) -> str:
    """Fit text into a provider budget; truncation happens at the last
    paragraph boundary that fits, with a fixed marker appended."""
    if max_units <= 0:
        raise ValueError("max_units must be > 0")
    allowed = max_units * chars_per_unit
    text = clean.text
    if len(text) <= allowed:
        return text
    marker = "\n" + TRUNCATION_MARKER
    room = allowed - len(marker)
    if room <= 0:
        return TRUNCATION_MARKER[:allowed]
    boundary = text.rfind("\n\n", 0, room + 1)
    head = text[:boundary] if boundary > 0 else text[:room]
    return head + marker

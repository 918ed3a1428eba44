"""Stage-2 extraction: prompt building from the user's data model, one LLM
call per paper, result parsing into an extraction table, missing-value
flagging, and selective re-extraction."""

from __future__ import annotations

import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .corpus import Corpus, CorpusEntry
from .domain import CellValue, PropertyDef
from .errors import (
    DuplicateProperty,
    EmptyCorpus,
    EmptyModel,
    LitloopError,
    NoDocument,
    TargetValidated,
    UnknownTarget,
)
from .llm import SENTINEL, Gateway, PromptBundle, load_template
from .preprocess import (
    PREPROCESS_VERSION,
    BodyText,
    budget_text,
    extract_text,
    reconstruct,
    strip_backmatter,
)

MAX_PROPERTIES = 32
TEMPLATE_VERSION = "extract_v1"

# cell states
GENERATED = "generated"
NOT_FOUND = "not_found"
EDITED = "edited"
VALIDATED = "validated"
EXCLUDED = "excluded"

CELL_STATES = (GENERATED, NOT_FOUND, EDITED, VALIDATED, EXCLUDED)


@dataclass(frozen=True)
class DataModel:
    model_id: str
    properties: Tuple[PropertyDef, ...]
    version: int = 1

    @property
    def property_names(self) -> Tuple[str, ...]:
        return tuple(p.name for p in self.properties)


def _check_properties(properties: List[PropertyDef]) -> Tuple[PropertyDef, ...]:
    if not properties:
        raise EmptyModel("a data model needs at least one property")
    if len(properties) > MAX_PROPERTIES:
        raise EmptyModel(f"at most {MAX_PROPERTIES} properties supported")
    seen = set()
    for prop in properties:
        folded = prop.name.strip().lower()
        if folded in seen:
            raise DuplicateProperty(f"duplicate property name: {prop.name}")
        seen.add(folded)
    return tuple(properties)


def define_model(properties: List[PropertyDef]) -> DataModel:
    """Create a data model at version 1; names must be unique
    case-insensitively."""
    return DataModel(
        model_id=uuid.uuid4().hex[:12],
        properties=_check_properties(properties),
        version=1,
    )


def update_model(model: DataModel, properties: List[PropertyDef]) -> DataModel:
    """Any property change bumps the version; tables keep the version they
    were extracted against."""
    return DataModel(
        model_id=model.model_id,
        properties=_check_properties(properties),
        version=model.version + 1,
    )


@dataclass(frozen=True)
class HistoryEvent:
    timestamp: float
    actor: str  # "llm" | "user"
    old_value: CellValue
    new_value: CellValue


@dataclass
class Cell:
    property_name: str
    value: CellValue
    state: str
    source_model_version: int
    history: List[HistoryEvent] = field(default_factory=list)
    annotations: List[object] = field(default_factory=list)

    def record(self, actor: str, new_value: CellValue) -> None:
        self.history.append(
            HistoryEvent(time.time(), actor, self.value, new_value)
        )
        self.value = new_value


@dataclass
class ExtractionRow:
    row_id: str  # corpus entry record_id
    title: str
    doi: Optional[str]
    cells: Dict[str, Cell]
    error: Optional[str] = None
    included: bool = True
    text_source: str = "document"  # document | abstract | none


@dataclass
class ExtractionTable:
    table_id: str
    corpus_id: str
    model_version: int
    properties: Tuple[PropertyDef, ...]
    rows: List[ExtractionRow] = field(default_factory=list)
    created_at: float = field(default_factory=time.time)
    preprocess_version: str = PREPROCESS_VERSION
    template_version: str = TEMPLATE_VERSION

    def find_row(self, row_id: str) -> Optional[ExtractionRow]:
        for row in self.rows:
            if row.row_id == row_id:
                return row
        return None

    @property
    def property_names(self) -> Tuple[str, ...]:
        return tuple(p.name for p in self.properties)


def _properties_block(properties: Tuple[PropertyDef, ...]) -> str:
    lines = []
    for prop in properties:
        if prop.description:
            lines.append(f"- {prop.name} ({prop.expected_kind}): {prop.description}")
        else:
            lines.append(f"- {prop.name} ({prop.expected_kind})")
    return "\n".join(lines)


def build_prompt(model: DataModel, paper_text: str, paper_title: str,
                 budget: int = 100_000) -> PromptBundle:
    """Deterministic prompt: strict JSON keyed exactly by the model's
    property names, sentinel for anything not in the text."""
    if not paper_text:
        raise ValueError("paper_text must be non-empty")
    system = load_template("extract_v1.txt").format(
        properties=_properties_block(model.properties)
    )
    user = f"Title: {paper_title}\n\n{paper_text}"
    return PromptBundle(
        system_instructions=system,
        user_content=user,
        response_shape=model.property_names,
        budget=budget,
    )


def _single_property_model(model: DataModel, property_name: str) -> DataModel:
    target = next(p for p in model.properties if p.name == property_name)
    return DataModel(model_id=model.model_id, properties=(target,), version=model.version)


def entry_text(entry: CorpusEntry, gateway: Gateway) -> Tuple[str, str]:
    """Best available text for prompting: preprocessed document, else
    abstract. Returns (text, source)."""
    try:
        raw = extract_text(entry)
    except LitloopError:
        raw = None
    if raw is not None:
        body = strip_backmatter(raw)
        clean = reconstruct(body)
        budget = max(1, gateway.profile.max_input_units - 1000)
        return budget_text(clean, budget, gateway.chars_per_unit), "document"
    if entry.record.abstract:
        return entry.record.abstract, "abstract"
    raise NoDocument(f"entry {entry.record.record_id} has neither document nor abstract")


def _cell_from_value(name: str, value: object, model_version: int) -> Cell:
    text = "" if value is None else str(value).strip()
    if not text or text == SENTINEL:
        return Cell(name, CellValue.not_found(), NOT_FOUND, model_version)
    return Cell(name, CellValue.found(text), GENERATED, model_version)


def extract_row(model: DataModel, entry: CorpusEntry, gateway: Gateway) -> ExtractionRow:
    """One gateway call per entry; provider failure yields a row of
    not_found cells plus a row-level error note."""
    record = entry.record
    try:
        text, source = entry_text(entry, gateway)
    except LitloopError as exc:
        cells = {
            name: Cell(name, CellValue.not_found(), NOT_FOUND, model.version)
            for name in model.property_names
        }
        return ExtractionRow(record.record_id, record.title, record.doi, cells,
                             error=str(exc), text_source="none")
    prompt = build_prompt(model, text, record.title,
                          budget=gateway.profile.max_input_units)
    try:
        tree = gateway.complete_structured(prompt)
    except LitloopError as exc:
        cells = {
            name: Cell(name, CellValue.not_found(), NOT_FOUND, model.version)
            for name in model.property_names
        }
        return ExtractionRow(record.record_id, record.title, record.doi, cells,
                             error=str(exc), text_source=source)
    cells = {
        name: _cell_from_value(name, tree.get(name), model.version)
        for name in model.property_names
    }
    return ExtractionRow(record.record_id, record.title, record.doi, cells,
                         text_source=source)


def extract_corpus(model: DataModel, corpus: Corpus, gateway: Gateway,
                   max_workers: int = 4) -> ExtractionTable:
    """Extract every corpus entry with bounded concurrency; row order
    follows corpus order, so output is deterministic for a deterministic
    provider regardless of worker count."""
    if not corpus.entries:
        raise EmptyCorpus("cannot extract from an empty corpus")
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        rows = list(pool.map(lambda e: extract_row(model, e, gateway), corpus.entries))
    return ExtractionTable(
        table_id=uuid.uuid4().hex[:12],
        corpus_id=corpus.corpus_id,
        model_version=model.version,
        properties=model.properties,
        rows=rows,
    )


def reextract_cells(table: ExtractionTable, model: DataModel, corpus: Corpus,
                    targets: List[Tuple[str, str]], gateway: Gateway) -> ExtractionTable:
    """Re-run extraction for specific cells only; every non-targeted cell is
    left untouched and history is appended for each targeted cell."""
    resolved: List[Cell] = []
    entries: List[CorpusEntry] = []
    by_record = {e.record.record_id: e for e in corpus.entries}
    for row_id, prop_name in targets:
        row = table.find_row(row_id)
        if row is None or prop_name not in row.cells:
            raise UnknownTarget(f"no cell ({row_id}, {prop_name})")
        cell = row.cells[prop_name]
        if cell.state == VALIDATED:
            raise TargetValidated(f"cell ({row_id}, {prop_name}) is validated")
        if row_id not in by_record:
            raise UnknownTarget(f"corpus has no entry {row_id}")
        resolved.append(cell)
        entries.append(by_record[row_id])

    for cell, entry in zip(resolved, entries):
        sub_model = _single_property_model(model, cell.property_name)
        try:
            text, _ = entry_text(entry, gateway)
            prompt = build_prompt(sub_model, text, entry.record.title,
                                  budget=gateway.profile.max_input_units)
            tree = gateway.complete_structured(prompt)
            value = tree.get(cell.property_name)
        except LitloopError:
            value = None
        text_value = "" if value is None else str(value).strip()
        if not text_value or text_value == SENTINEL:
            new_value = CellValue.not_found()
            new_state = NOT_FOUND
        else:
            new_value = CellValue.found(text_value)
            new_state = GENERATED
        cell.record("llm", new_value)
        cell.state = new_state
    return table

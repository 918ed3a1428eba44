"""Backend of the human validation surface: cell editing, validation, row
inclusion, and table export/import.

CSV is the lossy human-facing format; JSON is the lossless system format
that round-trips full cell state and history.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from typing import Any, Dict, List, Optional, Tuple

from .annotate import EntityAnnotation
from .domain import CellValue, PropertyDef
from .errors import CellValidated, SchemaViolation, UnknownCell, UnknownRow
from .extraction import (
    CELL_STATES,
    EDITED,
    NOT_FOUND,
    VALIDATED,
    Cell,
    ExtractionRow,
    ExtractionTable,
    HistoryEvent,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

CSV_FIXED_COLUMNS = ["paper:title", "paper:doi"]


def _get_cell(table: ExtractionTable, row_id: str, property_name: str) -> Cell:
    row = table.find_row(row_id)
    if row is None or property_name not in row.cells:
        raise UnknownCell(f"no cell ({row_id}, {property_name})")
    return row.cells[property_name]


def edit_cell(table: ExtractionTable, row_id: str, property_name: str,
              new_value: str) -> ExtractionTable:
    """User edit: empty new_value is an explicit assertion of absence."""
    cell = _get_cell(table, row_id, property_name)
    if cell.state == VALIDATED:
        raise CellValidated(f"cell ({row_id}, {property_name}) is validated")
    value = CellValue.found(new_value) if new_value else CellValue.not_found()
    cell.record("user", value)
    cell.state = EDITED
    return table


def set_validation(table: ExtractionTable, row_id: str, property_name: str,
                   validated: bool) -> ExtractionTable:
    """Freeze or unfreeze a cell; repeated no-op calls leave no history."""
    cell = _get_cell(table, row_id, property_name)
    if validated:
        if cell.state == VALIDATED:
            return table
        cell.history.append(HistoryEvent(time.time(), "user", cell.value, cell.value))
        cell.state = VALIDATED
    else:
        if cell.state != VALIDATED:
            return table
        cell.history.append(HistoryEvent(time.time(), "user", cell.value, cell.value))
        cell.state = EDITED if cell.value.is_found else NOT_FOUND
    return table


def set_row_included(table: ExtractionTable, row_id: str,
                     included: bool) -> ExtractionTable:
    """Excluded rows stay in the table but are omitted from export."""
    row = table.find_row(row_id)
    if row is None:
        raise UnknownRow(f"no row {row_id}")
    row.included = included
    return table


def export_csv(table: ExtractionTable) -> bytes:
    """RFC-4180 CSV of included rows; not_found cells emit empty fields,
    never the sentinel."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\r\n")
    writer.writerow(CSV_FIXED_COLUMNS + list(table.property_names))
    included = [row for row in table.rows if row.included]
    if not included:
        log.warning("exporting table %s with all rows excluded", table.table_id)
    for row in included:
        fields = [row.title, row.doi or ""]
        for name in table.property_names:
            value = row.cells[name].value
            fields.append(value.text if value.is_found else "")
        writer.writerow(fields)
    return buffer.getvalue().encode("utf-8")


def _value_to_json(value: CellValue) -> Dict[str, Any]:
    if value.is_found:
        return {"kind": "found", "text": value.text}
    return {"kind": "not_found"}


def _value_from_json(data: Any, path: str) -> CellValue:
    if not isinstance(data, dict) or "kind" not in data:
        raise SchemaViolation("expected a cell value object", path)
    if data["kind"] == "found":
        if not data.get("text"):
            raise SchemaViolation("found value must have non-empty text", path)
        return CellValue.found(data["text"])
    if data["kind"] == "not_found":
        return CellValue.not_found()
    raise SchemaViolation(f"unknown value kind {data['kind']!r}", path)


def _annotation_to_json(ann: Any) -> Dict[str, Any]:
    return {
        "surface_form": ann.surface_form,
        "kg": ann.kg,
        "candidate_uri": ann.candidate_uri,
        "char_range": [ann.char_range[0], ann.char_range[1]],
    }


def table_to_dict(table: ExtractionTable) -> Dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "table_id": table.table_id,
        "corpus_id": table.corpus_id,
        "model_version": table.model_version,
        "created_at": table.created_at,
        "preprocess_version": table.preprocess_version,
        "template_version": table.template_version,
        "properties": [
            {"name": p.name, "description": p.description, "expected_kind": p.expected_kind}
            for p in table.properties
        ],
        "rows": [
            {
                "row_id": row.row_id,
                "title": row.title,
                "doi": row.doi,
                "error": row.error,
                "included": row.included,
                "text_source": row.text_source,
                "cells": [
                    {
                        "property_name": cell.property_name,
                        "value": _value_to_json(cell.value),
                        "state": cell.state,
                        "source_model_version": cell.source_model_version,
                        "history": [
                            {
                                "timestamp": ev.timestamp,
                                "actor": ev.actor,
                                "old_value": _value_to_json(ev.old_value),
                                "new_value": _value_to_json(ev.new_value),
                            }
                            for ev in cell.history
                        ],
                        "annotations": [_annotation_to_json(a) for a in cell.annotations],
                    }
                    for cell in row.cells.values()
                ],
            }
            for row in table.rows
        ],
    }


def export_json(table: ExtractionTable) -> bytes:
    """Full-fidelity structured export; import_table reconstructs the table
    exactly."""
    return json.dumps(table_to_dict(table), indent=2, sort_keys=True).encode("utf-8")


def _require(data: Dict[str, Any], key: str, path: str) -> Any:
    if key not in data:
        raise SchemaViolation(f"missing key {key!r}", f"{path}.{key}")
    return data[key]


def table_from_dict(data: Any, path: str = "$") -> ExtractionTable:
    if not isinstance(data, dict):
        raise SchemaViolation("table export must be a JSON object", path)
    if data.get("schema_version") != SCHEMA_VERSION:
        raise SchemaViolation(
            f"unsupported schema_version {data.get('schema_version')!r}",
            f"{path}.schema_version",
        )
    properties = []
    for i, p in enumerate(_require(data, "properties", path)):
        prop_path = f"{path}.properties[{i}]"
        try:
            properties.append(PropertyDef(
                name=_require(p, "name", prop_path),
                description=p.get("description"),
                expected_kind=p.get("expected_kind", "free_text"),
            ))
        except ValueError as exc:
            raise SchemaViolation(str(exc), prop_path) from exc
    rows: List[ExtractionRow] = []
    for i, r in enumerate(_require(data, "rows", path)):
        row_path = f"{path}.rows[{i}]"
        cells: Dict[str, Cell] = {}
        for j, c in enumerate(_require(r, "cells", row_path)):
            cell_path = f"{row_path}.cells[{j}]"
            state = _require(c, "state", cell_path)
            if state not in CELL_STATES:
                raise SchemaViolation(f"unknown state {state!r}", f"{cell_path}.state")
            history = []
            for k, ev in enumerate(c.get("history", [])):
                ev_path = f"{cell_path}.history[{k}]"
                actor = _require(ev, "actor", ev_path)
                if actor not in ("llm", "user"):
                    raise SchemaViolation(f"unknown actor {actor!r}", f"{ev_path}.actor")
                history.append(HistoryEvent(
                    timestamp=float(_require(ev, "timestamp", ev_path)),
                    actor=actor,
                    old_value=_value_from_json(ev["old_value"], f"{ev_path}.old_value"),
                    new_value=_value_from_json(ev["new_value"], f"{ev_path}.new_value"),
                ))
            annotations: List[Any] = []
            for k, a in enumerate(c.get("annotations", [])):
                ann_path = f"{cell_path}.annotations[{k}]"
                try:
                    annotations.append(EntityAnnotation(
                        surface_form=_require(a, "surface_form", ann_path),
                        kg=_require(a, "kg", ann_path),
                        candidate_uri=_require(a, "candidate_uri", ann_path),
                        char_range=tuple(_require(a, "char_range", ann_path)),
                    ))
                except ValueError as exc:
                    raise SchemaViolation(str(exc), ann_path) from exc
            name = _require(c, "property_name", cell_path)
            cell = Cell(
                property_name=name,
                value=_value_from_json(_require(c, "value", cell_path), f"{cell_path}.value"),
                state=state,
                source_model_version=int(_require(c, "source_model_version", cell_path)),
                history=history,
                annotations=annotations,
            )
            cells[name] = cell
        rows.append(ExtractionRow(
            row_id=_require(r, "row_id", row_path),
            title=_require(r, "title", row_path),
            doi=r.get("doi"),
            cells=cells,
            error=r.get("error"),
            included=bool(r.get("included", True)),
            text_source=r.get("text_source", "document"),
        ))
    return ExtractionTable(
        table_id=_require(data, "table_id", path),
        corpus_id=_require(data, "corpus_id", path),
        model_version=int(_require(data, "model_version", path)),
        properties=tuple(properties),
        rows=rows,
        created_at=float(_require(data, "created_at", path)),
        preprocess_version=data.get("preprocess_version", ""),
        template_version=data.get("template_version", ""),
    )


def import_table(raw: bytes) -> ExtractionTable:
    if not raw:
        raise SchemaViolation("empty input", "$")
    try:
        data = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaViolation(f"not valid JSON: {exc}", "$") from exc
    return table_from_dict(data)

import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from litloop.domain import CellValue, PropertyDef
from litloop.errors import CellValidated, SchemaViolation, UnknownCell, UnknownRow
from litloop.extraction import (
    EDITED,
    GENERATED,
    NOT_FOUND,
    VALIDATED,
    Cell,
    ExtractionRow,
    ExtractionTable,
)
from litloop.llm import SENTINEL
from litloop.review import (
    edit_cell,
    export_csv,
    export_json,
    import_table,
    set_row_included,
    set_validation,
    table_to_dict,
)


def make_table(rows=2, properties=("method",), not_found=()):
    props = tuple(PropertyDef(name=p) for p in properties)
    table_rows = []
    for i in range(rows):
        cells = {}
        for name in properties:
            if (i, name) in not_found:
                cells[name] = Cell(name, CellValue.not_found(), NOT_FOUND, 1)
            else:
                cells[name] = Cell(name, CellValue.found(f"{name}-{i}"), GENERATED, 1)
        table_rows.append(ExtractionRow(
            row_id=f"r{i}", title=f"Paper {i}", doi=f"10.1/p{i}", cells=cells))
    return ExtractionTable(
        table_id="t1", corpus_id="c1", model_version=1,
        properties=props, rows=table_rows)


class TestEditCell:
    def test_edit(self):
        table = make_table()
        edit_cell(table, "r0", "method", "y")
        cell = table.rows[0].cells["method"]
        assert cell.value.text == "y"
        assert cell.state == EDITED
        assert len(cell.history) == 1
        assert cell.history[0].actor == "user"

    def test_edit_not_found_cell(self):
        table = make_table(not_found={(0, "method")})
        edit_cell(table, "r0", "method", "y")
        assert table.rows[0].cells["method"].value.text == "y"

    def test_empty_edit_asserts_absence(self):
        table = make_table()
        edit_cell(table, "r0", "method", "")
        cell = table.rows[0].cells["method"]
        assert not cell.value.is_found
        assert cell.state == EDITED

    def test_validated_cell_refuses_edit(self):
        table = make_table()
        set_validation(table, "r0", "method", True)
        with pytest.raises(CellValidated):
            edit_cell(table, "r0", "method", "y")
        assert table.rows[0].cells["method"].value.text == "method-0"

    def test_unknown_cell(self):
        with pytest.raises(UnknownCell):
            edit_cell(make_table(), "r0", "nope", "y")


class TestValidation:
    def test_validate_freezes(self):
        table = make_table()
        edit_cell(table, "r0", "method", "y")
        set_validation(table, "r0", "method", True)
        assert table.rows[0].cells["method"].state == VALIDATED

    def test_unvalidate_restores(self):
        table = make_table()
        edit_cell(table, "r0", "method", "y")
        set_validation(table, "r0", "method", True)
        set_validation(table, "r0", "method", False)
        assert table.rows[0].cells["method"].state == EDITED

    def test_idempotent_no_extra_history(self):
        table = make_table()
        set_validation(table, "r0", "method", True)
        history_len = len(table.rows[0].cells["method"].history)
        set_validation(table, "r0", "method", True)
        assert len(table.rows[0].cells["method"].history) == history_len


class TestRowInclusion:
    def test_exclude_from_export(self):
        table = make_table(rows=5)
        set_row_included(table, "r1", False)
        lines = export_csv(table).decode().splitlines()
        assert len(lines) == 5  # header + 4 rows

    def test_reinclude(self):
        table = make_table(rows=5)
        set_row_included(table, "r1", False)
        set_row_included(table, "r1", True)
        assert len(export_csv(table).decode().splitlines()) == 6

    def test_exclude_all_header_only(self):
        table = make_table(rows=2)
        for i in range(2):
            set_row_included(table, f"r{i}", False)
        lines = export_csv(table).decode().splitlines()
        assert len(lines) == 1

    def test_unknown_row(self):
        with pytest.raises(UnknownRow):
            set_row_included(make_table(), "zz", True)


class TestExportCsv:
    def test_header_and_shape(self):
        table = make_table(rows=2, properties=("method",))
        lines = export_csv(table).decode().splitlines()
        assert lines[0] == "paper:title,paper:doi,method"
        assert len(lines) == 3

    def test_not_found_is_empty_field_never_sentinel(self):
        table = make_table(rows=1, not_found={(0, "method")})
        raw = export_csv(table)
        assert SENTINEL.encode() not in raw
        assert raw.decode().splitlines()[1].endswith(",")

    def test_deterministic_bytes(self):
        table = make_table(rows=3, properties=("a", "b"))
        assert export_csv(table) == export_csv(table)

    def test_column_count_constant(self):
        import csv as csv_mod
        import io
        table = make_table(rows=4, properties=("a", "b", "c"))
        rows = list(csv_mod.reader(io.StringIO(export_csv(table).decode())))
        assert all(len(r) == 2 + 3 for r in rows)

    def test_export_does_not_mutate(self):
        table = make_table(rows=2)
        before = table_to_dict(table)
        export_csv(table)
        export_json(table)
        assert table_to_dict(table) == before


def random_table(rng):
    properties = tuple(f"p{i}" for i in range(rng.randint(1, 5)))
    table = make_table(rows=rng.randint(1, 6), properties=properties)
    for row in table.rows:
        for cell in row.cells.values():
            action = rng.random()
            if action < 0.3:
                edit_cell(table, row.row_id, cell.property_name,
                          rng.choice(["", "edited value", "x y z"]))
            if rng.random() < 0.3:
                set_validation(table, row.row_id, cell.property_name, True)
        if rng.random() < 0.2:
            set_row_included(table, row.row_id, False)
    return table


class TestJsonRoundTrip:
    def test_round_trip_exact(self):
        table = make_table(rows=5, properties=("a", "b", "c", "d"))
        edit_cell(table, "r0", "a", "changed")
        set_validation(table, "r1", "b", True)
        set_row_included(table, "r2", False)
        restored = import_table(export_json(table))
        assert table_to_dict(restored) == table_to_dict(table)

    def test_model_version_present(self):
        data = json.loads(export_json(make_table()))
        assert data["model_version"] == 1
        assert data["schema_version"] == 1

    def test_tampered_state_rejected(self):
        data = json.loads(export_json(make_table()))
        data["rows"][0]["cells"][0]["state"] = "bogus"
        with pytest.raises(SchemaViolation) as exc_info:
            import_table(json.dumps(data).encode())
        assert "state" in exc_info.value.path

    def test_empty_input(self):
        with pytest.raises(SchemaViolation):
            import_table(b"")

    def test_random_tables_round_trip(self):
        rng = random.Random(7)
        for _ in range(200):
            table = random_table(rng)
            restored = import_table(export_json(table))
            assert table_to_dict(restored) == table_to_dict(table)

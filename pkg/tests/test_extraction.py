import json

import pytest

from litloop.corpus import CorpusEntry, TextDocument, add_selection, new_corpus
from litloop.domain import PropertyDef
from litloop.errors import (
    DuplicateProperty,
    EmptyCorpus,
    EmptyModel,
    TargetValidated,
    UnknownTarget,
)
from litloop.extraction import (
    GENERATED,
    NOT_FOUND,
    VALIDATED,
    build_prompt,
    define_model,
    extract_corpus,
    extract_row,
    reextract_cells,
    update_model,
)
from litloop.llm import SENTINEL, Gateway, Provider, StubProvider

from conftest import STUB_PROFILE, DerivedProvider, make_record


def props(*names):
    return [PropertyDef(name=n) for n in names]


def text_corpus(tmp_path, n=5, abstract_only=()):
    corpus = new_corpus()
    records = []
    for i in range(n):
        if i in abstract_only:
            records.append(make_record(f"p{i}", f"Paper {i}", abstract=f"Abstract {i}"))
        else:
            records.append(make_record(f"p{i}", f"Paper {i}"))
    add_selection(corpus, records)
    for i in range(n):
        if i in abstract_only:
            continue
        path = tmp_path / f"p{i}.txt"
        path.write_text(f"Full text of paper {i}.\n\nMore detail.\n")
        corpus.entries[i] = CorpusEntry(
            record=corpus.entries[i].record,
            document=TextDocument(path=str(path)),
            fetch_status="user_supplied")
    return corpus


class TestDefineModel:
    def test_version_one(self):
        model = define_model(props("method", "dataset"))
        assert model.version == 1
        assert model.property_names == ("method", "dataset")

    def test_case_insensitive_duplicate(self):
        with pytest.raises(DuplicateProperty):
            define_model(props("x", "X"))

    def test_empty(self):
        with pytest.raises(EmptyModel):
            define_model([])

    def test_cap(self):
        with pytest.raises(EmptyModel):
            define_model(props(*[f"p{i}" for i in range(33)]))

    def test_update_bumps_version(self):
        model = define_model(props("a"))
        updated = update_model(model, props("a", "b"))
        assert updated.version == 2
        assert updated.model_id == model.model_id


class TestBuildPrompt:
    def test_response_shape(self):
        model = define_model(props("method"))
        bundle = build_prompt(model, "text", "Title")
        assert bundle.response_shape == ("method",)
        assert SENTINEL in bundle.system_instructions

    def test_description_verbatim(self):
        model = define_model([PropertyDef(name="method", description="the study design used")])
        bundle = build_prompt(model, "text", "Title")
        assert "the study design used" in bundle.system_instructions

    def test_deterministic(self):
        model = define_model(props("a", "b"))
        assert build_prompt(model, "t", "T") == build_prompt(model, "t", "T")


class TestExtractRow:
    def gateway(self, provider):
        return Gateway(provider, STUB_PROFILE)

    def test_value_and_sentinel_mapping(self, tmp_path):
        corpus = text_corpus(tmp_path, n=1)
        model = define_model(props("method", "missing_dataset"))
        row = extract_row(model, corpus.entries[0], self.gateway(DerivedProvider()))
        assert row.cells["method"].state == GENERATED
        assert row.cells["method"].value.text == "method of Paper 0"
        assert row.cells["missing_dataset"].state == NOT_FOUND
        assert not row.cells["missing_dataset"].value.is_found

    def test_no_text_yields_row_error(self):
        model = define_model(props("a"))
        entry = CorpusEntry(record=make_record("p", "No text"))
        row = extract_row(model, entry, self.gateway(DerivedProvider()))
        assert row.error
        assert row.text_source == "none"
        assert all(c.state == NOT_FOUND for c in row.cells.values())

    def test_abstract_fallback(self, tmp_path):
        corpus = text_corpus(tmp_path, n=1, abstract_only=(0,))
        model = define_model(props("a"))
        row = extract_row(model, corpus.entries[0], self.gateway(DerivedProvider()))
        assert row.text_source == "abstract"
        assert row.error is None

    def test_provider_failure_recorded(self, tmp_path):
        class Broken(Provider):
            def complete(self, prompt, profile):
                raise ConnectionError("down")

        corpus = text_corpus(tmp_path, n=1)
        model = define_model(props("a"))
        provider = StubProvider(default="not json at all")
        row = extract_row(model, corpus.entries[0], self.gateway(provider))
        assert row.error
        assert all(c.state == NOT_FOUND for c in row.cells.values())


class TestExtractCorpus:
    def test_shape(self, tmp_path, gateway):
        corpus = text_corpus(tmp_path, n=5)
        model = define_model(props("a", "b", "c", "d"))
        table = extract_corpus(model, corpus, gateway)
        assert len(table.rows) == 5
        assert all(len(r.cells) == 4 for r in table.rows)
        assert table.model_version == 1
        assert [r.row_id for r in table.rows] == [e.record.record_id for e in corpus.entries]

    def test_empty_corpus(self, gateway):
        with pytest.raises(EmptyCorpus):
            extract_corpus(define_model(props("a")), new_corpus(), gateway)

    def test_worker_count_invariant(self, tmp_path, gateway):
        corpus = text_corpus(tmp_path, n=8)
        model = define_model(props("a", "missing_b"))

        def snapshot(table):
            return [
                [(c.property_name, c.value, c.state) for c in row.cells.values()]
                for row in table.rows
            ]

        sequential = extract_corpus(model, corpus, gateway, max_workers=1)
        parallel = extract_corpus(model, corpus, gateway, max_workers=4)
        assert snapshot(sequential) == snapshot(parallel)


class TestReextract:
    def make_table(self, tmp_path, gateway):
        corpus = text_corpus(tmp_path, n=5)
        model = define_model(props("a", "b", "c", "d"))
        return corpus, model, extract_corpus(model, corpus, gateway)

    def test_only_target_changes(self, tmp_path, gateway):
        corpus, model, table = self.make_table(tmp_path, gateway)

        class Changed(Provider):
            def complete(self, prompt, profile):
                return json.dumps({k: "NEW" for k in prompt.response_shape})

        before = {
            (r.row_id, c.property_name): (c.value, c.state)
            for r in table.rows for c in r.cells.values()
        }
        reextract_cells(table, model, corpus, [("p0", "a")],
                        Gateway(Changed(), STUB_PROFILE))
        changed = 0
        for row in table.rows:
            for cell in row.cells.values():
                key = (row.row_id, cell.property_name)
                if (cell.value, cell.state) != before[key]:
                    changed += 1
                    assert key == ("p0", "a")
                    assert cell.value.text == "NEW"
        assert changed == 1

    def test_validated_target_refused(self, tmp_path, gateway):
        corpus, model, table = self.make_table(tmp_path, gateway)
        table.rows[0].cells["a"].state = VALIDATED
        before = table.rows[0].cells["a"].value
        with pytest.raises(TargetValidated):
            reextract_cells(table, model, corpus, [("p0", "a")], gateway)
        assert table.rows[0].cells["a"].value == before

    def test_unknown_target(self, tmp_path, gateway):
        corpus, model, table = self.make_table(tmp_path, gateway)
        with pytest.raises(UnknownTarget):
            reextract_cells(table, model, corpus, [("p0", "nope")], gateway)

    def test_history_appended_on_change(self, tmp_path, gateway):
        corpus, model, table = self.make_table(tmp_path, gateway)

        class Changed(Provider):
            def complete(self, prompt, profile):
                return json.dumps({k: "V2" for k in prompt.response_shape})

        cell = table.rows[0].cells["a"]
        initial = cell.value
        assert cell.history == []
        reextract_cells(table, model, corpus, [("p0", "a")],
                        Gateway(Changed(), STUB_PROFILE))
        assert len(cell.history) == 1
        event = cell.history[0]
        assert event.actor == "llm"
        assert event.old_value == initial
        assert event.new_value == cell.value
        # replaying history from the initial value reproduces the current value
        value = initial
        for ev in cell.history:
            assert ev.old_value == value
            value = ev.new_value
        assert value == cell.value

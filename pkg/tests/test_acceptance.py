"""Acceptance suite: one test per release criterion, each printing a
PASS line when its assertions hold."""

import csv
import io
import json
import random
import re
import time

import pytest
from fastapi.testclient import TestClient

from litloop.corpus import CorpusEntry, TextDocument, add_selection, new_corpus
from litloop.domain import PropertyDef
from litloop.errors import TargetValidated
from litloop.extraction import (
    NOT_FOUND,
    VALIDATED,
    define_model,
    extract_corpus,
    reextract_cells,
)
from litloop.federation import SourcePayload, deduplicate, unify
from litloop.llm import SENTINEL, Gateway, Provider, StubProvider
from litloop.preprocess import BodyText, RawText, reconstruct, strip_backmatter
from litloop.review import (
    edit_cell,
    export_csv,
    export_json,
    import_table,
    set_validation,
    table_to_dict,
)
from litloop.service import create_app
from litloop.store import SESSION_STATES, TRANSITIONS, Store

from conftest import (
    ALPHA_MAPPING,
    BETA_MAPPING,
    GAMMA_MAPPING,
    FIXTURES,
    STUB_PROFILE,
    DerivedProvider,
    load_payload,
    make_record,
)
from test_service import drive_to_reviewing, wait_job


def ok(name):
    print(f"ACCEPTANCE PASS: {name}")


def table_snapshot(table):
    return [
        (row.row_id,
         [(c.property_name, c.value, c.state) for c in row.cells.values()])
        for row in table.rows
    ]


def test_end_to_end_happy_path(client):
    started = time.monotonic()
    session_id = client.post("/api/sessions").json()["session_id"]
    search = client.post(f"/api/sessions/{session_id}/search",
                         json={"query": "knowledge graphs"}).json()
    record_ids = [r["record_id"] for r in search["records"]]
    assert len(record_ids) == 5
    client.post(f"/api/sessions/{session_id}/corpus/selection",
                json={"record_ids": record_ids})
    client.post(f"/api/sessions/{session_id}/corpus/fetch")
    client.put(f"/api/sessions/{session_id}/model",
               json={"properties": [{"name": p} for p in
                     ("method", "dataset", "metric", "finding")]})
    job = client.post(f"/api/sessions/{session_id}/extract").json()
    status = wait_job(client, job["job_id"])
    assert status["status"] == "succeeded"
    table_id = status["table_id"]
    rows = client.get(f"/api/tables/{table_id}").json()["rows"]
    for row_id, prop in [(rows[0]["row_id"], "method"), (rows[1]["row_id"], "dataset")]:
        response = client.patch(f"/api/tables/{table_id}/cells/{row_id}/{prop}",
                                json={"value": "human edit"})
        assert response.status_code == 200
    for row_id, prop in [(rows[0]["row_id"], "method"), (rows[1]["row_id"], "dataset"),
                         (rows[2]["row_id"], "metric")]:
        response = client.patch(f"/api/tables/{table_id}/cells/{row_id}/{prop}",
                                json={"validated": True})
        assert response.status_code == 200
    export = client.get(f"/api/tables/{table_id}/export?format=csv")
    assert export.status_code == 200
    elapsed = time.monotonic() - started
    assert elapsed < 5.0, f"happy path took {elapsed:.2f}s"
    parsed = list(csv.reader(io.StringIO(export.content.decode())))
    assert len(parsed) == 6
    assert all(len(row) == 6 for row in parsed)
    ok("end-to-end happy path")


def test_schema_unification_golden():
    golden = json.loads((FIXTURES / "schemas" / "golden_records.json").read_text())
    lists = [
        unify(SourcePayload("alpha", load_payload("alpha_payload.json"), 0.0),
              ALPHA_MAPPING),
        unify(SourcePayload("beta", load_payload("beta_payload.json"), 0.0),
              BETA_MAPPING),
        unify(SourcePayload("gamma", load_payload("gamma_payload.json"), 0.0),
              GAMMA_MAPPING),
    ]
    for records in lists:
        assert [{"title": r.title, "doi": r.doi, "year": r.year}
                for r in records] == golden
    raw = [record for records in lists for record in records]
    assert len(raw) == 15
    merged, report = deduplicate(raw)
    assert len(merged) == 5
    assert all(len(group) == 3 for group in report)
    ok("schema unification golden test")


def test_backmatter_stripping_fixtures():
    fixtures = FIXTURES / "backmatter"
    annotations = json.loads((fixtures / "annotations.json").read_text())
    assert len(annotations) == 10
    exact = 0
    for name, meta in sorted(annotations.items()):
        text = (fixtures / name).read_text(encoding="utf-8")
        body = strip_backmatter(RawText(text, "t"))
        assert text.startswith(body.text), f"{name}: prefix invariant violated"
        expected = meta["cut_offset"]
        if expected is not None and body.removed_sections \
                and body.removed_sections[0][2] == expected:
            exact += 1
    assert exact >= 9, f"only {exact}/10 exact cuts"
    ok(f"back-matter stripping ({exact}/10 exact, prefix safe)")


def test_reconstruction_property():
    rng = random.Random(42)
    alphabet = "abcdefghij XYZ019.-!?:\n"
    for _ in range(1000):
        text = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 300)))
        clean = reconstruct(BodyText(text=text))
        assert re.findall(r"[a-zA-Z0-9]", clean.text) == \
            re.findall(r"[a-zA-Z0-9]", text)
        again = reconstruct(BodyText(text=clean.text))
        assert again.text == clean.text
    ok("reconstruction preservation + idempotence (1000 cases)")


def test_not_found_soundness(tmp_path):
    class SentinelProvider(Provider):
        # emits the sentinel for one key and omits another entirely
        def complete(self, prompt, profile):
            return json.dumps({"present": "a value", "flagged": SENTINEL})

    corpus = new_corpus()
    add_selection(corpus, [make_record(f"p{i}", f"Paper {i}", abstract="An abstract.")
                           for i in range(3)])
    model = define_model([PropertyDef(name=n)
                          for n in ("present", "flagged", "omitted")])
    table = extract_corpus(model, corpus, Gateway(SentinelProvider(), STUB_PROFILE))
    for row in table.rows:
        assert row.cells["present"].state == "generated"
        assert row.cells["flagged"].state == NOT_FOUND
        assert row.cells["omitted"].state == NOT_FOUND
        assert not row.cells["flagged"].value.is_found
    raw = export_csv(table)
    assert SENTINEL.encode() not in raw
    parsed = list(csv.reader(io.StringIO(raw.decode())))
    for row in parsed[1:]:
        assert row[3] == "" and row[4] == ""
    ok("NOT-FOUND soundness (sentinel flagged, CSV empty fields)")


def _corpus_with_texts(tmp_path, n):
    tmp_path.mkdir(parents=True, exist_ok=True)
    corpus = new_corpus()
    add_selection(corpus, [make_record(f"p{i}", f"Paper {i}") for i in range(n)])
    for i in range(n):
        path = tmp_path / f"p{i}.txt"
        path.write_text(f"Body of paper {i}.\n\nDetails follow.\n")
        corpus.entries[i] = CorpusEntry(
            record=corpus.entries[i].record,
            document=TextDocument(path=str(path)),
            fetch_status="user_supplied")
    return corpus


def test_validated_cell_immutability(tmp_path):
    rng = random.Random(99)
    gateway = Gateway(DerivedProvider(), STUB_PROFILE)

    class Changing(Provider):
        def complete(self, prompt, profile):
            return json.dumps({k: f"new-{rng.randint(0, 10**6)}"
                               for k in prompt.response_shape})

    changing_gateway = Gateway(Changing(), STUB_PROFILE)
    sequences = 10_000
    for seq in range(sequences):
        if seq % 500 == 0:
            corpus = _corpus_with_texts(tmp_path / str(seq), 3)
            model = define_model([PropertyDef(name=n) for n in ("a", "b")])
        table = extract_corpus(model, corpus, gateway, max_workers=1)
        frozen = {}
        for _ in range(rng.randint(2, 6)):
            row = rng.choice(table.rows)
            cell = rng.choice(list(row.cells.values()))
            key = (row.row_id, cell.property_name)
            op = rng.randrange(4)
            before = table_snapshot(table)
            if op == 0:
                if cell.state == VALIDATED:
                    continue
                edit_cell(table, *key, rng.choice(["x", "y", ""]))
            elif op == 1:
                set_validation(table, *key, True)
                frozen[key] = cell.value
            elif op == 2:
                set_validation(table, *key, False)
                frozen.pop(key, None)
            else:
                try:
                    reextract_cells(table, model, corpus, [key], changing_gateway)
                except TargetValidated:
                    assert table_snapshot(table) == before
                else:
                    # only the targeted cell may differ
                    after = table_snapshot(table)
                    for (rid, cells_b), (_, cells_a) in zip(before, after):
                        for cb, ca in zip(cells_b, cells_a):
                            if (rid, cb[0]) != key:
                                assert cb == ca
            for (rid, prop), value in frozen.items():
                current = table.find_row(rid).cells[prop]
                assert current.state == VALIDATED
                assert current.value == value
    ok(f"validated-cell immutability ({sequences} operation sequences)")


def test_json_round_trip_random_tables():
    from test_review import random_table
    rng = random.Random(3)
    for _ in range(500):
        table = random_table(rng)
        restored = import_table(export_json(table))
        assert table_to_dict(restored) == table_to_dict(table)
    ok("JSON export/import round trip (500 random tables)")


def test_determinism_under_concurrency(tmp_path):
    corpus = _corpus_with_texts(tmp_path, 50)
    model = define_model([PropertyDef(name=n)
                          for n in ("method", "dataset", "missing_metric")])
    gateway = Gateway(DerivedProvider(), STUB_PROFILE)
    started = time.monotonic()
    snapshots = [
        table_snapshot(extract_corpus(model, corpus, gateway, max_workers=w))
        for w in (1, 4, 8)
    ]
    elapsed = time.monotonic() - started
    assert snapshots[0] == snapshots[1] == snapshots[2]
    assert elapsed < 30.0
    ok(f"determinism under concurrency (50 docs, workers 1/4/8, {elapsed:.2f}s)")


def test_state_machine_safety(client):
    rng = random.Random(1234)
    total_requests = 0
    session_actions = ("search", "select", "fetch", "define_model", "extract")
    sequences = 0
    while total_requests < 5000:
        sequences += 1
        session_id = client.post(f"/api/sessions").json()["session_id"]
        shadow = "created"
        known_ids = []
        for _ in range(20):
            action = rng.choice(session_actions + ("keywords", "status"))
            total_requests += 1
            if action == "status":
                body = client.get(f"/api/sessions/{session_id}").json()
                assert body["state"] in SESSION_STATES
                continue
            if action == "keywords":
                response = client.post(f"/api/sessions/{session_id}/keywords",
                                       json={"interest": "scholarly KGs"})
                assert response.status_code == 200
                continue
            legal = shadow in TRANSITIONS[action][0]
            if action == "search":
                response = client.post(f"/api/sessions/{session_id}/search",
                                       json={"query": "kg"})
                if legal:
                    known_ids = [r["record_id"]
                                 for r in response.json()["records"]]
            elif action == "select":
                response = client.post(
                    f"/api/sessions/{session_id}/corpus/selection",
                    json={"record_ids": known_ids or ["nothing"]})
            elif action == "fetch":
                response = client.post(f"/api/sessions/{session_id}/corpus/fetch")
            elif action == "define_model":
                response = client.put(
                    f"/api/sessions/{session_id}/model",
                    json={"properties": [{"name": "method"}]})
            else:  # extract
                response = client.post(f"/api/sessions/{session_id}/extract")

            if legal:
                assert response.status_code in (200, 202), (
                    action, shadow, response.status_code, response.text)
                shadow = TRANSITIONS[action][1]
                if action == "extract":
                    status = wait_job(client, response.json()["job_id"])
                    assert status["status"] == "succeeded"
                    shadow = "reviewing"
            else:
                assert response.status_code == 409, (action, shadow, response.text)
                assert response.json()["code"] == "illegal_transition"
            state = client.get(f"/api/sessions/{session_id}").json()["state"]
            assert state in SESSION_STATES
            assert state == shadow
    assert total_requests >= 5000
    ok(f"state-machine safety ({total_requests} randomized requests, "
       f"{sequences} sequences)")


def test_session_recovery(app_config):
    client = TestClient(create_app(app_config))
    session_id, table_id = drive_to_reviewing(client)
    row_id = client.get(f"/api/tables/{table_id}").json()["rows"][0]["row_id"]
    client.patch(f"/api/tables/{table_id}/cells/{row_id}/method",
                 json={"value": "survives restart"})
    before_session = client.get(f"/api/sessions/{session_id}").json()
    before_table = client.get(f"/api/tables/{table_id}").json()

    # simulate a process restart: a brand-new app over the same workdir
    restarted = TestClient(create_app(app_config))
    after_session = restarted.get(f"/api/sessions/{session_id}").json()
    after_table = restarted.get(f"/api/tables/{table_id}").json()
    assert after_session == before_session
    assert after_table == before_table
    assert after_session["state"] == "reviewing"
    store = Store(app_config.workdir)
    assert store.get_corpus(after_session["corpus_id"]).entries
    ok("session recovery after restart")

import json
from pathlib import Path

import pytest

from litloop.annotate import DictStubLinker
from litloop.config import AppConfig
from litloop.domain import PaperRecord
from litloop.federation import ConnectorRegistry, MappingTable, StubConnector
from litloop.llm import SENTINEL, Gateway, Provider, ProviderProfile

FIXTURES = Path(__file__).parent / "fixtures"

ALPHA_MAPPING = MappingTable(
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

BETA_MAPPING = MappingTable(
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

GAMMA_MAPPING = MappingTable(
    hits_path="results.hits",
    fields={
        "title": "meta.name",
        "doi": "meta.ids.doi",
        "native_id": "hit_id",
        "abstract": "summary",
        "authors": "creators",
        "year": "published.year",
        "open_access": "oa",
    },
)


def load_payload(name):
    return json.loads((FIXTURES / "schemas" / name).read_text())


def make_record(record_id, title, doi=None, **kw):
    kw.setdefault("provenance", (("test", record_id),))
    return PaperRecord(record_id=record_id, title=title, doi=doi, **kw)


class DerivedProvider(Provider):
    """Pure-function provider: the value of each property is derived from
    the paper title, and properties named missing_* yield the sentinel."""

    def complete(self, prompt, profile):
        if prompt.response_shape == ("keywords",):
            return json.dumps({"keywords": [
                "knowledge graph", "neuro-symbolic AI", "scholarly communication"]})
        first_line = prompt.user_content.split("\n", 1)[0]
        title = first_line.removeprefix("Title: ")
        out = {}
        for key in prompt.response_shape:
            if key.startswith("missing"):
                out[key] = SENTINEL
            else:
                out[key] = f"{key} of {title}"
        return json.dumps(out)


STUB_PROFILE = ProviderProfile(
    provider_id="stub", endpoint="stub://local", model="stub",
    max_input_units=8000,
)


@pytest.fixture
def gateway():
    return Gateway(DerivedProvider(), STUB_PROFILE)


@pytest.fixture
def alpha_connector():
    return StubConnector("alpha", load_payload("alpha_payload.json"), ALPHA_MAPPING,
                         supports_open_access_filter=False)


@pytest.fixture
def beta_connector():
    return StubConnector("beta", load_payload("beta_payload.json"), BETA_MAPPING)


@pytest.fixture
def gamma_connector():
    return StubConnector("gamma", load_payload("gamma_payload.json"), GAMMA_MAPPING)


def doc_fetcher(url):
    """Dict-style document fetcher used instead of HTTP in tests."""
    index = url.rsplit("/", 1)[-1].split(".")[0]
    if index == "missing":
        raise ConnectionError("404 not found")
    return (f"Document {index}\n\nBody text about topic {index}.\n\n"
            f"References\n[1] Someone. Something. 2020.\n").encode()


@pytest.fixture
def app_config(tmp_path, alpha_connector, beta_connector):
    linker = DictStubLinker({
        "knowledge graph": ("dbpedia", "http://dbpedia.org/resource/Knowledge_graph"),
        "entity linking": ("wikidata", "http://www.wikidata.org/entity/Q5888285"),
    })
    return AppConfig(
        workdir=tmp_path / "workdir",
        registry=ConnectorRegistry([alpha_connector, beta_connector]),
        gateway=Gateway(DerivedProvider(), STUB_PROFILE),
        linker=linker,
        fetcher=doc_fetcher,
    )


@pytest.fixture
def client(app_config):
    from fastapi.testclient import TestClient

    from litloop.service import create_app

    return TestClient(create_app(app_config))

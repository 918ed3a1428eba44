#!/usr/bin/env python3
"""Run the full pipeline offline with stub connectors and a stub provider.

Searches two stub sources, builds a corpus, defines a small data model,
extracts, and prints the resulting CSV.

Usage: python3 scripts/demo_pipeline.py
"""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from litloop.corpus import add_selection, new_corpus
from litloop.domain import PropertyDef, SearchRequest
from litloop.extraction import define_model, extract_corpus
from litloop.federation import ConnectorRegistry, MappingTable, StubConnector
from litloop.llm import Gateway, ProviderProfile, StubProvider
from litloop.review import export_csv

MAPPING = MappingTable(hits_path="hits", fields={
    "title": "title", "doi": "doi", "native_id": "id", "abstract": "abstract"})


def payload(prefix, n):
    return {"hits": [
        {"id": f"{prefix}{i}", "title": f"{prefix.upper()} study {i}",
         "doi": f"10.9/{prefix}{i}",
         "abstract": f"We analyse corpus {prefix}{i} with method M{i}."}
        for i in range(n)
    ]}


def main():
    registry = ConnectorRegistry([
        StubConnector("left", payload("l", 3), MAPPING),
        StubConnector("right", payload("r", 2), MAPPING),
    ])
    results = registry.search(
        SearchRequest(query="demo", connector_ids=("left", "right")))
    print(f"search: {len(results.records)} records "
          f"from {len(results.per_connector_status)} connectors")

    corpus = new_corpus()
    add_selection(corpus, results.records)

    provider = StubProvider(
        default=json.dumps({"method": "manual coding", "dataset": "NOT_FOUND"}))
    gateway = Gateway(provider, ProviderProfile(
        provider_id="stub", endpoint="stub://local", model="stub",
        max_input_units=8000))

    model = define_model([
        PropertyDef(name="method", description="how the study was done"),
        PropertyDef(name="dataset"),
    ])
    table = extract_corpus(model, corpus, gateway)
    print(f"extracted: {len(table.rows)} rows x {len(table.properties)} properties")
    print()
    sys.stdout.write(export_csv(table).decode())


if __name__ == "__main__":
    main()

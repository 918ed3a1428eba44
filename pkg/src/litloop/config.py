"""Configuration loading and wiring of connectors, provider and linker.

Config files are YAML (JSON is valid YAML); environment variables override:
LITLOOP_WORKDIR for the workdir, LITLOOP_LLM_KEY and
LITLOOP_<CONNECTOR_ID>_KEY for credentials.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Optional

import yaml

from .annotate import DictStubLinker, LinkingService, SpotlightLinker
from .federation import (
    Connector,
    ConnectorRegistry,
    CrossrefConnector,
    MappingTable,
    SemanticScholarConnector,
    StubConnector,
)
from .llm import Gateway, HttpProvider, Provider, ProviderProfile, StubProvider

DEFAULT_PROFILE = ProviderProfile(
    provider_id="stub",
    endpoint="stub://local",
    model="stub",
    max_input_units=8000,
)


@dataclass
class AppConfig:
    workdir: Path
    registry: ConnectorRegistry
    gateway: Gateway
    linker: Optional[LinkingService] = None
    # test seam: replaces the HTTP document fetcher when set
    fetcher: Optional[Callable[[str], bytes]] = None
    fetch_workers: int = 4
    extract_workers: int = 4
    host: str = "127.0.0.1"
    port: int = 8044
    raw: Dict[str, Any] = field(default_factory=dict)


def _build_connector(entry: Dict[str, Any], config_dir: Path) -> Connector:
    kind = entry.get("type", "stub")
    if kind == "semantic_scholar":
        return SemanticScholarConnector(base_url=entry.get("base_url"))
    if kind == "crossref":
        return CrossrefConnector(base_url=entry.get("base_url"))
    if kind == "stub":
        fixture_path = entry.get("fixture")
        if fixture_path:
            fixture = json.loads((config_dir / fixture_path).read_text(encoding="utf-8"))
        else:
            fixture = entry
        mapping = MappingTable(
            hits_path=fixture["mapping"]["hits_path"],
            fields=fixture["mapping"]["fields"],
        )
        return StubConnector(
            connector_id=entry.get("id") or fixture.get("id", "stub"),
            raw_body=fixture["body"],
            mapping=mapping,
            supports_open_access_filter=fixture.get("supports_open_access_filter", False),
            supports_year_filter=fixture.get("supports_year_filter", False),
        )
    raise ValueError(f"unknown connector type {kind!r}")


def _build_provider(entry: Dict[str, Any], config_dir: Path) -> Provider:
    kind = entry.get("type", "stub")
    if kind == "http":
        return HttpProvider()
    if kind == "stub":
        fixture_path = entry.get("fixture")
        if fixture_path:
            return StubProvider.from_file(str(config_dir / fixture_path))
        return StubProvider(fixtures=entry.get("fixtures"), default=entry.get("default"))
    raise ValueError(f"unknown provider type {kind!r}")


def _build_linker(entry: Optional[Dict[str, Any]]) -> Optional[LinkingService]:
    if not entry:
        return None
    kind = entry.get("type", "stub")
    if kind == "spotlight":
        return SpotlightLinker(base_url=entry["base_url"], kg=entry.get("kg", "dbpedia"))
    if kind == "stub":
        entries = {
            phrase: (spec["kg"], spec["uri"])
            for phrase, spec in entry.get("entries", {}).items()
        }
        return DictStubLinker(entries)
    raise ValueError(f"unknown linker type {kind!r}")


def load_config(path: Optional[Path] = None,
                overrides: Optional[Dict[str, Any]] = None) -> AppConfig:
    data: Dict[str, Any] = {}
    config_dir = Path.cwd()
    if path:
        path = Path(path)
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        config_dir = path.parent
    if overrides:
        data.update(overrides)

    workdir = Path(
        os.environ.get("LITLOOP_WORKDIR")
        or data.get("workdir")
        or Path.cwd() / "litloop-workdir"
    )

    connectors = [
        _build_connector(entry, config_dir) for entry in data.get("connectors", [])
    ]
    if not connectors:
        connectors = [SemanticScholarConnector(), CrossrefConnector()]
    registry = ConnectorRegistry(connectors)

    provider_cfg = data.get("provider", {"type": "stub"})
    provider = _build_provider(provider_cfg, config_dir)
    profile_cfg = provider_cfg.get("profile", {})
    profile = ProviderProfile(
        provider_id=profile_cfg.get("provider_id", DEFAULT_PROFILE.provider_id),
        endpoint=profile_cfg.get("endpoint", DEFAULT_PROFILE.endpoint),
        model=profile_cfg.get("model", DEFAULT_PROFILE.model),
        max_input_units=profile_cfg.get("max_input_units", DEFAULT_PROFILE.max_input_units),
        supports_json_mode=profile_cfg.get("supports_json_mode", True),
    )
    limits = data.get("limits", {})
    gateway = Gateway(provider, profile,
                      max_in_flight=limits.get("provider_calls", 4))

    server = data.get("server", {})
    return AppConfig(
        workdir=workdir,
        registry=registry,
        gateway=gateway,
        linker=_build_linker(data.get("linker")),
        fetch_workers=limits.get("fetch_workers", 4),
        extract_workers=limits.get("extract_workers", 4),
        host=server.get("host", "127.0.0.1"),
        port=server.get("port", 8044),
        raw=data,
    )

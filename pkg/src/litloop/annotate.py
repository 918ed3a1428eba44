"""Entity-candidate annotation over cell values via an external linking
service. Best-effort enrichment: service failures never block the workflow,
and annotation never alters cell values or states."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import requests

log = logging.getLogger(__name__)

KNOWLEDGE_GRAPHS = ("dbpedia", "wikidata")


@dataclass(frozen=True)
class EntityAnnotation:
    surface_form: str
    kg: str  # dbpedia | wikidata
    candidate_uri: str
    char_range: Tuple[int, int]

    def __post_init__(self):
        if self.kg not in KNOWLEDGE_GRAPHS:
            raise ValueError(f"unknown kg {self.kg!r}")
        start, end = self.char_range
        if not (0 <= start < end):
            raise ValueError(f"invalid char_range {self.char_range}")


class LinkingService:
    def annotate(self, text: str) -> List[EntityAnnotation]:
        raise NotImplementedError


class DictStubLinker(LinkingService):
    """Dictionary-backed linker for tests: every case-insensitive occurrence
    of a known phrase becomes a candidate annotation."""

    def __init__(self, entries: Dict[str, Tuple[str, str]]):
        # phrase -> (kg, uri)
        self.entries = dict(entries)

    def annotate(self, text: str) -> List[EntityAnnotation]:
        folded = text.lower()
        annotations: List[EntityAnnotation] = []
        for phrase, (kg, uri) in self.entries.items():
            needle = phrase.lower()
            start = folded.find(needle)
            while start != -1:
                end = start + len(needle)
                annotations.append(EntityAnnotation(
                    surface_form=text[start:end],
                    kg=kg,
                    candidate_uri=uri,
                    char_range=(start, end),
                ))
                start = folded.find(needle, end)
        annotations.sort(key=lambda a: a.char_range)
        return annotations


class SpotlightLinker(LinkingService):
    """DBpedia-Spotlight-style HTTP client (POST /annotate, JSON response)."""

    def __init__(self, base_url: str, kg: str = "dbpedia",
                 confidence: float = 0.5, timeout: float = 15.0):
        self.base_url = base_url.rstrip("/")
        self.kg = kg
        self.confidence = confidence
        self.timeout = timeout

    def annotate(self, text: str) -> List[EntityAnnotation]:
        resp = requests.post(
            f"{self.base_url}/annotate",
            data={"text": text, "confidence": self.confidence},
            headers={"Accept": "application/json"},
            timeout=self.timeout,
        )
        resp.raise_for_status()
        body = resp.json()
        annotations: List[EntityAnnotation] = []
        for res in body.get("Resources", []):
            try:
                offset = int(res["@offset"])
                surface = res["@surfaceForm"]
                uri = res["@URI"]
            except (KeyError, ValueError):
                continue
            if text[offset:offset + len(surface)] != surface:
                continue
            annotations.append(EntityAnnotation(
                surface_form=surface,
                kg=self.kg,
                candidate_uri=uri,
                char_range=(offset, offset + len(surface)),
            ))
        return annotations


def annotate_value(value: str, service: LinkingService) -> List[EntityAnnotation]:
    """Candidate annotations for one cell value; unavailability degrades to
    an empty list with a logged warning."""
    if not value:
        raise ValueError("value must be non-empty")
    try:
        return service.annotate(value)
    except Exception as exc:
        log.warning("linking service unavailable: %s", exc)
        return []


def annotate_table(table, service: LinkingService, max_workers: int = 4):
    """Attach candidate annotations to every found-value cell of included
    rows. Values and states are never modified."""
    from concurrent.futures import ThreadPoolExecutor

    targets = []
    for row in table.rows:
        if not row.included:
            continue
        for cell in row.cells.values():
            if cell.state in ("generated", "edited", "validated") and cell.value.is_found:
                targets.append(cell)
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        results = list(pool.map(lambda c: annotate_value(c.value.text, service), targets))
    for cell, annotations in zip(targets, results):
        cell.annotations = list(annotations)
    return table

"""litloop: human-in-the-loop literature review engine.

Stage 1 builds a scientific corpus from federated scholarly sources;
Stage 2 extracts a user-defined data model from each document via an LLM,
with human editing, validation, and knowledge-graph-ready export.
"""

from .domain import (
    CellValue,
    PaperRecord,
    PropertyDef,
    ResearchInterest,
    SearchRequest,
    normalize_doi,
    normalize_title,
)

__version__ = "0.1.0"

__all__ = [
    "CellValue",
    "PaperRecord",
    "PropertyDef",
    "ResearchInterest",
    "SearchRequest",
    "normalize_doi",
    "normalize_title",
    "__version__",
]

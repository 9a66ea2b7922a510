"""tacit: interview a domain expert about a tabular dataset and accumulate
the answers into a structured, exportable knowledge base.

The package couples a question engine (generated and predefined questions,
scored and prioritized), a two-stage answer validation pipeline, and an
event-sourced session store behind a small HTTP service and CLI.
"""

from .ingest import IngestConfig, histogram, infer_column_type, parse_tabular, rows_in_range, scatter_points
from .model import (
    Annotation,
    Dataset,
    Question,
    Selection,
    Theme,
    THEMES,
    ValidationResult,
    selection_instances,
    validate_selection,
)
from .provider import CompletionRequest, HttpProvider, MockProvider, ProviderConfig
from .questions import DisplayBoard, QuestionPool, refill_enabled, total_score
from .store import SessionManager, SessionStore, build_export, generate_report, load_export
from .validation import validate_answer

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "CompletionRequest",
    "Dataset",
    "DisplayBoard",
    "HttpProvider",
    "IngestConfig",
    "MockProvider",
    "ProviderConfig",
    "Question",
    "QuestionPool",
    "Selection",
    "SessionManager",
    "SessionStore",
    "THEMES",
    "Theme",
    "ValidationResult",
    "build_export",
    "generate_report",
    "histogram",
    "infer_column_type",
    "load_export",
    "parse_tabular",
    "refill_enabled",
    "rows_in_range",
    "scatter_points",
    "selection_instances",
    "total_score",
    "validate_answer",
    "validate_selection",
]

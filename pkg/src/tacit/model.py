"""Shared vocabulary: datasets, selections, annotations, questions, themes.

Pure value types plus the pure functions relating them. Nothing in this
module touches storage or providers, so everything here is safe to share
read-only across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import Optional

from .errors import EmptySelection, OutOfBounds


class Theme(str, Enum):
    """The seven metadata genres used to organize predefined questions."""

    MOTIVATION = "motivation"
    COMPOSITION = "composition"
    COLLECTION_PROCESS = "collection_process"
    PREPROCESSING = "preprocessing"
    USES = "uses"
    DISTRIBUTION = "distribution"
    MAINTENANCE = "maintenance"


#: Canonical theme order, used wherever per-theme output must be deterministic.
THEMES: tuple[Theme, ...] = tuple(Theme)

SELECTION_KINDS = ("whole_dataset", "columns", "rows", "cells", "rectangle")
COLUMN_TYPES = ("numeric", "categorical", "datetime", "text")
QUESTION_STATUSES = ("pooled", "displayed", "answered", "removed")

#: Legal status transitions; questions are never resurrected.
_STATUS_FLOW = {
    "pooled": ("displayed",),
    "displayed": ("answered", "removed"),
    "answered": (),
    "removed": (),
}


@dataclass(frozen=True)
class Selection:
    """A region of the dataset an annotation applies to.

    ``kind`` is one of ``whole_dataset``, ``columns``, ``rows``, ``cells`` or
    ``rectangle``. For ``cells``, ``row_indices`` and ``column_indices`` are
    parallel lists: pair ``i`` is cell ``(row_indices[i], column_indices[i])``.
    ``rect`` holds inclusive ``(row_start, row_end, col_start, col_end)``.
    Indices always reference ingest order, never a sorted view.
    """

    kind: str
    column_indices: tuple[int, ...] = ()
    row_indices: tuple[int, ...] = ()
    rect: Optional[tuple[int, int, int, int]] = None

    @classmethod
    def whole_dataset(cls) -> "Selection":
        return cls(kind="whole_dataset")

    @classmethod
    def columns(cls, indices) -> "Selection":
        return cls(kind="columns", column_indices=tuple(indices))

    @classmethod
    def rows(cls, indices) -> "Selection":
        return cls(kind="rows", row_indices=tuple(indices))

    @classmethod
    def cells(cls, coords) -> "Selection":
        """Build a cell selection from ``(row, col)`` pairs."""
        coords = list(coords)
        return cls(
            kind="cells",
            row_indices=tuple(r for r, _ in coords),
            column_indices=tuple(c for _, c in coords),
        )

    @classmethod
    def rectangle(cls, row_start: int, row_end: int, col_start: int, col_end: int) -> "Selection":
        return cls(kind="rectangle", rect=(row_start, row_end, col_start, col_end))

    @property
    def is_general(self) -> bool:
        return self.kind == "whole_dataset"

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind == "columns":
            out["column_indices"] = list(self.column_indices)
        elif self.kind == "rows":
            out["row_indices"] = list(self.row_indices)
        elif self.kind == "cells":
            out["row_indices"] = list(self.row_indices)
            out["column_indices"] = list(self.column_indices)
        elif self.kind == "rectangle" and self.rect is not None:
            out["rect"] = list(self.rect)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Selection":
        kind = data.get("kind")
        if kind not in SELECTION_KINDS:
            raise ValueError(f"unknown selection kind {kind!r}")
        rect = data.get("rect")
        return cls(
            kind=kind,
            column_indices=tuple(data.get("column_indices") or ()),
            row_indices=tuple(data.get("row_indices") or ()),
            rect=tuple(rect) if rect else None,
        )


def describe_selection(selection: Selection) -> str:
    """Compact human-readable scope label, used in prompts and reports."""
    if selection.kind == "whole_dataset":
        return "general"
    if selection.kind == "columns":
        return "columns " + ",".join(str(c) for c in selection.column_indices)
    if selection.kind == "rows":
        return "rows " + ",".join(str(r) for r in selection.row_indices)
    if selection.kind == "cells":
        pairs = zip(selection.row_indices, selection.column_indices)
        return "cells " + ";".join(f"({r},{c})" for r, c in pairs)
    rs, re_, cs, ce = selection.rect  # type: ignore[misc]
    return f"rows {rs}-{re_} x cols {cs}-{ce}"


def validate_selection(selection: Selection, row_count: int, column_count: int) -> Selection:
    """Check a selection against dataset dimensions and shape rules.

    Returns the selection unchanged when valid. Raises :class:`OutOfBounds`
    for any index outside the grid and :class:`EmptySelection` for a
    non-whole-dataset kind that selects nothing.
    """
    if row_count < 0 or column_count < 0:
        raise ValueError("dataset dimensions must be non-negative")
    kind = selection.kind
    if kind not in SELECTION_KINDS:
        raise ValueError(f"unknown selection kind {kind!r}")

    if kind == "whole_dataset":
        if selection.column_indices or selection.row_indices or selection.rect:
            raise ValueError("whole_dataset selections carry no indices")
        return selection

    def check_rows(indices):
        for r in indices:
            if not 0 <= r < row_count:
                raise OutOfBounds(r, "row")

    def check_cols(indices):
        for c in indices:
            if not 0 <= c < column_count:
                raise OutOfBounds(c, "column")

    if kind == "columns":
        if not selection.column_indices:
            raise EmptySelection("no columns selected")
        check_cols(selection.column_indices)
    elif kind == "rows":
        if not selection.row_indices:
            raise EmptySelection("no rows selected")
        check_rows(selection.row_indices)
    elif kind == "cells":
        if not selection.row_indices:
            raise EmptySelection("no cells selected")
        if len(selection.row_indices) != len(selection.column_indices):
            raise ValueError("cell selection has unpaired indices")
        check_rows(selection.row_indices)
        check_cols(selection.column_indices)
    else:  # rectangle
        if selection.rect is None:
            raise EmptySelection("no rectangle given")
        rs, re_, cs, ce = selection.rect
        if rs > re_ or cs > ce:
            raise EmptySelection("rectangle bounds are inverted")
        check_rows((rs, re_))
        check_cols((cs, ce))
    return selection


def selection_instances(selection: Selection, dataset: "Dataset") -> list[tuple[int, int]]:
    """Expand a validated selection into the exact cell coordinates it covers.

    ``whole_dataset`` returns an empty list: highlighting everything is a
    presentation concern, not a coordinate set.
    """
    kind = selection.kind
    if kind == "whole_dataset":
        return []
    coords: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()

    def add(r: int, c: int) -> None:
        if (r, c) not in seen:
            seen.add((r, c))
            coords.append((r, c))

    if kind == "columns":
        for r in range(dataset.row_count):
            for c in selection.column_indices:
                add(r, c)
    elif kind == "rows":
        for r in selection.row_indices:
            for c in range(dataset.column_count):
                add(r, c)
    elif kind == "cells":
        for r, c in zip(selection.row_indices, selection.column_indices):
            add(r, c)
    else:  # rectangle
        rs, re_, cs, ce = selection.rect  # type: ignore[misc]
        for r in range(rs, re_ + 1):
            for c in range(cs, ce + 1):
                add(r, c)
    return coords


@dataclass(frozen=True)
class CellValue:
    """One grid cell: the raw ingested text plus an optional typed view."""

    raw: str
    is_null: bool
    parsed: object = None  # float | datetime | None, per column type


@dataclass(frozen=True)
class ColumnMeta:
    name: str
    inferred_type: str
    null_count: int


@dataclass(frozen=True)
class Dataset:
    """Immutable rectangular table; the object under discussion."""

    id: str
    name: str
    columns: tuple[ColumnMeta, ...]
    cells: tuple[tuple[CellValue, ...], ...]  # row-major
    row_count: int
    column_count: int

    def column_values(self, index: int) -> list[CellValue]:
        return [row[index] for row in self.cells]

    def validate(self) -> None:
        """Re-check the structural invariants; raises ``ValueError`` if broken."""
        if self.row_count != len(self.cells):
            raise ValueError("row_count does not match the grid")
        if self.column_count != len(self.columns):
            raise ValueError("column_count does not match the column list")
        for i, row in enumerate(self.cells):
            if len(row) != self.column_count:
                raise ValueError(f"row {i} is not rectangular")
        names = [c.name.strip() for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError("column names are not unique")


@dataclass(frozen=True)
class Annotation:
    """A committed note about the dataset or one of its regions.

    Immutable once committed; corrections are new annotations. ``sequence``
    is strictly increasing within a session and never reused.
    """

    id: str
    selection: Selection
    text: str
    origin: str  # "direct" | "answer"
    sequence: int
    created_at: datetime
    question_id: Optional[str] = None

    @property
    def is_general(self) -> bool:
        return self.selection.is_general

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "selection": self.selection.to_dict(),
            "text": self.text,
            "origin": self.origin,
            "sequence": self.sequence,
            "created_at": self.created_at.isoformat(),
            "question_id": self.question_id,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Annotation":
        return cls(
            id=data["id"],
            selection=Selection.from_dict(data["selection"]),
            text=data["text"],
            origin=data["origin"],
            sequence=data["sequence"],
            created_at=datetime.fromisoformat(data["created_at"]),
            question_id=data.get("question_id"),
        )


def _check_score(value: int, name: str) -> int:
    if not isinstance(value, int) or not 1 <= value <= 5:
        raise ValueError(f"{name} must be an integer in [1, 5], got {value!r}")
    return value


@dataclass
class Question:
    """A predefined or generated prompt to the expert.

    Carries the three 1-5 priority components. ``recency`` and
    ``originality`` evolve over the question's life; ``importance`` is scored
    once at creation and cached.
    """

    id: str
    text: str
    origin: str  # "predefined" | "generated"
    theme: Optional[Theme] = None
    status: str = "pooled"
    originality: int = 5
    recency: int = 5
    importance: int = 3
    importance_degraded: bool = False
    trigger_annotation_id: Optional[str] = None

    def __post_init__(self) -> None:
        if self.origin not in ("predefined", "generated"):
            raise ValueError(f"unknown question origin {self.origin!r}")
        if self.origin == "predefined" and self.theme is None:
            raise ValueError("predefined questions must carry a theme")
        if self.status not in QUESTION_STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if not self.text:
            raise ValueError("question text must be non-empty")
        _check_score(self.originality, "originality")
        _check_score(self.recency, "recency")
        _check_score(self.importance, "importance")

    def advance_status(self, new_status: str) -> None:
        if new_status not in _STATUS_FLOW[self.status]:
            raise ValueError(f"illegal status transition {self.status} -> {new_status}")
        self.status = new_status

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "origin": self.origin,
            "theme": self.theme.value if self.theme else None,
            "status": self.status,
            "originality": self.originality,
            "recency": self.recency,
            "importance": self.importance,
            "importance_degraded": self.importance_degraded,
            "trigger_annotation_id": self.trigger_annotation_id,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Question":
        theme = data.get("theme")
        return cls(
            id=data["id"],
            text=data["text"],
            origin=data["origin"],
            theme=Theme(theme) if theme else None,
            status=data["status"],
            originality=data["originality"],
            recency=data["recency"],
            importance=data["importance"],
            importance_degraded=data.get("importance_degraded", False),
            trigger_annotation_id=data.get("trigger_annotation_id"),
        )


@dataclass(frozen=True)
class ValidationResult:
    """Accept/reject verdict for a submitted answer.

    ``stage`` names the failing check (``faithfulness`` or ``contradiction``)
    and is absent on acceptance; feedback is non-empty exactly when rejected.
    """

    verdict: str  # "accepted" | "rejected"
    feedback: str = ""
    stage: Optional[str] = None

    def __post_init__(self) -> None:
        if self.verdict not in ("accepted", "rejected"):
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.verdict == "accepted" and (self.feedback or self.stage):
            raise ValueError("accepted results carry no feedback or stage")
        if self.verdict == "rejected" and not self.feedback:
            raise ValueError("rejections must carry feedback")

    @property
    def accepted(self) -> bool:
        return self.verdict == "accepted"

"""Tabular ingestion: CSV parsing, column typing, and per-column statistics.

All functions here are pure; the histogram / scatter / range helpers back the
visualization views and cross-filtering.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import re
from bisect import bisect_right
from dataclasses import dataclass
from datetime import datetime

from .errors import (
    DecodeError,
    DuplicateColumn,
    EmptyColumn,
    EmptyDataset,
    LimitExceeded,
    NonNumericColumn,
    RaggedRow,
)
from .model import CellValue, ColumnMeta, Dataset

DEFAULT_NULL_TOKENS = ("", "NA", "N/A", "null")

#: Strict decimal grammar: sign, digits, optional fraction and exponent.
#: Deliberately rejects inf/nan/underscores that ``float()`` would accept.
_DECIMAL_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")

_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")
_DATETIME_RE = re.compile(
    r"^\d{4}-\d{2}-\d{2}[T ]\d{2}:\d{2}(:\d{2}(\.\d{1,6})?)?(Z|[+-]\d{2}:\d{2})?$"
)


@dataclass(frozen=True)
class IngestConfig:
    """Upload limits and parsing knobs. Defaults cap datasets at 10,000 rows
    and 20 columns."""

    max_rows: int = 10000
    max_columns: int = 20
    null_tokens: tuple[str, ...] = DEFAULT_NULL_TOKENS
    delimiter: str = ","

    def __post_init__(self) -> None:
        if self.max_rows < 1 or self.max_columns < 1:
            raise ValueError("limits must be at least 1")


@dataclass(frozen=True)
class HistogramSpec:
    """Equal-width histogram over a numeric column.

    Bins are half-open ``[e_i, e_i+1)`` with the final bin closed on the
    right; ``matching_row_ids[i]`` lists the rows falling into bin ``i`` so
    the client can cross-filter.
    """

    column_index: int
    bin_count: int
    bin_edges: tuple[float, ...]
    counts: tuple[int, ...]
    matching_row_ids: tuple[tuple[int, ...], ...]

    def to_dict(self) -> dict:
        return {
            "column_index": self.column_index,
            "bin_count": self.bin_count,
            "bin_edges": list(self.bin_edges),
            "counts": list(self.counts),
            "matching_row_ids": [list(ids) for ids in self.matching_row_ids],
        }


def is_decimal(value: str) -> bool:
    value = value.strip()
    if not _DECIMAL_RE.match(value):
        return False
    return math.isfinite(float(value))


def parse_timestamp(value: str):
    """Parse a strict ISO-8601 date or date-time; returns None on mismatch."""
    value = value.strip()
    try:
        if _DATE_RE.match(value):
            return datetime.fromisoformat(value)
        if _DATETIME_RE.match(value):
            return datetime.fromisoformat(value.replace("Z", "+00:00"))
    except ValueError:
        return None
    return None


def infer_column_type(values: list[str], null_tokens=DEFAULT_NULL_TOKENS) -> str:
    """Classify raw column values as numeric, datetime, categorical or text.

    Numeric wins when every non-null value parses as a finite decimal;
    datetime requires the strict ISO grammar; otherwise a column is
    categorical when its distinct count stays within max(20, 5% of the
    non-null count), and text as the fallback. Total function: an empty or
    all-null column is text.
    """
    non_null = [v for v in values if v not in null_tokens]
    if not non_null:
        return "text"
    if all(is_decimal(v) for v in non_null):
        return "numeric"
    if all(parse_timestamp(v) is not None for v in non_null):
        return "datetime"
    distinct = len(set(non_null))
    if distinct <= max(20, 0.05 * len(non_null)):
        return "categorical"
    return "text"


def make_cell(raw: str, column_type: str, null_tokens) -> CellValue:
    if raw in null_tokens:
        return CellValue(raw=raw, is_null=True)
    if column_type == "numeric":
        return CellValue(raw=raw, is_null=False, parsed=float(raw.strip()))
    if column_type == "datetime":
        return CellValue(raw=raw, is_null=False, parsed=parse_timestamp(raw))
    return CellValue(raw=raw, is_null=False)


def parse_tabular(data: bytes, config: IngestConfig = IngestConfig(), name: str = "dataset") -> Dataset:
    """Parse delimited UTF-8 text (header row required) into a Dataset.

    Field contents are preserved byte-exactly apart from delimiter/quote
    unescaping. Ragged rows are a hard error: silent padding would hide the
    very data-quality facts this tool exists to surface.
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DecodeError(str(exc)) from exc
    if text.startswith("﻿"):
        text = text[1:]
    if not text.strip():
        raise EmptyDataset("no header row")

    reader = csv.reader(io.StringIO(text, newline=""), delimiter=config.delimiter, quotechar='"')
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyDataset("no header row") from None

    if len(header) > config.max_columns:
        raise LimitExceeded("columns", config.max_columns)
    names = [h.strip() for h in header]
    seen: set[str] = set()
    for n in names:
        if n in seen:
            raise DuplicateColumn(n)
        seen.add(n)

    width = len(header)
    raw_rows: list[list[str]] = []
    for i, row in enumerate(reader):
        if not row:  # blank line artifact, not a data row
            continue
        if len(row) != width:
            raise RaggedRow(i)
        if len(raw_rows) >= config.max_rows:
            raise LimitExceeded("rows", config.max_rows)
        raw_rows.append(row)

    columns: list[ColumnMeta] = []
    column_types: list[str] = []
    for c, col_name in enumerate(names):
        raw_values = [row[c] for row in raw_rows]
        col_type = infer_column_type(raw_values, config.null_tokens)
        null_count = sum(1 for v in raw_values if v in config.null_tokens)
        columns.append(ColumnMeta(name=col_name, inferred_type=col_type, null_count=null_count))
        column_types.append(col_type)

    cells = tuple(
        tuple(make_cell(row[c], column_types[c], config.null_tokens) for c in range(width))
        for row in raw_rows
    )
    dataset = Dataset(
        id=hashlib.sha256(data).hexdigest()[:12],
        name=name,
        columns=tuple(columns),
        cells=cells,
        row_count=len(raw_rows),
        column_count=width,
    )
    dataset.validate()
    return dataset


class OutOfRange(NonNumericColumn):
    """Column index outside the dataset; reported like a bad column request."""


def _numeric_pairs(dataset: Dataset, column_index: int) -> list[tuple[int, float]]:
    if not 0 <= column_index < dataset.column_count:
        raise OutOfRange(column_index)
    if dataset.columns[column_index].inferred_type != "numeric":
        raise NonNumericColumn(dataset.columns[column_index].name)
    return [
        (r, cell.parsed)
        for r, cell in enumerate(dataset.column_values(column_index))
        if not cell.is_null
    ]


def default_bin_count(dataset: Dataset, column_index: int) -> int:
    """20 bins, clamped to the number of distinct non-null values."""
    pairs = _numeric_pairs(dataset, column_index)
    distinct = len({v for _, v in pairs})
    return max(1, min(20, distinct))


def histogram(dataset: Dataset, column_index: int, bin_count: int) -> HistogramSpec:
    """Equal-width histogram of a numeric column's non-null values.

    A degenerate column (min == max) collapses to a single bin regardless of
    the requested count; the edges stay strictly ascending.
    """
    if bin_count < 1:
        raise ValueError("bin_count must be >= 1")
    if 0 <= column_index < dataset.column_count and not any(
        not cell.is_null for cell in dataset.column_values(column_index)
    ):
        raise EmptyColumn(dataset.columns[column_index].name)
    pairs = _numeric_pairs(dataset, column_index)

    values = [v for _, v in pairs]
    lo, hi = min(values), max(values)
    if lo == hi:
        edges = [lo, lo + 1.0]
        bin_count = 1
    else:
        span = hi - lo
        edges = [lo + i * span / bin_count for i in range(bin_count + 1)]
        edges[-1] = hi

    counts = [0] * bin_count
    members: list[list[int]] = [[] for _ in range(bin_count)]
    for row_id, v in pairs:
        idx = bisect_right(edges, v) - 1
        if idx == bin_count:  # v == max: final bin is closed on the right
            idx = bin_count - 1
        counts[idx] += 1
        members[idx].append(row_id)

    return HistogramSpec(
        column_index=column_index,
        bin_count=bin_count,
        bin_edges=tuple(edges),
        counts=tuple(counts),
        matching_row_ids=tuple(tuple(ids) for ids in members),
    )


def scatter_points(dataset: Dataset, col_x: int, col_y: int) -> list[tuple[int, float, float]]:
    """One (row_id, x, y) point per row where both cells are non-null."""
    xs = dict(_numeric_pairs(dataset, col_x))
    ys = dict(_numeric_pairs(dataset, col_y))
    return [(r, xs[r], ys[r]) for r in range(dataset.row_count) if r in xs and r in ys]


def rows_in_range(dataset: Dataset, column_index: int, low: float, high: float) -> set[int]:
    """Row ids whose value v satisfies low <= v <= high (nulls excluded)."""
    if low > high:
        raise ValueError("low must not exceed high")
    return {r for r, v in _numeric_pairs(dataset, column_index) if low <= v <= high}

"""Domain vocabulary: selection validation, instance expansion, invariants."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, strategies as st

from tacit.errors import EmptySelection, OutOfBounds
from tacit.model import (
    Question,
    Selection,
    THEMES,
    Theme,
    ValidationResult,
    describe_selection,
    selection_instances,
    validate_selection,
)


def brute_force_rectangle(rs, re_, cs, ce):
    """Independent enumeration of the cells a rectangle covers."""
    return [(r, c) for r in range(rs, re_ + 1) for c in range(cs, ce + 1)]


class TestValidateSelection:
    def test_whole_dataset_has_nothing_to_check(self):
        sel = Selection.whole_dataset()
        assert validate_selection(sel, 5, 3) is sel
        assert validate_selection(sel, 0, 0) is sel

    def test_rows_at_boundary(self):
        assert validate_selection(Selection.rows([0, 4]), 5, 3)
        with pytest.raises(OutOfBounds) as exc:
            validate_selection(Selection.rows([5]), 5, 3)
        assert exc.value.index == 5
        assert exc.value.axis == "row"

    def test_rectangle_in_bounds(self):
        sel = Selection.rectangle(1, 2, 0, 1)
        assert validate_selection(sel, 5, 3) is sel

    def test_negative_index_rejected(self):
        with pytest.raises(OutOfBounds):
            validate_selection(Selection.columns([-1]), 5, 3)

    def test_empty_kinds_rejected(self):
        for sel in (Selection.columns([]), Selection.rows([]), Selection.cells([])):
            with pytest.raises(EmptySelection):
                validate_selection(sel, 5, 3)

    def test_inverted_rectangle_rejected(self):
        with pytest.raises(EmptySelection):
            validate_selection(Selection.rectangle(2, 1, 0, 0), 5, 3)

    def test_whole_dataset_with_indices_is_a_bug(self):
        broken = Selection(kind="whole_dataset", row_indices=(1,))
        with pytest.raises(ValueError):
            validate_selection(broken, 5, 3)


class TestSelectionInstances:
    def test_column_expansion(self, sales_dataset):
        got = selection_instances(Selection.columns([1]), sales_dataset)
        assert got == [(0, 1), (1, 1), (2, 1), (3, 1)]

    def test_single_cell_identity(self, sales_dataset):
        assert selection_instances(Selection.cells([(2, 0)]), sales_dataset) == [(2, 0)]

    def test_rectangle_matches_brute_force(self, sales_dataset):
        # frozen from the independent enumeration: (0,1,0,1) covers 4 cells
        expected = brute_force_rectangle(0, 1, 0, 1)
        assert expected == [(0, 0), (0, 1), (1, 0), (1, 1)]
        got = selection_instances(Selection.rectangle(0, 1, 0, 1), sales_dataset)
        assert got == expected

    def test_whole_dataset_expands_to_nothing(self, sales_dataset):
        assert selection_instances(Selection.whole_dataset(), sales_dataset) == []

    def test_duplicate_cells_deduplicated(self, sales_dataset):
        got = selection_instances(Selection.cells([(1, 1), (1, 1), (0, 0)]), sales_dataset)
        assert got == [(1, 1), (0, 0)]

    @given(
        rs=st.integers(0, 3), rh=st.integers(0, 3),
        cs=st.integers(0, 2), cw=st.integers(0, 1),
    )
    def test_rectangle_cardinality_and_bounds(self, rs, rh, cs, cw):
        row_count, col_count = 7, 4
        re_, ce = min(rs + rh, row_count - 1), min(cs + cw, col_count - 1)
        sel = validate_selection(Selection.rectangle(rs, re_, cs, ce), row_count, col_count)
        dims = type("Dims", (), {"row_count": row_count, "column_count": col_count})()
        got = selection_instances(sel, dims)
        assert len(got) == (re_ - rs + 1) * (ce - cs + 1)
        for r, c in got:
            assert 0 <= r < row_count and 0 <= c < col_count

    def test_every_kind_yields_in_bounds_coordinates(self, sales_dataset):
        rng = random.Random(5)
        ds = sales_dataset
        for _ in range(50):
            kind = rng.choice(["columns", "rows", "cells", "rectangle"])
            if kind == "columns":
                sel = Selection.columns(rng.sample(range(ds.column_count), rng.randint(1, ds.column_count)))
            elif kind == "rows":
                sel = Selection.rows(rng.sample(range(ds.row_count), rng.randint(1, ds.row_count)))
            elif kind == "cells":
                sel = Selection.cells(
                    [(rng.randrange(ds.row_count), rng.randrange(ds.column_count)) for _ in range(3)]
                )
            else:
                r1, r2 = sorted(rng.sample(range(ds.row_count), 2))
                c1, c2 = sorted(rng.sample(range(ds.column_count), 2))
                sel = Selection.rectangle(r1, r2, c1, c2)
            validate_selection(sel, ds.row_count, ds.column_count)
            for r, c in selection_instances(sel, ds):
                assert 0 <= r < ds.row_count
                assert 0 <= c < ds.column_count


class TestSelectionRoundTrip:
    @pytest.mark.parametrize(
        "sel",
        [
            Selection.whole_dataset(),
            Selection.columns([2]),
            Selection.rows([0, 3]),
            Selection.cells([(1, 2), (0, 0)]),
            Selection.rectangle(0, 2, 1, 3),
        ],
    )
    def test_dict_round_trip(self, sel):
        assert Selection.from_dict(sel.to_dict()) == sel

    def test_describe_labels(self):
        assert describe_selection(Selection.whole_dataset()) == "general"
        assert describe_selection(Selection.columns([1, 3])) == "columns 1,3"
        assert describe_selection(Selection.rectangle(0, 1, 2, 3)) == "rows 0-1 x cols 2-3"


class TestThemes:
    def test_exactly_seven(self):
        assert len(THEMES) == 7
        assert [t.value for t in THEMES] == [
            "motivation",
            "composition",
            "collection_process",
            "preprocessing",
            "uses",
            "distribution",
            "maintenance",
        ]

    def test_no_other_value_constructible(self):
        with pytest.raises(ValueError):
            Theme("provenance")


class TestQuestion:
    def test_predefined_requires_theme(self):
        with pytest.raises(ValueError):
            Question(id="q1", text="why", origin="predefined")

    def test_scores_must_be_in_range(self):
        with pytest.raises(ValueError):
            Question(id="q1", text="why", origin="generated", recency=0)
        with pytest.raises(ValueError):
            Question(id="q1", text="why", origin="generated", importance=6)

    def test_status_flow_forbids_resurrection(self):
        q = Question(id="q1", text="why", origin="generated")
        q.advance_status("displayed")
        q.advance_status("answered")
        with pytest.raises(ValueError):
            q.advance_status("displayed")
        with pytest.raises(ValueError):
            q.advance_status("removed")

    def test_pooled_cannot_jump_to_answered(self):
        q = Question(id="q1", text="why", origin="generated")
        with pytest.raises(ValueError):
            q.advance_status("answered")


class TestValidationResult:
    def test_accepted_carries_no_feedback(self):
        with pytest.raises(ValueError):
            ValidationResult(verdict="accepted", feedback="nope")
        with pytest.raises(ValueError):
            ValidationResult(verdict="accepted", stage="faithfulness")

    def test_rejection_requires_feedback(self):
        with pytest.raises(ValueError):
            ValidationResult(verdict="rejected", feedback="")

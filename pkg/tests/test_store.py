"""Session store: log discipline, crash recovery, snapshots, export, report."""

from __future__ import annotations

import json
import shutil
from pathlib import Path

import pytest

from tacit.errors import (
    CorruptLog,
    NoAnnotations,
    PreconditionNotMet,
    ProviderError,
    SequenceConflict,
    UnknownSession,
)
from tacit.model import Selection, Theme
from tacit.provider import MockProvider
from tacit.store import (
    LogicalClock,
    SessionEvent,
    SessionManager,
    SessionState,
    SessionStore,
    apply_event,
    compute_theme_summary,
    export_to_json,
    generate_report,
    load_export,
    state_hash,
    update_theme_summary,
)

from conftest import LONG_ANSWER, SALES_CSV

MOTIVATION_BANK = [(Theme.MOTIVATION, f"motivation probe {i}") for i in range(7)]


def answer_n_predefined(manager, session_id, n, theme=None):
    """Answer n displayed predefined questions (refilling when allowed)."""
    answered = 0
    while answered < n:
        board = manager.board_payload(session_id)
        targets = [
            q for q in board["questions"]
            if q["origin"] == "predefined" and (theme is None or q["theme"] == theme)
        ]
        if not targets:
            if board["refill_enabled"]:
                manager.refill_board(session_id)
                continue
            raise AssertionError("ran out of predefined questions to answer")
        result, _ = manager.submit_answer(
            session_id, targets[0]["id"], f"{LONG_ANSWER} nr {answered}"
        )
        assert result.accepted
        answered += 1


class TestEventLogDiscipline:
    def test_first_event_is_sequence_one(self, tmp_path):
        store = SessionStore(tmp_path)
        store.create("s1")
        event = SessionEvent(sequence=1, kind="export_requested", payload={}, timestamp="t")
        assert store.append_event("s1", event) == 1

    def test_out_of_order_rejected_and_not_written(self, tmp_path):
        store = SessionStore(tmp_path)
        store.create("s1")
        store.append_event("s1", SessionEvent(1, "export_requested", {}, "t"))
        with pytest.raises(SequenceConflict):
            store.append_event("s1", SessionEvent(3, "export_requested", {}, "t"))
        events, _ = store._read_log("s1")
        assert [e.sequence for e in events] == [1]

    def test_unknown_session(self, tmp_path):
        store = SessionStore(tmp_path)
        with pytest.raises(UnknownSession):
            store.load("missing")

    def test_empty_directory_is_unknown(self, tmp_path):
        store = SessionStore(tmp_path)
        store.create("s1")
        with pytest.raises(UnknownSession):
            store.load("s1")

    def test_torn_final_record_detected_and_repairable(self, tmp_path):
        store = SessionStore(tmp_path)
        store.create("s1")
        for seq in (1, 2, 3):
            store.append_event("s1", SessionEvent(seq, "export_requested", {}, "t"))
        log = tmp_path / "s1" / "events.log"
        intact = log.read_bytes()
        log.write_bytes(intact[:-4])  # tear the last record

        fresh = SessionStore(tmp_path)
        with pytest.raises(CorruptLog) as exc:
            fresh.load("s1")
        assert exc.value.position > 0

        kept = fresh.repair("s1")
        assert kept == 2
        state, last_seq = fresh.load("s1")
        assert last_seq == 2

    def test_undecodable_record_detected(self, tmp_path):
        store = SessionStore(tmp_path)
        store.create("s1")
        store.append_event("s1", SessionEvent(1, "export_requested", {}, "t"))
        log = tmp_path / "s1" / "events.log"
        import struct

        junk = b"\x00{not json"
        log.write_bytes(log.read_bytes() + struct.pack(">I", len(junk)) + junk)
        with pytest.raises(CorruptLog):
            SessionStore(tmp_path).load("s1")


def log_record_boundaries(log_path: Path) -> list[int]:
    """Byte offset after each complete record (offset 0 excluded)."""
    import struct

    data = log_path.read_bytes()
    offsets = []
    pos = 0
    while pos < len(data):
        (length,) = struct.unpack_from(">I", data, pos)
        pos += 4 + length
        offsets.append(pos)
    return offsets


def scripted_session(tmp_path, subdir="crash", annotations=3, answers=2):
    provider = MockProvider(seed=13)
    manager = SessionManager(
        tmp_path / subdir, provider, clock=LogicalClock(), default_seed=13
    )
    session_id = manager.create_session(SALES_CSV, "sales.csv")
    for i in range(annotations):
        manager.commit_annotation(
            session_id, Selection.rows([i % 4]).to_dict(), f"row note {i} with detail"
        )
    board = manager.board_payload(session_id)
    for q in board["questions"][:answers]:
        manager.submit_answer(session_id, q["id"], LONG_ANSWER + " " + q["id"])
    return manager, session_id


class TestReplayEquality:
    def test_snapshot_plus_tail_equals_full_replay(self, tmp_path):
        manager, session_id = scripted_session(tmp_path)
        store = manager.store
        loaded, _ = SessionStore(store.root).load(session_id)
        assert state_hash(loaded) == state_hash(store.replay_from_scratch(session_id))
        assert state_hash(loaded) == state_hash(manager.state_snapshot(session_id))
        snapshots = list((store.root / session_id).glob("snapshot-*.json"))
        assert snapshots, "expected at least one snapshot after 50+ events"

    def test_load_applies_only_the_tail_after_a_snapshot(self, tmp_path, monkeypatch):
        manager, session_id = scripted_session(tmp_path, subdir="tail")
        store = manager.store
        events, _ = store._read_log(session_id)
        newest_snapshot = max(
            int(p.stem.split("-")[1]) for p in (store.root / session_id).glob("snapshot-*.json")
        )
        assert newest_snapshot >= 50

        import tacit.store as store_module

        applied = []
        real_apply = store_module.apply_event

        def counting_apply(state, event):
            applied.append(event.sequence)
            return real_apply(state, event)

        monkeypatch.setattr(store_module, "apply_event", counting_apply)
        SessionStore(store.root).load(session_id)
        assert applied, "tail replay expected"
        assert min(applied) == newest_snapshot + 1
        assert len(applied) == len(events) - newest_snapshot

    def test_every_prefix_replays_to_consistent_state(self, tmp_path):
        manager, session_id = scripted_session(tmp_path, annotations=2, answers=1)
        store = manager.store
        events, _ = store._read_log(session_id)
        state = SessionState()
        for i, event in enumerate(events):
            apply_event(state, event)
            if i % 7 == 0:  # spot-check a sample of prefixes deeply
                prefix_state = SessionState()
                for e in events[: i + 1]:
                    apply_event(prefix_state, e)
                assert state_hash(prefix_state) == state_hash(state)

    def test_crash_injection_after_every_event(self, tmp_path):
        manager, session_id = scripted_session(tmp_path, annotations=3, answers=2)
        source = manager.store.root / session_id
        log = source / "events.log"
        boundaries = log_record_boundaries(log)
        events, _ = manager.store._read_log(session_id)
        assert len(boundaries) == len(events)

        full = log.read_bytes()
        for i, cut in enumerate(boundaries):
            target_root = tmp_path / f"cut-{i}"
            target = target_root / session_id
            target.mkdir(parents=True)
            (target / "events.log").write_bytes(full[:cut])
            survivors = i + 1
            for snap in source.glob("snapshot-*.json"):
                if int(snap.stem.split("-")[1]) <= survivors:
                    shutil.copy(snap, target / snap.name)

            loaded, last_seq = SessionStore(target_root).load(session_id)
            assert last_seq == survivors
            oracle = SessionState()
            for event in events[:survivors]:
                apply_event(oracle, event)
            assert state_hash(loaded) == state_hash(oracle), f"diverged at cut {i}"


class TestManagerReload:
    def test_manager_resumes_from_disk(self, tmp_path):
        manager, session_id = scripted_session(tmp_path, subdir="resume")
        before = state_hash(manager.state_snapshot(session_id))

        resumed = SessionManager(
            tmp_path / "resume", MockProvider(seed=13), clock=LogicalClock(), default_seed=13
        )
        assert state_hash(resumed.state_snapshot(session_id)) == before
        # and the session still works after reload
        resumed.commit_annotation(session_id, {"kind": "whole_dataset"}, "post reload note")
        assert len(resumed.state_snapshot(session_id).annotations) == 6

    def test_failed_bootstrap_leaves_nothing_behind(self, tmp_path):
        class Gibberish:
            def complete(self, request):
                return "][ nonsense"

        manager = SessionManager(tmp_path / "none", Gibberish(), clock=LogicalClock())
        from tacit.errors import MalformedProviderOutput

        with pytest.raises(MalformedProviderOutput):
            manager.create_session(SALES_CSV, "sales.csv")
        assert manager.store.session_ids() == []


class TestExport:
    def test_schema_and_question_embedding(self, session):
        manager, session_id = session
        manager.commit_annotation(session_id, {"kind": "whole_dataset"}, "a general note")
        board = manager.board_payload(session_id)
        manager.submit_answer(session_id, board["questions"][0]["id"], LONG_ANSWER)
        doc = manager.export_session(session_id)

        assert doc["format_version"] == "1"
        assert doc["dataset"]["name"] == "sales"
        assert doc["dataset"]["row_count"] == 4
        assert [c["name"] for c in doc["dataset"]["columns"]] == ["region", "units", "price", "note"]
        assert len(doc["annotations"]) == 2
        first, second = doc["annotations"]
        assert first["scope"] == "general"
        assert "selection" not in first
        assert first["origin"] == "direct"
        assert second["origin"] == "answer"
        assert second["question"]["text"]
        assert second["question"]["origin"] in ("predefined", "generated")
        assert set(doc["theme_progress"]) == {t.value for t in Theme}

    def test_empty_session_exports_header(self, session):
        manager, session_id = session
        doc = manager.export_session(session_id)
        assert doc["annotations"] == []
        assert doc["dataset"]["name"] == "sales"

    def test_data_specific_selection_serialized(self, session):
        manager, session_id = session
        manager.commit_annotation(session_id, Selection.cells([(0, 1)]).to_dict(), "one cell")
        doc = manager.export_session(session_id)
        record = doc["annotations"][0]
        assert record["scope"] == "data_specific"
        assert record["selection"] == {"kind": "cells", "row_indices": [0], "column_indices": [1]}

    def test_round_trip_field_exact(self, tmp_path, session):
        manager, session_id = session
        manager.commit_annotation(session_id, Selection.columns([1]).to_dict(), "col note")
        board = manager.board_payload(session_id)
        manager.submit_answer(session_id, board["questions"][0]["id"], LONG_ANSWER)
        doc = manager.export_session(session_id)

        path = tmp_path / "export.json"
        path.write_text(export_to_json(doc), "utf-8")
        loaded = load_export(path)
        assert loaded == json.loads(json.dumps(doc))  # identical through the file

        state = manager.state_snapshot(session_id)
        assert [r["sequence"] for r in loaded["annotations"]] == [
            a.sequence for a in state.annotations
        ]
        for record, annotation in zip(loaded["annotations"], state.annotations):
            assert record["id"] == annotation.id
            assert record["text"] == annotation.text
            assert record["origin"] == annotation.origin
            assert record["created_at"] == annotation.created_at.isoformat()

    def test_export_is_lossless_and_ordered(self, session):
        manager, session_id = session
        for i in range(5):
            manager.commit_annotation(session_id, {"kind": "whole_dataset"}, f"note {i}")
        doc = manager.export_session(session_id)
        assert [r["sequence"] for r in doc["annotations"]] == [1, 2, 3, 4, 5]

    def test_format_version_checked(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"format_version": "2"}', "utf-8")
        with pytest.raises(ValueError):
            load_export(bad)


class TestThemeSummaries:
    def motivation_manager(self, tmp_path, subdir="m"):
        provider = MockProvider(seed=5)
        manager = SessionManager(
            tmp_path / subdir, provider, MOTIVATION_BANK, clock=LogicalClock(), default_seed=5
        )
        session_id = manager.create_session(SALES_CSV, "sales.csv")
        return manager, session_id

    def test_no_summary_before_two_answers(self, tmp_path):
        manager, session_id = self.motivation_manager(tmp_path)
        answer_n_predefined(manager, session_id, 1, theme="motivation")
        progress = manager.state_snapshot(session_id).theme_progress[Theme.MOTIVATION]
        assert progress.answered_count == 1
        assert progress.summary_text is None
        with pytest.raises(PreconditionNotMet):
            compute_theme_summary(manager.state_snapshot(session_id), Theme.MOTIVATION, manager.provider)

    def test_summary_generated_at_two(self, tmp_path):
        manager, session_id = self.motivation_manager(tmp_path, "m2")
        answer_n_predefined(manager, session_id, 2, theme="motivation")
        progress = manager.state_snapshot(session_id).theme_progress[Theme.MOTIVATION]
        assert progress.answered_count == 2
        assert progress.summary_text == "SUMMARY(motivation): 2 answers"
        assert progress.summary_stale is False

    def test_third_answer_regenerates(self, tmp_path):
        manager, session_id = self.motivation_manager(tmp_path, "m3")
        answer_n_predefined(manager, session_id, 3, theme="motivation")
        progress = manager.state_snapshot(session_id).theme_progress[Theme.MOTIVATION]
        assert progress.summary_text == "SUMMARY(motivation): 3 answers"

    def test_provider_failure_keeps_stale_flag(self, tmp_path):
        manager, session_id = self.motivation_manager(tmp_path, "m4")
        answer_n_predefined(manager, session_id, 1, theme="motivation")

        real = manager.provider

        class FlakySummaries:
            def complete(self, request):
                if request.purpose == "summary":
                    raise ProviderError("summary backend down")
                return real.complete(request)

        manager.provider = FlakySummaries()
        answer_n_predefined(manager, session_id, 1, theme="motivation")
        progress = manager.state_snapshot(session_id).theme_progress[Theme.MOTIVATION]
        assert progress.summary_text is None
        assert progress.summary_stale is True

        # recovery: explicit refresh with a healthy provider
        manager.provider = real
        manager.refresh_theme_summary(session_id, Theme.MOTIVATION)
        progress = manager.state_snapshot(session_id).theme_progress[Theme.MOTIVATION]
        assert progress.summary_text == "SUMMARY(motivation): 2 answers"
        assert progress.summary_stale is False

    def test_update_theme_summary_sets_state(self, tmp_path):
        manager, session_id = self.motivation_manager(tmp_path, "m5")
        answer_n_predefined(manager, session_id, 2, theme="motivation")
        state = manager.state_snapshot(session_id)
        state.theme_progress[Theme.MOTIVATION].summary_stale = True
        text = update_theme_summary(state, Theme.MOTIVATION, manager.provider)
        assert text == "SUMMARY(motivation): 2 answers"
        assert state.theme_progress[Theme.MOTIVATION].summary_stale is False


class TestReport:
    def test_requires_annotations(self, session):
        manager, session_id = session
        with pytest.raises(NoAnnotations):
            manager.report(session_id)

    def test_sections_and_coverage_markers(self, tmp_path):
        provider = MockProvider(seed=5)
        manager = SessionManager(
            tmp_path / "r", provider, MOTIVATION_BANK, clock=LogicalClock(), default_seed=5
        )
        session_id = manager.create_session(SALES_CSV, "sales.csv")
        answer_n_predefined(manager, session_id, 2, theme="motivation")
        report = manager.report(session_id)
        assert report.startswith("# Dataset Report: sales")
        assert report.count("Not yet covered.") == 6
        assert "SUMMARY(motivation): 2 answers" in report
        assert "SUMMARY(overview): 2 answers" in report
        assert "## Annotations (2)" in report

    def test_provider_failure_yields_placeholder(self, session):
        manager, session_id = session
        manager.commit_annotation(session_id, {"kind": "whole_dataset"}, "a note")

        class Down:
            def complete(self, request):
                raise ProviderError("report backend down")

        report = generate_report(manager.state_snapshot(session_id), Down())
        assert "(overview unavailable: provider error)" in report
        assert "# Dataset Report: sales" in report

    def test_byte_deterministic(self, session):
        manager, session_id = session
        manager.commit_annotation(session_id, {"kind": "whole_dataset"}, "a note")
        assert manager.report(session_id) == manager.report(session_id)


class TestTierRouting:
    def test_only_bootstrap_generation_uses_the_reasoning_tier(self, tmp_path):
        provider = MockProvider(seed=4)
        manager = SessionManager(tmp_path / "tiers", provider, clock=LogicalClock(), default_seed=4)
        session_id = manager.create_session(SALES_CSV, "sales.csv")
        manager.commit_annotation(session_id, {"kind": "whole_dataset"}, "one trigger note")
        board = manager.board_payload(session_id)
        manager.submit_answer(session_id, board["questions"][0]["id"], LONG_ANSWER)
        assert provider.tier_log, "expected recorded requests"
        for tier, purpose in provider.tier_log:
            if purpose == "generation":
                assert tier == "initial_generation"
            else:
                assert tier == "standard"
        assert ("initial_generation", "generation") in provider.tier_log


class TestRefillDeterminism:
    def drive(self, tmp_path, subdir):
        manager = SessionManager(
            tmp_path / subdir, MockProvider(seed=9), clock=LogicalClock(), default_seed=9
        )
        session_id = manager.create_session(SALES_CSV, "sales.csv")
        board = manager.board_payload(session_id)
        for q in board["questions"][:6]:
            manager.remove_question(session_id, q["id"])
        refilled = manager.refill_board(session_id)
        return [q["text"] for q in refilled["questions"]]

    def test_same_seed_same_refill(self, tmp_path):
        assert self.drive(tmp_path, "ra") == self.drive(tmp_path, "rb")


class TestLogicalClock:
    def test_monotone_and_deterministic(self):
        a, b = LogicalClock(), LogicalClock()
        ticks_a = [a() for _ in range(3)]
        ticks_b = [b() for _ in range(3)]
        assert ticks_a == ticks_b
        assert ticks_a[0] < ticks_a[1] < ticks_a[2]

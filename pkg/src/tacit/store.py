"""Event-sourced session persistence plus the session command surface.

Every mutation appends one event; replaying the log from an empty state
reproduces the session exactly, and a snapshot is written every 50 events so
reloads stay fast. One writer per session, enforced by sequence numbers and
a per-session lock.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import secrets
import struct
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional, Sequence

from . import prompts, questions
from .errors import (
    CorruptLog,
    EmptyAnnotationText,
    NoAnnotations,
    NotDisplayed,
    PreconditionNotMet,
    ProviderError,
    SequenceConflict,
    StorageError,
    UnknownQuestion,
    UnknownSession,
)
from .ingest import IngestConfig, make_cell, parse_tabular
from .model import (
    Annotation,
    ColumnMeta,
    Dataset,
    Question,
    Selection,
    THEMES,
    Theme,
    selection_instances,
    validate_selection,
)
from .provider import CompletionRequest, Provider, stable_hash
from .questions import DisplayBoard, QuestionPool
from .validation import validate_answer

logger = logging.getLogger(__name__)

EVENT_KINDS = (
    "dataset_ingested",
    "question_generated",
    "question_displayed",
    "question_removed",
    "question_answered",
    "annotation_committed",
    "summary_updated",
    "export_requested",
)

SNAPSHOT_EVERY = 50
EXPORT_FORMAT_VERSION = "1"

_LENGTH = struct.Struct(">I")


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


class LogicalClock:
    """Deterministic clock for offline runs: a fixed epoch plus one second
    per call, so same-seed sessions produce byte-identical exports."""

    def __init__(self, start: str = "2001-01-01T00:00:00+00:00"):
        self._current = datetime.fromisoformat(start)
        self._lock = threading.Lock()

    def __call__(self) -> datetime:
        with self._lock:
            self._current = datetime.fromtimestamp(
                self._current.timestamp() + 1, tz=timezone.utc
            )
            return self._current


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


# --- events ---------------------------------------------------------------------


@dataclass(frozen=True)
class SessionEvent:
    sequence: int
    kind: str
    payload: dict
    timestamp: str

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {
            "sequence": self.sequence,
            "kind": self.kind,
            "payload": self.payload,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SessionEvent":
        return cls(
            sequence=data["sequence"],
            kind=data["kind"],
            payload=data["payload"],
            timestamp=data["timestamp"],
        )


# --- state ----------------------------------------------------------------------


@dataclass
class ThemeProgress:
    """Per-theme bookkeeping; the unanswered bank count is derived from the
    pool so the two can never drift apart."""

    answered_count: int = 0
    summary_text: Optional[str] = None
    summary_stale: bool = False

    def to_dict(self) -> dict:
        return {
            "answered_count": self.answered_count,
            "summary_text": self.summary_text,
            "summary_stale": self.summary_stale,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ThemeProgress":
        return cls(
            answered_count=data["answered_count"],
            summary_text=data.get("summary_text"),
            summary_stale=data.get("summary_stale", False),
        )


def dataset_to_dict(dataset: Dataset, null_tokens: Sequence[str]) -> dict:
    return {
        "id": dataset.id,
        "name": dataset.name,
        "null_tokens": list(null_tokens),
        "columns": [
            {"name": c.name, "inferred_type": c.inferred_type, "null_count": c.null_count}
            for c in dataset.columns
        ],
        "rows": [[cell.raw for cell in row] for row in dataset.cells],
    }


def dataset_from_dict(data: dict) -> Dataset:
    null_tokens = tuple(data["null_tokens"])
    columns = tuple(
        ColumnMeta(name=c["name"], inferred_type=c["inferred_type"], null_count=c["null_count"])
        for c in data["columns"]
    )
    cells = tuple(
        tuple(
            make_cell(raw, columns[i].inferred_type, null_tokens)
            for i, raw in enumerate(row)
        )
        for row in data["rows"]
    )
    return Dataset(
        id=data["id"],
        name=data["name"],
        columns=columns,
        cells=cells,
        row_count=len(cells),
        column_count=len(columns),
    )


@dataclass
class SessionState:
    """The full replayable session: dataset + questions + annotations +
    theme progress. ``apply_event`` is the only mutation path."""

    dataset: Optional[Dataset] = None
    null_tokens: tuple[str, ...] = ()
    rng_seed: int = 0
    pool: QuestionPool = field(default_factory=QuestionPool)
    board: DisplayBoard = field(default_factory=DisplayBoard)
    annotations: list[Annotation] = field(default_factory=list)
    theme_progress: dict[Theme, ThemeProgress] = field(
        default_factory=lambda: {t: ThemeProgress() for t in THEMES}
    )
    board_version: int = 0
    question_counter: int = 0
    annotation_counter: int = 0

    def find_question(self, question_id: str) -> Optional[Question]:
        return self.board.find(question_id) or self.pool.find(question_id)

    def annotation_by_question(self, question_id: str) -> Optional[Annotation]:
        for ann in self.annotations:
            if ann.question_id == question_id:
                return ann
        return None

    def to_dict(self) -> dict:
        all_questions: dict[str, Question] = {}
        membership = {}
        for name, collection in (
            ("backlog", self.pool.generated_backlog),
            ("bank", self.pool.predefined_bank),
            ("history", self.pool.answered_history),
            ("removed", self.pool.removed),
            ("board", self.board.slots),
        ):
            membership[name] = [q.id for q in collection]
            for q in collection:
                all_questions[q.id] = q
        return {
            "dataset": dataset_to_dict(self.dataset, self.null_tokens) if self.dataset else None,
            "rng_seed": self.rng_seed,
            "questions": {qid: q.to_dict() for qid, q in all_questions.items()},
            **membership,
            "annotations": [a.to_dict() for a in self.annotations],
            "theme_progress": {t.value: tp.to_dict() for t, tp in self.theme_progress.items()},
            "board_version": self.board_version,
            "question_counter": self.question_counter,
            "annotation_counter": self.annotation_counter,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SessionState":
        questions_by_id = {
            qid: Question.from_dict(qdict) for qid, qdict in data["questions"].items()
        }
        state = cls(
            dataset=dataset_from_dict(data["dataset"]) if data.get("dataset") else None,
            null_tokens=tuple(data["dataset"]["null_tokens"]) if data.get("dataset") else (),
            rng_seed=data["rng_seed"],
            pool=QuestionPool(
                generated_backlog=[questions_by_id[q] for q in data["backlog"]],
                predefined_bank=[questions_by_id[q] for q in data["bank"]],
                answered_history=[questions_by_id[q] for q in data["history"]],
                removed=[questions_by_id[q] for q in data["removed"]],
                rng_seed=data["rng_seed"],
            ),
            board=DisplayBoard(slots=[questions_by_id[q] for q in data["board"]]),
            annotations=[Annotation.from_dict(a) for a in data["annotations"]],
            theme_progress={
                Theme(t): ThemeProgress.from_dict(tp)
                for t, tp in data["theme_progress"].items()
            },
            board_version=data["board_version"],
            question_counter=data["question_counter"],
            annotation_counter=data["annotation_counter"],
        )
        return state


def state_hash(state: SessionState) -> str:
    return hashlib.sha256(canonical_json(state.to_dict()).encode("utf-8")).hexdigest()


def apply_event(state: SessionState, event: SessionEvent) -> None:
    """Fold one event into the state. Replay-safe: this is the single
    mutation path used both live and when reloading a session."""
    kind = event.kind
    payload = event.payload
    if kind == "dataset_ingested":
        state.dataset = dataset_from_dict(payload["dataset"])
        state.null_tokens = tuple(payload["dataset"]["null_tokens"])
        state.rng_seed = payload["rng_seed"]
        state.pool.rng_seed = payload["rng_seed"]
    elif kind == "question_generated":
        question = Question.from_dict(payload["question"])
        if question.origin == "predefined":
            state.pool.predefined_bank.append(question)
        else:
            state.pool.generated_backlog.append(question)
        state.question_counter += 1
    elif kind == "question_displayed":
        questions.display_question(state.pool, state.board, payload["question_id"])
        state.board_version += 1
    elif kind == "question_removed":
        questions.remove_question(state.board, state.pool, payload["question_id"])
        state.board_version += 1
    elif kind == "question_answered":
        question = questions.mark_answered(state.board, state.pool, payload["question_id"])
        if question.theme is not None:
            progress = state.theme_progress[question.theme]
            progress.answered_count += 1
            if progress.answered_count >= 2:
                progress.summary_stale = True
        state.board_version += 1
    elif kind == "annotation_committed":
        annotation = Annotation.from_dict(payload["annotation"])
        if annotation.sequence != state.annotation_counter + 1:
            raise ValueError(
                f"annotation sequence {annotation.sequence} breaks the series"
            )
        state.annotations.append(annotation)
        state.annotation_counter = annotation.sequence
        exempt = annotation.question_id if annotation.origin == "answer" else None
        questions.decay_recency(state.pool, state.board, exempt_id=exempt)
        state.board_version += 1
    elif kind == "summary_updated":
        progress = state.theme_progress[Theme(payload["theme"])]
        progress.summary_text = payload["text"]
        progress.summary_stale = False
    elif kind == "export_requested":
        pass
    else:  # pragma: no cover - guarded by SessionEvent.__post_init__
        raise ValueError(f"unknown event kind {kind!r}")


# --- file backend ------------------------------------------------------------------


class SessionStore:
    """File-backed session storage: one directory per session holding a
    length-prefixed event log plus periodic snapshots."""

    def __init__(self, root) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._last_seq: dict[str, int] = {}
        self._lock = threading.Lock()

    def _dir(self, session_id: str) -> Path:
        return self.root / session_id

    def _log_path(self, session_id: str) -> Path:
        return self._dir(session_id) / "events.log"

    def session_ids(self) -> list[str]:
        return sorted(p.name for p in self.root.iterdir() if p.is_dir())

    def create(self, session_id: str) -> None:
        directory = self._dir(session_id)
        if directory.exists():
            raise StorageError(f"session directory {session_id!r} already exists")
        directory.mkdir(parents=True)
        self._last_seq[session_id] = 0

    def _scan_last_sequence(self, session_id: str) -> int:
        try:
            events, _ = self._read_log(session_id)
        except CorruptLog:
            raise
        return events[-1].sequence if events else 0

    def append_event(self, session_id: str, event: SessionEvent) -> int:
        """Durably append one event; the sequence must extend the log by
        exactly one (single-writer discipline)."""
        with self._lock:
            last = self._last_seq.get(session_id)
            if last is None:
                last = self._scan_last_sequence(session_id)
            if event.sequence != last + 1:
                raise SequenceConflict(last + 1, event.sequence)
            record = json.dumps(event.to_dict(), ensure_ascii=False).encode("utf-8")
            with open(self._log_path(session_id), "ab") as fh:
                fh.write(_LENGTH.pack(len(record)))
                fh.write(record)
                fh.flush()
                os.fsync(fh.fileno())
            self._last_seq[session_id] = event.sequence
            return event.sequence

    def write_snapshot(self, session_id: str, sequence: int, state: SessionState) -> None:
        """Atomic write-then-rename snapshot of the post-event state."""
        path = self._dir(session_id) / f"snapshot-{sequence:08d}.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(canonical_json({"sequence": sequence, "state": state.to_dict()}), "utf-8")
        os.replace(tmp, path)

    def maybe_snapshot(self, session_id: str, sequence: int, state: SessionState) -> None:
        if sequence % SNAPSHOT_EVERY == 0:
            self.write_snapshot(session_id, sequence, state)

    def _read_log(self, session_id: str) -> tuple[list[SessionEvent], int]:
        """Read every complete record; raises CorruptLog on a torn tail."""
        path = self._log_path(session_id)
        if not path.exists():
            return [], 0
        data = path.read_bytes()
        events: list[SessionEvent] = []
        offset = 0
        while offset < len(data):
            if offset + _LENGTH.size > len(data):
                raise CorruptLog(offset, "truncated length prefix")
            (length,) = _LENGTH.unpack_from(data, offset)
            start = offset + _LENGTH.size
            if start + length > len(data):
                raise CorruptLog(offset, "truncated final record")
            try:
                record = json.loads(data[start : start + length].decode("utf-8"))
                events.append(SessionEvent.from_dict(record))
            except (ValueError, KeyError) as exc:
                raise CorruptLog(offset, f"undecodable record: {exc}") from exc
            offset = start + length
        return events, offset

    def repair(self, session_id: str) -> int:
        """Truncate a torn log at the last complete record; returns the
        number of durable events kept."""
        path = self._log_path(session_id)
        if not path.exists():
            raise UnknownSession(session_id)
        data = path.read_bytes()
        offset = 0
        good = 0
        kept = 0
        while offset < len(data):
            if offset + _LENGTH.size > len(data):
                break
            (length,) = _LENGTH.unpack_from(data, offset)
            start = offset + _LENGTH.size
            if start + length > len(data):
                break
            try:
                json.loads(data[start : start + length].decode("utf-8"))
            except ValueError:
                break
            offset = start + length
            good = offset
            kept += 1
        with open(path, "r+b") as fh:
            fh.truncate(good)
            fh.flush()
            os.fsync(fh.fileno())
        self._last_seq.pop(session_id, None)
        return kept

    def _snapshots(self, session_id: str) -> list[tuple[int, Path]]:
        found = []
        for path in self._dir(session_id).glob("snapshot-*.json"):
            try:
                found.append((int(path.stem.split("-")[1]), path))
            except (IndexError, ValueError):
                continue
        return sorted(found, reverse=True)

    def load(self, session_id: str) -> tuple[SessionState, int]:
        """Newest usable snapshot plus tail replay; equals a full-log replay."""
        directory = self._dir(session_id)
        if not directory.is_dir():
            raise UnknownSession(session_id)
        events, _ = self._read_log(session_id)
        if not events and not self._snapshots(session_id):
            raise UnknownSession(session_id)
        last_seq = events[-1].sequence if events else 0

        state = SessionState()
        base_seq = 0
        for seq, path in self._snapshots(session_id):
            if seq > last_seq:
                continue  # snapshot from a future the log no longer has
            try:
                payload = json.loads(path.read_text("utf-8"))
                state = SessionState.from_dict(payload["state"])
                base_seq = payload["sequence"]
                break
            except (ValueError, KeyError):
                logger.warning("skipping unreadable snapshot %s", path)
                continue

        expected = base_seq + 1
        for event in events:
            if event.sequence <= base_seq:
                continue
            if event.sequence != expected:
                raise CorruptLog(0, f"gap in event sequence at {event.sequence}")
            apply_event(state, event)
            expected += 1
        with self._lock:
            self._last_seq[session_id] = last_seq
        return state, last_seq

    def replay_from_scratch(self, session_id: str) -> SessionState:
        """Full-log replay ignoring snapshots; the reference for equality checks."""
        events, _ = self._read_log(session_id)
        state = SessionState()
        for event in events:
            apply_event(state, event)
        return state


# --- exports and reports --------------------------------------------------------------


def build_export(state: SessionState) -> dict:
    """The exportable knowledge base: annotations in sequence order plus the
    dataset header, per-theme summaries, and progress counts."""
    dataset = state.dataset
    annotations = []
    for ann in state.annotations:
        record: dict = {
            "id": ann.id,
            "sequence": ann.sequence,
            "scope": "general" if ann.is_general else "data_specific",
            "text": ann.text,
            "origin": ann.origin,
            "created_at": ann.created_at.isoformat(),
        }
        if not ann.is_general:
            record["selection"] = ann.selection.to_dict()
        if ann.origin == "answer" and ann.question_id:
            question = state.find_question(ann.question_id)
            if question is not None:
                record["question"] = {
                    "text": question.text,
                    "origin": question.origin,
                    "theme": question.theme.value if question.theme else None,
                }
        annotations.append(record)
    return {
        "format_version": EXPORT_FORMAT_VERSION,
        "dataset": {
            "name": dataset.name if dataset else None,
            "row_count": dataset.row_count if dataset else 0,
            "columns": [
                {"name": c.name, "inferred_type": c.inferred_type, "null_count": c.null_count}
                for c in (dataset.columns if dataset else ())
            ],
        },
        "annotations": annotations,
        "theme_summaries": {
            t.value: tp.summary_text
            for t, tp in state.theme_progress.items()
            if tp.summary_text
        },
        "theme_progress": {
            t.value: {
                "answered": state.theme_progress[t].answered_count,
                "unanswered_bank": state.pool.unanswered_bank_count(t),
            }
            for t in THEMES
        },
    }


def export_to_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def load_export(source) -> dict:
    """Verification loader for export documents (path, file object or str)."""
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, (str, Path)) and Path(source).exists():
        text = Path(source).read_text("utf-8")
    else:
        text = source
    doc = json.loads(text)
    if doc.get("format_version") != EXPORT_FORMAT_VERSION:
        raise ValueError(f"unsupported export format {doc.get('format_version')!r}")
    for required in ("dataset", "annotations", "theme_summaries", "theme_progress"):
        if required not in doc:
            raise ValueError(f"export document missing {required!r}")
    return doc


def theme_qa_pairs(state: SessionState, theme: Theme) -> list[tuple[str, str]]:
    pairs = []
    for question in state.pool.answered_history:
        if question.theme != theme:
            continue
        annotation = state.annotation_by_question(question.id)
        if annotation is not None:
            pairs.append((question.text, annotation.text))
    return pairs


def compute_theme_summary(state: SessionState, theme: Theme, provider: Provider) -> str:
    """Render and run the thematic-overview prompt for one theme."""
    progress = state.theme_progress[theme]
    if progress.answered_count < 2:
        raise PreconditionNotMet(
            f"theme {theme.value!r} has {progress.answered_count} answered questions; needs 2"
        )
    prompt = prompts.render_theme_summary(theme, theme_qa_pairs(state, theme))
    request = CompletionRequest(tier="standard", prompt=prompt, purpose="summary")
    return provider.complete(request)


def update_theme_summary(state: SessionState, theme: Theme, provider: Provider) -> str:
    """Regenerate and store one theme's summary (clears the stale flag)."""
    text = compute_theme_summary(state, theme, provider)
    progress = state.theme_progress[theme]
    progress.summary_text = text
    progress.summary_stale = False
    return text


REPORT_PROSE_PLACEHOLDER = "(overview unavailable: provider error)"
REPORT_NOT_COVERED = "Not yet covered."


def generate_report(state: SessionState, provider: Provider, dataset_text: Optional[str] = None) -> str:
    """Deterministic report skeleton with one provider-written overview.

    The skeleton (dataset header, seven theme sections, the full annotation
    listing) never depends on the provider; a provider failure only swaps the
    prose overview for a placeholder.
    """
    if not state.annotations:
        raise NoAnnotations("the report needs at least one annotation")
    dataset = state.dataset
    if dataset_text is None:
        dataset_text = prompts.serialize_dataset(dataset, 2000)
    try:
        request = CompletionRequest(
            tier="standard",
            prompt=prompts.render_report_overview(dataset_text, state.annotations),
            purpose="report",
        )
        overview = provider.complete(request).strip()
    except ProviderError:
        overview = REPORT_PROSE_PLACEHOLDER

    lines = [f"# Dataset Report: {dataset.name}", ""]
    lines.append(f"Rows: {dataset.row_count} | Columns: {dataset.column_count}")
    lines.append("")
    lines.append("## Columns")
    for meta in dataset.columns:
        lines.append(f"- {meta.name} ({meta.inferred_type}, nulls={meta.null_count})")
    lines += ["", "## Overview", overview, ""]
    lines.append("## Theme coverage")
    for theme in THEMES:
        progress = state.theme_progress[theme]
        lines.append(f"### {theme.value}")
        lines.append(progress.summary_text if progress.summary_text else REPORT_NOT_COVERED)
    lines += ["", f"## Annotations ({len(state.annotations)})"]
    for i, ann in enumerate(state.annotations, 1):
        entry = f"{i}. {prompts.serialize_annotation(ann)}"
        if ann.origin == "answer" and ann.question_id:
            question = state.find_question(ann.question_id)
            if question is not None:
                entry += f" (answer to: {question.text})"
        lines.append(entry)
    return "\n".join(lines) + "\n"


# --- the session command surface ---------------------------------------------------------


@dataclass
class _LiveSession:
    state: SessionState
    last_seq: int
    lock: threading.RLock = field(default_factory=threading.RLock)
    dataset_text: str = ""


class SessionManager:
    """Owns every live session: command validation, provider calls, event
    appends, and read snapshots. One writer per session via its lock."""

    def __init__(
        self,
        root,
        provider: Provider,
        bank_entries: Optional[Sequence[tuple[Theme, str]]] = None,
        *,
        ingest_config: IngestConfig = IngestConfig(),
        prompt_budget: int = 8000,
        clock: Optional[Callable[[], datetime]] = None,
        default_seed: Optional[int] = None,
    ):
        self.store = SessionStore(root)
        self.provider = provider
        self.bank_entries = list(bank_entries or questions.default_bank_entries())
        if not self.bank_entries:
            raise ValueError("the predefined question bank must be non-empty")
        self.ingest_config = ingest_config
        self.prompt_budget = prompt_budget
        self.clock = clock or utc_now
        self.default_seed = default_seed
        self._live: dict[str, _LiveSession] = {}
        self._registry_lock = threading.Lock()

    # -- plumbing --

    def _dataset_budget(self) -> int:
        return max(1, self.prompt_budget // 2)

    def _get(self, session_id: str) -> _LiveSession:
        with self._registry_lock:
            live = self._live.get(session_id)
            if live is not None:
                return live
        state, last_seq = self.store.load(session_id)
        live = _LiveSession(state=state, last_seq=last_seq)
        live.dataset_text = prompts.serialize_dataset(state.dataset, self._dataset_budget())
        with self._registry_lock:
            return self._live.setdefault(session_id, live)

    def _append(self, session_id: str, live: _LiveSession, kind: str, payload: dict) -> SessionEvent:
        event = SessionEvent(
            sequence=live.last_seq + 1,
            kind=kind,
            payload=payload,
            timestamp=self.clock().isoformat(),
        )
        self.store.append_event(session_id, event)
        apply_event(live.state, event)
        live.last_seq = event.sequence
        self.store.maybe_snapshot(session_id, event.sequence, live.state)
        return event

    def _audit(self, session_id: str, kind: str, detail: dict) -> None:
        """Side-channel audit line; never part of the replayable state."""
        path = self.store._dir(session_id) / "audit.log"
        line = canonical_json({"at": self.clock().isoformat(), "kind": kind, **detail})
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")

    def _id_factory(self, live: _LiveSession) -> Callable[[], str]:
        # Ids continue the replayed counter, so reloads never collide.
        counter = iter(range(live.state.question_counter + 1, 10**9))
        return lambda: f"q-{next(counter):04d}"

    def _fill_rng(self, live: _LiveSession) -> random.Random:
        return random.Random(stable_hash(live.state.rng_seed, "fill", live.last_seq + 1))

    # -- session lifecycle --

    def create_session(self, data: bytes, filename: str = "dataset.csv", seed: Optional[int] = None) -> str:
        """Ingest an upload and bootstrap the question state.

        All provider calls happen before anything is persisted, so a failed
        bootstrap leaves no partial session behind.
        """
        if seed is None:
            seed = self.default_seed if self.default_seed is not None else secrets.randbits(32)
        name = Path(filename).stem or "dataset"
        dataset = parse_tabular(data, self.ingest_config, name=name)
        dataset_text = prompts.serialize_dataset(dataset, self._dataset_budget())

        staged: list[SessionEvent] = []
        state = SessionState()

        def stage(kind: str, payload: dict) -> None:
            event = SessionEvent(
                sequence=len(staged) + 1,
                kind=kind,
                payload=payload,
                timestamp=self.clock().isoformat(),
            )
            apply_event(state, event)
            staged.append(event)

        stage(
            "dataset_ingested",
            {
                "dataset": dataset_to_dict(dataset, self.ingest_config.null_tokens),
                "rng_seed": seed,
            },
        )

        ids = self._id_factory(_LiveSession(state=state, last_seq=0))
        for question in questions.build_bank(self.bank_entries, ids):
            stage("question_generated", {"question": question.to_dict()})

        generated = questions.generate_questions(
            self.provider,
            prompts.render_generate_initial(dataset_text),
            questions.BOOTSTRAP_QUESTION_COUNT,
            dataset_text,
            tier="initial_generation",
            purpose="generation",
            id_factory=ids,
            answered_history=(),
        )
        for question in generated:
            stage("question_generated", {"question": question.to_dict()})

        rng = random.Random(stable_hash(seed, "fill", len(staged) + 1))
        plan = questions.plan_fill(state.board, state.pool, state.pool.theme_counts(), rng)
        for question in plan.picked:
            stage("question_displayed", {"question_id": question.id})

        session_id = secrets.token_urlsafe(12)
        self.store.create(session_id)
        persisted = SessionState()
        for event in staged:
            self.store.append_event(session_id, event)
            apply_event(persisted, event)
            self.store.maybe_snapshot(session_id, event.sequence, persisted)
        if state_hash(persisted) != state_hash(state):
            raise StorageError("bootstrap replay diverged from the staged state")

        live = _LiveSession(state=persisted, last_seq=len(staged), dataset_text=dataset_text)
        with self._registry_lock:
            self._live[session_id] = live
        return session_id

    def session_exists(self, session_id: str) -> bool:
        try:
            self._get(session_id)
            return True
        except UnknownSession:
            return False

    # -- reads --

    def state_snapshot(self, session_id: str) -> SessionState:
        live = self._get(session_id)
        with live.lock:
            return live.state

    def board_payload(self, session_id: str) -> dict:
        live = self._get(session_id)
        with live.lock:
            state = live.state
            return {
                "questions": [
                    {
                        "id": q.id,
                        "text": q.text,
                        "origin": q.origin,
                        "theme": q.theme.value if q.theme else None,
                        "originality": q.originality,
                        "recency": q.recency,
                        "importance": q.importance,
                        "total_score": questions.total_score(q),
                    }
                    for q in state.board.slots
                ],
                "refill_enabled": questions.refill_enabled(state.board),
                "board_version": state.board_version,
            }

    def annotations_payload(self, session_id: str) -> list[dict]:
        live = self._get(session_id)
        with live.lock:
            state = live.state
            out = []
            for ann in state.annotations:
                record = ann.to_dict()
                record["scope"] = "general" if ann.is_general else "data_specific"
                record["instances"] = [
                    list(pair) for pair in selection_instances(ann.selection, state.dataset)
                ]
                if ann.origin == "answer" and ann.question_id:
                    question = state.find_question(ann.question_id)
                    record["question_text"] = question.text if question else None
                out.append(record)
            return out

    def theme_payload(self, session_id: str) -> list[dict]:
        live = self._get(session_id)
        with live.lock:
            state = live.state
            return [
                {
                    "theme": t.value,
                    "answered": state.theme_progress[t].answered_count,
                    "unanswered_bank": state.pool.unanswered_bank_count(t),
                    "summary": state.theme_progress[t].summary_text,
                    "stale": state.theme_progress[t].summary_stale,
                }
                for t in THEMES
            ]

    # -- mutations --

    def commit_annotation(self, session_id: str, selection, text: str) -> Annotation:
        """Persist a direct annotation, then let the question engine react."""
        live = self._get(session_id)
        with live.lock:
            state = live.state
            if isinstance(selection, dict):
                selection = Selection.from_dict(selection)
            validate_selection(selection, state.dataset.row_count, state.dataset.column_count)
            if not text or not text.strip():
                raise EmptyAnnotationText("annotation text must be non-empty")
            annotation = Annotation(
                id=f"a-{state.annotation_counter + 1:04d}",
                selection=selection,
                text=text,
                origin="direct",
                sequence=state.annotation_counter + 1,
                created_at=self.clock(),
            )
            self._append(session_id, live, "annotation_committed", {"annotation": annotation.to_dict()})
            self._generation_pass(session_id, live, annotation, recent_question=None)
            return annotation

    def submit_answer(self, session_id: str, question_id: str, answer_text: str):
        """Validate an answer; on acceptance convert it into an annotation.

        Returns (ValidationResult, Annotation | None). A rejection leaves the
        session state untouched apart from an audit line; a provider failure
        propagates as a retryable error with no state change at all.
        """
        live = self._get(session_id)
        with live.lock:
            state = live.state
            question = state.board.find(question_id)
            if question is None:
                if state.pool.find(question_id) is None:
                    raise UnknownQuestion(question_id)
                raise NotDisplayed(question_id)

            result = validate_answer(
                question, answer_text, state.annotations, self.provider, budget=self.prompt_budget
            )
            if not result.accepted:
                self._audit(
                    session_id,
                    "submission_rejected",
                    {"question_id": question_id, "stage": result.stage, "feedback": result.feedback},
                )
                return result, None

            selection = Selection.whole_dataset()
            if question.trigger_annotation_id:
                trigger = next(
                    (a for a in state.annotations if a.id == question.trigger_annotation_id), None
                )
                if trigger is not None and not trigger.is_general:
                    selection = trigger.selection
            annotation = Annotation(
                id=f"a-{state.annotation_counter + 1:04d}",
                selection=selection,
                text=answer_text,
                origin="answer",
                sequence=state.annotation_counter + 1,
                created_at=self.clock(),
                question_id=question_id,
            )
            self._append(session_id, live, "annotation_committed", {"annotation": annotation.to_dict()})
            self._append(session_id, live, "question_answered", {"question_id": question_id})
            self._generation_pass(session_id, live, annotation, recent_question=question)
            self._maybe_refresh_summary(session_id, live, question.theme)
            return result, annotation

    def _generation_pass(
        self,
        session_id: str,
        live: _LiveSession,
        annotation: Annotation,
        recent_question: Optional[Question],
    ) -> None:
        """Five follow-ups per annotation, plus a ten-question top-up when the
        backlog runs low. Provider failures degrade: the next commit retries."""
        state = live.state
        ids = self._id_factory(live)

        def generate(count: int, trigger: Optional[str]) -> list[Question]:
            prompt = prompts.render_generate_followup(
                live.dataset_text,
                tuple(state.pool.answered_history),
                tuple(state.annotations),
                recent_question,
                annotation,
                count=count,
            )
            return questions.generate_questions(
                self.provider,
                prompt,
                count,
                live.dataset_text,
                tier="standard",
                purpose="follow_up",
                id_factory=ids,
                answered_history=state.pool.answered_history,
                trigger_annotation_id=trigger,
            )

        try:
            followups = generate(questions.FOLLOWUP_QUESTION_COUNT, annotation.id)
        except ProviderError as exc:
            self._audit(session_id, "generation_skipped", {"reason": str(exc)})
            return
        for question in followups:
            self._append(session_id, live, "question_generated", {"question": question.to_dict()})

        if len(state.pool.generated_backlog) < questions.REPLENISH_THRESHOLD:
            try:
                replenished = generate(questions.REPLENISH_COUNT, None)
            except ProviderError as exc:
                self._audit(session_id, "replenish_skipped", {"reason": str(exc)})
                return
            for question in replenished:
                self._append(session_id, live, "question_generated", {"question": question.to_dict()})

    def _maybe_refresh_summary(self, session_id: str, live: _LiveSession, theme: Optional[Theme]) -> None:
        if theme is None:
            return
        progress = live.state.theme_progress[theme]
        if not progress.summary_stale or progress.answered_count < 2:
            return
        try:
            text = compute_theme_summary(live.state, theme, self.provider)
        except ProviderError as exc:  # stale flag stays set; retried next answer
            self._audit(session_id, "summary_skipped", {"theme": theme.value, "reason": str(exc)})
            return
        self._append(session_id, live, "summary_updated", {"theme": theme.value, "text": text})

    def refresh_theme_summary(self, session_id: str, theme: Theme) -> str:
        """Explicitly (re)generate one theme's summary; gated on two answers."""
        live = self._get(session_id)
        with live.lock:
            text = compute_theme_summary(live.state, theme, self.provider)
            self._append(session_id, live, "summary_updated", {"theme": theme.value, "text": text})
            return text

    def refill_board(self, session_id: str) -> dict:
        live = self._get(session_id)
        with live.lock:
            state = live.state
            if not questions.refill_enabled(state.board):
                raise PreconditionNotMet("refill_not_enabled")
            rng = self._fill_rng(live)
            plan = questions.plan_fill(state.board, state.pool, state.pool.theme_counts(), rng)
            for question in plan.picked:
                self._append(session_id, live, "question_displayed", {"question_id": question.id})
            payload = self.board_payload(session_id)
            payload["insufficient"] = plan.insufficient
            return payload

    def remove_question(self, session_id: str, question_id: str) -> dict:
        live = self._get(session_id)
        with live.lock:
            state = live.state
            if state.board.find(question_id) is None:
                if state.pool.find(question_id) is None:
                    raise UnknownQuestion(question_id)
                raise NotDisplayed(question_id)
            self._append(session_id, live, "question_removed", {"question_id": question_id})
            return self.board_payload(session_id)

    def export_session(self, session_id: str) -> dict:
        live = self._get(session_id)
        with live.lock:
            doc = build_export(live.state)
            self._append(session_id, live, "export_requested", {})
            return doc

    def report(self, session_id: str) -> str:
        live = self._get(session_id)
        with live.lock:
            return generate_report(live.state, self.provider, dataset_text=live.dataset_text)

"""Prompt rendering and structured-output parsing.

Every prompt the system sends is assembled here from a fixed role preamble
plus labeled segments, in a fixed order, so rendering is byte-deterministic
and testable against golden files. The parsers invert the output formats the
prompts request.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import (
    BudgetTooSmall,
    CountMismatch,
    EmptyDataset,
    MalformedOutput,
    NoAnnotations,
)
from .model import Annotation, Dataset, Question, Theme, describe_selection

# --- fixed prompt text -------------------------------------------------------

ROLE_TEXT = (
    "The role of the Data Therapist is to elicit knowledge about the dataset "
    "from users by asking appropriate questions that, by answering, could help "
    "them understand their own data. The questions should aim to bridge the gap "
    "between reality (the situation, environment, and background surrounding "
    "the dataset) and the dataset itself. While the data is present, it does "
    "not, on its own, explain the background or issues. Ideally, annotations "
    "should be made so that even someone unfamiliar with the dataset can "
    "understand it by reading those annotations. Although the main goal is to "
    "help extract annotations by asking questions, the Data Therapist can also "
    "assist in other tasks related to annotation, such as validating questions."
)

TASK_GENERATE_INITIAL = (
    "Read the dataset. Generate 30 key questions you would ask the experts of "
    "the dataset that would help people who do not know about the data "
    "understand the dataset. The generated questions should (1) help clarify "
    "the dataset from a non-expert's perspective and (2) bridge the gap "
    "between the explanations and the dataset itself."
)

TASK_GENERATE_FOLLOWUP = (
    "Review the questions and annotations above. Generate {count} follow-up "
    "questions that build on the most recent annotation and help elicit deeper "
    "domain knowledge about the dataset. The questions should probe context "
    "that the recent annotation hints at but does not fully explain."
)

TASK_CHECK_FAITHFUL = (
    "Now, look at the answer and check if the answer makes sense, based on the "
    "question. If the answer makes no sense at all, then provide feedback to "
    "guide users to answer the question."
)

TASK_CHECK_CONTRADICTION = (
    "Now, compare the candidate annotation with the existing annotations and "
    "check whether it contradicts any of them. If it conflicts with an "
    "existing annotation, provide feedback describing the conflict so the user "
    "can revise the answer. If there are no existing annotations, or no "
    "conflict exists, the candidate passes."
)

TASK_RATE_IMPORTANCE = (
    "Evaluate (1) the question's ability to clarify the dataset and (2) its "
    "potential to introduce novel insights. Rate how critical answering this "
    "question is to understanding the dataset."
)

TASK_THEME_SUMMARY = (
    "Write a concise thematic overview of what the answers above establish "
    "about the dataset under the theme '{theme}'. Note which aspects of the "
    "theme are now covered and which remain unfilled."
)

TASK_REPORT_OVERVIEW = (
    "Write a short prose overview of the dataset for a reader who has never "
    "seen it, grounded strictly in the annotations above. Highlight "
    "provenance, quality caveats, and intended use where the annotations "
    "mention them."
)

FORMAT_QUESTIONS = (
    "Respond with only a fenced json block of the form:\n"
    "```json\n"
    '{{"questions": [{{"text": "...", "theme": "..."}}]}}\n'
    "```\n"
    'Return exactly {count} objects in the "questions" array. "theme", when '
    "present, must be one of: motivation, composition, collection_process, "
    'preprocessing, uses, distribution, maintenance. Omit "theme" when none '
    "fits."
)

FORMAT_VERDICT = (
    "Respond with only a fenced json block of the form:\n"
    "```json\n"
    '{"verdict": "pass", "feedback": "..."}\n'
    "```\n"
    'Use verdict "pass" if the check succeeds, otherwise "fail" with feedback '
    "explaining the problem. Leave feedback empty on pass."
)

FORMAT_RATING = "Respond with a single integer from 1 to 5 and nothing else."

FORMAT_FREETEXT = "Respond with a short plain-text paragraph and nothing else."

GENERIC_REJECTION_FEEDBACK = (
    "The answer was rejected; please revise it and submit again."
)

# --- segment labels (shared with the offline mock, which parses them) --------

LABEL_QUESTION_UNDER_REVIEW = "Question under review:"
LABEL_SUBMITTED_ANSWER = "Submitted answer:"
LABEL_CANDIDATE = "Candidate annotation:"
LABEL_IMPORTANCE_QUESTION = "Question:"
LABEL_RECENT_QUESTION = "Most recent question:"
LABEL_RECENT_ANNOTATION = "Most recent annotation:"
LABEL_THEME = "Theme:"
NO_RECENT_QUESTION = "(none - the most recent annotation was added directly)"

DATASET_HEADER_PREFIX = "Dataset:"
COLUMN_LINE_RE = re.compile(r"^- (.+?) \[(numeric|categorical|datetime|text), nulls=\d+\]$", re.M)
ANNOTATIONS_HEADER_RE = re.compile(r"^Annotations so far \((\d+)(?: of \d+)?", re.M)
QA_LINE_RE = re.compile(r"^\d+\. Q: ", re.M)
REQUESTED_COUNT_RE = re.compile(r"Generate (\d+) ")


def estimate_tokens(text: str) -> int:
    """Token budget approximation: one token per four characters."""
    return (len(text) + 3) // 4


def _block(label: str, text: str) -> str:
    return f'{label}\n"""\n{text}\n"""'


def _join(*segments: str) -> str:
    return "\n\n".join(segments)


# --- dataset serialization ----------------------------------------------------


def _csv_line(fields: Sequence[str], delimiter: str = ",") -> str:
    buf = io.StringIO()
    csv.writer(buf, delimiter=delimiter, lineterminator="\n").writerow(list(fields))
    return buf.getvalue().rstrip("\n")


def _column_summary(dataset: Dataset, index: int) -> str:
    meta = dataset.columns[index]
    cells = [c for c in dataset.column_values(index) if not c.is_null]
    if meta.inferred_type == "numeric" and cells:
        values = [c.parsed for c in cells]
        mean = sum(values) / len(values)
        return f"- {meta.name}: min={min(values):.6g}, max={max(values):.6g}, mean={mean:.6g}"
    if meta.inferred_type == "datetime" and cells:
        values = sorted(c.raw for c in cells)
        return f"- {meta.name}: earliest={values[0]}, latest={values[-1]}"
    return f"- {meta.name}: distinct={len({c.raw for c in cells})}"


def serialize_dataset(dataset: Dataset, budget: int) -> str:
    """Deterministic textual form of a dataset, fit to a token budget.

    Emits the name, a column list with inferred types and null counts, then
    the rows as delimited lines. When the full table would exceed the budget,
    the head and tail rows bracket an elision marker and per-column summary
    statistics are appended, choosing the largest symmetric row count that
    fits.
    """
    head_lines = [f"{DATASET_HEADER_PREFIX} {dataset.name}", f"Columns ({dataset.column_count}):"]
    for meta in dataset.columns:
        head_lines.append(f"- {meta.name} [{meta.inferred_type}, nulls={meta.null_count}]")
    header_line = _csv_line([c.name for c in dataset.columns])
    row_lines = [_csv_line([cell.raw for cell in row]) for row in dataset.cells]

    full = "\n".join(
        head_lines + [f"Rows ({dataset.row_count}):", header_line] + row_lines
    )
    if estimate_tokens(full) <= budget:
        return full

    summaries = ["Column summaries:"] + [
        _column_summary(dataset, i) for i in range(dataset.column_count)
    ]

    def elided(r: int) -> str:
        marker = f"... ({dataset.row_count - 2 * r} rows elided) ..."
        body = row_lines[:r] + [marker] + (row_lines[-r:] if r else [])
        return "\n".join(
            head_lines
            + [f"Rows ({dataset.row_count}; showing first {r} and last {r}):", header_line]
            + body
            + summaries
        )

    best: Optional[str] = None
    for r in range(dataset.row_count // 2 + 1):
        candidate = elided(r)
        if estimate_tokens(candidate) <= budget:
            best = candidate
        else:
            break
    if best is None:
        raise BudgetTooSmall(f"budget {budget} cannot hold the dataset header")
    return best


def serialize_annotation(annotation: Annotation) -> str:
    return f"[{describe_selection(annotation.selection)}] {annotation.text}"


def _annotations_section(annotations: Sequence[Annotation]) -> str:
    lines = [f"Annotations so far ({len(annotations)}):"]
    if not annotations:
        lines.append("(none)")
    for i, ann in enumerate(annotations, 1):
        lines.append(f"{i}. {serialize_annotation(ann)}")
    return "\n".join(lines)


def _questions_section(questions: Sequence[Question]) -> str:
    lines = [f"Answered questions so far ({len(questions)}):"]
    if not questions:
        lines.append("(none)")
    for i, q in enumerate(questions, 1):
        theme = q.theme.value if q.theme else "untagged"
        lines.append(f"{i}. [{theme}] {q.text}")
    return "\n".join(lines)


# --- renderers -----------------------------------------------------------------


def render_role() -> str:
    """The role preamble; the first segment of every rendered prompt."""
    return ROLE_TEXT


def render_generate_initial(dataset_text: str) -> str:
    """Bootstrap question-generation prompt: role + dataset + task + format."""
    if not dataset_text.strip():
        raise EmptyDataset("cannot render a generation prompt without a dataset")
    return _join(
        ROLE_TEXT,
        dataset_text,
        TASK_GENERATE_INITIAL,
        FORMAT_QUESTIONS.format(count=30),
    )


def render_generate_followup(
    dataset_text: str,
    questions_all: Sequence[Question],
    annotations_all: Sequence[Annotation],
    question_rec: Optional[Question],
    annotation_rec: Annotation,
    count: int = 5,
) -> str:
    """Follow-up generation prompt.

    Segments in order: role, dataset, all answered questions, all annotations
    (sequence order), the most recent question (or an explicit none marker
    when the annotation was added directly), the most recent annotation, task,
    output format.
    """
    if not annotations_all:
        raise NoAnnotations("follow-up generation requires at least one annotation")
    if annotation_rec.sequence != max(a.sequence for a in annotations_all):
        raise ValueError("annotation_rec must be the highest-sequence annotation")
    recent_q = _block(LABEL_RECENT_QUESTION, question_rec.text) if question_rec else (
        f"{LABEL_RECENT_QUESTION}\n{NO_RECENT_QUESTION}"
    )
    return _join(
        ROLE_TEXT,
        dataset_text,
        _questions_section(questions_all),
        _annotations_section(annotations_all),
        recent_q,
        _block(LABEL_RECENT_ANNOTATION, serialize_annotation(annotation_rec)),
        TASK_GENERATE_FOLLOWUP.format(count=count),
        FORMAT_QUESTIONS.format(count=count),
    )


def render_check_faithful(question_text: str, answer_text: str) -> str:
    """Validation stage 1: does the answer address the question."""
    if not question_text or not answer_text:
        raise ValueError("question and answer must be non-empty")
    return _join(
        ROLE_TEXT,
        _block(LABEL_QUESTION_UNDER_REVIEW, question_text),
        _block(LABEL_SUBMITTED_ANSWER, answer_text),
        TASK_CHECK_FAITHFUL,
        FORMAT_VERDICT,
    )


def render_check_contradiction(
    annotations: Sequence[Annotation], candidate_text: str, budget: int
) -> str:
    """Validation stage 2: does the candidate conflict with existing notes.

    Existing annotations are serialized most-recent-first and truncated to
    the token budget so the prompt degrades gracefully on long sessions.
    """
    newest_first = sorted(annotations, key=lambda a: a.sequence, reverse=True)
    base = _join(
        ROLE_TEXT,
        "HEADER_PLACEHOLDER",
        _block(LABEL_CANDIDATE, candidate_text),
        TASK_CHECK_CONTRADICTION,
        FORMAT_VERDICT,
    )
    remaining = budget - estimate_tokens(base)
    shown: list[str] = []
    used = 0
    for ann in newest_first:
        line = f"{len(shown) + 1}. {serialize_annotation(ann)}"
        cost = estimate_tokens(line + "\n")
        if used + cost > remaining:
            break
        shown.append(line)
        used += cost
    header = f"Existing annotations ({len(shown)} of {len(newest_first)}, most recent first):"
    section = "\n".join([header] + (shown if shown else ["(none)"]))
    return base.replace("HEADER_PLACEHOLDER", section, 1)


def render_rate_importance(question_text: str, dataset_text: str) -> str:
    return _join(
        ROLE_TEXT,
        dataset_text,
        _block(LABEL_IMPORTANCE_QUESTION, question_text),
        TASK_RATE_IMPORTANCE,
        FORMAT_RATING,
    )


def render_theme_summary(theme: Theme, qa_pairs: Sequence[tuple[str, str]]) -> str:
    """Thematic-overview prompt over a theme's answered question/answer pairs."""
    lines = [f"Answered questions in this theme ({len(qa_pairs)}):"]
    for i, (q, a) in enumerate(qa_pairs, 1):
        lines.append(f"{i}. Q: {q}")
        lines.append(f"   A: {a}")
    return _join(
        ROLE_TEXT,
        f"{LABEL_THEME} {theme.value}",
        "\n".join(lines),
        TASK_THEME_SUMMARY.format(theme=theme.value),
        FORMAT_FREETEXT,
    )


def render_report_overview(dataset_text: str, annotations: Sequence[Annotation]) -> str:
    return _join(
        ROLE_TEXT,
        dataset_text,
        _annotations_section(annotations),
        TASK_REPORT_OVERVIEW,
        FORMAT_FREETEXT,
    )


def repair_prompt(original: str, error: str) -> str:
    """Single-shot repair: re-ask with the parse error appended."""
    return (
        f"{original}\n\n"
        f"Your previous reply could not be parsed: {error}. "
        "Respond again with only the fenced json block in the requested format."
    )


# --- output parsing --------------------------------------------------------------

_FENCE_RE = re.compile(r"```(?:json)?\s*\n(.*?)```", re.S)


@dataclass(frozen=True)
class ParsedQuestion:
    text: str
    theme: Optional[Theme] = None


def _extract_json(output: str):
    """Pull the first parseable JSON value out of possibly chatty output."""
    candidates = [m.group(1) for m in _FENCE_RE.finditer(output)]
    candidates.append(output)
    for opener, closer in (("{", "}"), ("[", "]")):
        start = output.find(opener)
        end = output.rfind(closer)
        if start != -1 and end > start:
            candidates.append(output[start : end + 1])
    for candidate in candidates:
        try:
            return json.loads(candidate.strip())
        except json.JSONDecodeError:
            continue
    raise MalformedOutput("no parseable json block found")


def parse_questions(output: str, expected_count: int) -> list[ParsedQuestion]:
    """Parse a generated-questions reply into (text, optional theme) records.

    Tolerates commentary prose around the structured block. Raises
    :class:`MalformedOutput` when no valid list can be extracted, and
    :class:`CountMismatch` when the list length is wrong.
    """
    data = _extract_json(output)
    if isinstance(data, dict):
        data = data.get("questions")
    if not isinstance(data, list):
        raise MalformedOutput("expected a list of question objects")
    parsed: list[ParsedQuestion] = []
    for item in data:
        if isinstance(item, str):
            text, theme = item, None
        elif isinstance(item, dict):
            text = item.get("text")
            theme = item.get("theme")
        else:
            raise MalformedOutput(f"unexpected question entry: {item!r}")
        if not isinstance(text, str) or not text.strip():
            raise MalformedOutput("question text missing or empty")
        theme_value: Optional[Theme] = None
        if isinstance(theme, str):
            try:
                theme_value = Theme(theme)
            except ValueError:
                theme_value = None  # unknown labels are dropped, not fatal
        parsed.append(ParsedQuestion(text=text.strip(), theme=theme_value))
    if len(parsed) != expected_count:
        raise CountMismatch(expected_count, len(parsed))
    return parsed


def parse_verdict(output: str) -> tuple[bool, str]:
    """Parse a validation reply into (passed, feedback).

    A failing verdict with missing feedback is normalized to a generic
    message so rejections always explain themselves.
    """
    data = _extract_json(output)
    if not isinstance(data, dict):
        raise MalformedOutput("expected a verdict object")
    verdict = str(data.get("verdict", "")).strip().lower()
    feedback = data.get("feedback") or ""
    if verdict == "pass":
        return True, ""
    if verdict == "fail":
        return False, str(feedback).strip() or GENERIC_REJECTION_FEEDBACK
    raise MalformedOutput(f"unknown verdict {verdict!r}")


def parse_rating(output: str) -> int:
    """Parse an integer rating; the caller clamps it to [1, 5]."""
    stripped = output.strip()
    try:
        return int(stripped)
    except ValueError:
        pass
    match = re.search(r"-?\d+", stripped)
    if not match:
        raise MalformedOutput("no integer rating found")
    return int(match.group())

"""Question lifecycle: generation, scoring, prioritization, and the board.

The pool partitions questions by origin (generated backlog vs. predefined
bank vs. answered history); the board holds the up-to-10 questions currently
shown. A question's priority is the sum of its originality, recency and
importance components, each an integer in [1, 5].
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

from . import prompts
from .errors import NotDisplayed, ProviderError, UnknownQuestion
from .model import Annotation, Dataset, Question, Theme, THEMES
from .provider import CompletionRequest, Provider, complete_parsed, stable_hash

BOARD_CAPACITY = 10
BOOTSTRAP_QUESTION_COUNT = 30
FOLLOWUP_QUESTION_COUNT = 5
REPLENISH_THRESHOLD = 10
REPLENISH_COUNT = 10
REFILL_THRESHOLD = 4

IdFactory = Callable[[], str]


@dataclass
class QuestionPool:
    """All questions known to a session, partitioned by lifecycle."""

    generated_backlog: list[Question] = field(default_factory=list)
    predefined_bank: list[Question] = field(default_factory=list)
    answered_history: list[Question] = field(default_factory=list)
    removed: list[Question] = field(default_factory=list)
    rng_seed: int = 0

    def find(self, question_id: str) -> Optional[Question]:
        for collection in (
            self.generated_backlog,
            self.predefined_bank,
            self.answered_history,
            self.removed,
        ):
            for q in collection:
                if q.id == question_id:
                    return q
        return None

    def unanswered_bank_count(self, theme: Theme) -> int:
        return sum(1 for q in self.predefined_bank if q.theme == theme)

    def theme_counts(self) -> dict[Theme, int]:
        return {t: self.unanswered_bank_count(t) for t in THEMES}


@dataclass
class DisplayBoard:
    """The up-to-10 questions currently shown to the expert."""

    slots: list[Question] = field(default_factory=list)

    def find(self, question_id: str) -> Optional[Question]:
        for q in self.slots:
            if q.id == question_id:
                return q
        return None


def live_questions(pool: QuestionPool, board: DisplayBoard) -> list[Question]:
    """Every question still pooled or displayed (i.e. still decaying)."""
    return pool.generated_backlog + pool.predefined_bank + board.slots


# --- bank loading ------------------------------------------------------------


def load_bank_entries(path) -> list[tuple[Theme, str]]:
    """Read a predefined-question file: an ordered list of theme/text records."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return [(Theme(item["theme"]), item["text"]) for item in data]


def default_bank_entries() -> list[tuple[Theme, str]]:
    raw = resources.files("tacit.data").joinpath("default_bank.json").read_text("utf-8")
    return [(Theme(item["theme"]), item["text"]) for item in json.loads(raw)]


# --- scoring ------------------------------------------------------------------


def default_similarity(a: str, b: str) -> float:
    """Jaccard coefficient of lowercased, punctuation-stripped word sets."""
    words_a = set(re.findall(r"[a-z0-9]+", a.lower()))
    words_b = set(re.findall(r"[a-z0-9]+", b.lower()))
    if not words_a and not words_b:
        return 1.0
    union = words_a | words_b
    return len(words_a & words_b) / len(union)


def originality(
    question: Question,
    answered_history: Sequence[Question],
    similarity: Callable[[str, str], float] = default_similarity,
) -> int:
    """How distinct a question is from the questions already answered.

    With no history every question is maximally distinct (5). Otherwise the
    mean similarity s maps through clamp(round(5 - 4*s), 1, 5), so identical
    questions bottom out at 1.
    """
    if not answered_history:
        return 5
    s = sum(similarity(question.text, h.text) for h in answered_history) / len(answered_history)
    return max(1, min(5, round(5 - 4 * s)))


def score_importance(question_text: str, dataset_text: str, provider: Provider) -> tuple[int, bool]:
    """Ask the provider for a 1-5 importance rating; degrade to 3 on failure.

    Returns (value, degraded). Scored once at question creation and cached on
    the question; never re-evaluated.
    """
    request = CompletionRequest(
        tier="standard",
        prompt=prompts.render_rate_importance(question_text, dataset_text),
        purpose="importance",
    )
    try:
        raw = complete_parsed(provider, request, prompts.parse_rating)
    except ProviderError:
        return 3, True
    return max(1, min(5, raw)), False


def importance(question: Question, dataset_text: str, provider: Provider) -> int:
    """Score and cache a question's importance component."""
    value, degraded = score_importance(question.text, dataset_text, provider)
    question.importance = value
    question.importance_degraded = degraded
    return value


def total_score(question: Question) -> int:
    return question.originality + question.recency + question.importance


# --- selection ------------------------------------------------------------------


def select_generated(pool: QuestionPool, k: int, rng: random.Random) -> list[Question]:
    """The k highest-scoring backlog questions; ties shuffled by the rng."""
    if k <= 0:
        return []
    by_score: dict[int, list[Question]] = {}
    for q in pool.generated_backlog:
        by_score.setdefault(total_score(q), []).append(q)
    picked: list[Question] = []
    for score in sorted(by_score, reverse=True):
        group = list(by_score[score])
        rng.shuffle(group)
        picked.extend(group)
        if len(picked) >= k:
            break
    return picked[:k]


def select_predefined(
    bank: Sequence[Question],
    theme_progress: Mapping[Theme, int],
    k: int,
    rng: random.Random,
    exclude: Optional[set[str]] = None,
) -> list[Question]:
    """Pick k bank questions, always drawing from the theme with the most
    unanswered bank items; ties between themes and within a theme resolve
    through the rng. Counts update between picks.
    """
    missing = [t for t in THEMES if t not in theme_progress]
    if missing:
        raise ValueError(f"theme_progress must cover all themes; missing {missing}")
    exclude = exclude or set()
    available: dict[Theme, list[Question]] = {t: [] for t in THEMES}
    for q in bank:
        if q.id not in exclude and q.theme is not None:
            available[q.theme].append(q)
    remaining = {t: min(theme_progress[t], len(available[t])) for t in THEMES}

    picked: list[Question] = []
    while len(picked) < k:
        candidates = [t for t in THEMES if remaining[t] > 0 and available[t]]
        if not candidates:
            break
        top = max(remaining[t] for t in candidates)
        tied = [t for t in candidates if remaining[t] == top]
        theme = rng.choice(tied)
        question = rng.choice(available[theme])
        available[theme].remove(question)
        remaining[theme] -= 1
        picked.append(question)
    return picked


def refill_enabled(board: DisplayBoard) -> bool:
    """The refill control unlocks once at most four questions remain."""
    return len(board.slots) <= REFILL_THRESHOLD


@dataclass(frozen=True)
class FillPlan:
    predefined: tuple[Question, ...]
    generated: tuple[Question, ...]
    insufficient: bool

    @property
    def picked(self) -> tuple[Question, ...]:
        return self.predefined + self.generated


def plan_fill(
    board: DisplayBoard,
    pool: QuestionPool,
    theme_progress: Mapping[Theme, int],
    rng: random.Random,
) -> FillPlan:
    """Decide which questions fill the board's empty slots.

    With e empty slots, half round down come from the bank and half round up
    from the backlog; a shortfall on either side is covered by the other.
    ``insufficient`` is set only when both supplies run out below e.
    """
    empty = BOARD_CAPACITY - len(board.slots)
    if empty <= 0:
        return FillPlan((), (), False)
    want_predefined = empty // 2
    want_generated = empty - want_predefined

    predefined = select_predefined(pool.predefined_bank, theme_progress, want_predefined, rng)
    want_generated += want_predefined - len(predefined)
    generated = select_generated(pool, want_generated, rng)

    shortfall = want_generated - len(generated)
    if shortfall > 0:
        extra = select_predefined(
            pool.predefined_bank,
            pool.theme_counts(),
            shortfall,
            rng,
            exclude={q.id for q in predefined},
        )
        predefined = predefined + extra
    insufficient = len(predefined) + len(generated) < empty
    return FillPlan(tuple(predefined), tuple(generated), insufficient)


def display_question(pool: QuestionPool, board: DisplayBoard, question_id: str) -> Question:
    """Move a pooled question onto the board. Shared by ops and event replay."""
    question = pool.find(question_id)
    if question is None:
        raise UnknownQuestion(question_id)
    if question in pool.generated_backlog:
        pool.generated_backlog.remove(question)
    elif question in pool.predefined_bank:
        pool.predefined_bank.remove(question)
    else:
        raise NotDisplayed(question_id)
    question.advance_status("displayed")
    board.slots.append(question)
    if len(board.slots) > BOARD_CAPACITY:
        raise ValueError("board capacity exceeded")
    return question


def fill_board(
    board: DisplayBoard,
    pool: QuestionPool,
    theme_progress: Mapping[Theme, int],
    rng: random.Random,
) -> FillPlan:
    """Fill the board per the half/half policy and move picks to displayed."""
    plan = plan_fill(board, pool, theme_progress, rng)
    for question in plan.picked:
        display_question(pool, board, question.id)
    return plan


def remove_question(board: DisplayBoard, pool: QuestionPool, question_id: str) -> Question:
    """Remove a displayed question; it never re-enters any collection."""
    question = board.find(question_id)
    if question is None:
        if pool.find(question_id) is None:
            raise UnknownQuestion(question_id)
        raise NotDisplayed(question_id)
    question.advance_status("removed")
    board.slots.remove(question)
    pool.removed.append(question)
    return question


def mark_answered(board: DisplayBoard, pool: QuestionPool, question_id: str) -> Question:
    """Archive an answered question and refresh originality of live questions."""
    question = board.find(question_id)
    if question is None:
        if pool.find(question_id) is None:
            raise UnknownQuestion(question_id)
        raise NotDisplayed(question_id)
    question.advance_status("answered")
    board.slots.remove(question)
    pool.answered_history.append(question)
    for q in live_questions(pool, board):
        q.originality = originality(q, pool.answered_history)
    return question


def decay_recency(pool: QuestionPool, board: DisplayBoard, exempt_id: Optional[str] = None) -> None:
    """Decrement recency of every pooled and displayed question, floor 1."""
    for q in live_questions(pool, board):
        if q.id != exempt_id:
            q.recency = max(1, q.recency - 1)


# --- generation ------------------------------------------------------------------


@dataclass(frozen=True)
class GenerationContext:
    """Everything the follow-up prompt needs about the session so far."""

    dataset_text: str
    answered_questions: tuple[Question, ...]
    annotations: tuple[Annotation, ...]
    recent_annotation: Annotation
    recent_question: Optional[Question] = None


def _sequential_ids(prefix: str = "q") -> IdFactory:
    counter = iter(range(1, 10**9))
    return lambda: f"{prefix}-{next(counter):04d}"


def build_bank(entries: Sequence[tuple[Theme, str]], id_factory: IdFactory) -> list[Question]:
    """Materialize bank entries as pooled predefined questions.

    Predefined questions are never ranked by the score sum (the theme rule
    governs them), so they carry neutral placeholder components.
    """
    return [
        Question(id=id_factory(), text=text, origin="predefined", theme=theme)
        for theme, text in entries
    ]


def generate_questions(
    provider: Provider,
    prompt: str,
    count: int,
    dataset_text: str,
    tier: str,
    purpose: str,
    id_factory: IdFactory,
    answered_history: Sequence[Question],
    trigger_annotation_id: Optional[str] = None,
) -> list[Question]:
    """One generation call plus per-question importance scoring."""
    request = CompletionRequest(tier=tier, prompt=prompt, purpose=purpose)
    parsed = complete_parsed(provider, request, lambda out: prompts.parse_questions(out, count))
    questions = []
    for item in parsed:
        q = Question(
            id=id_factory(),
            text=item.text,
            origin="generated",
            theme=item.theme,
            trigger_annotation_id=trigger_annotation_id,
        )
        importance(q, dataset_text, provider)
        q.originality = originality(q, answered_history)
        questions.append(q)
    return questions


def bootstrap(
    dataset: Dataset,
    provider: Provider,
    bank_source: Sequence[tuple[Theme, str]],
    seed: int,
    id_factory: Optional[IdFactory] = None,
    dataset_budget: int = 4000,
) -> tuple[QuestionPool, DisplayBoard]:
    """Initialize a session's question state from a freshly ingested dataset.

    Generates the 30-question backlog through the high-reasoning tier, then
    fills the empty board 5 predefined + 5 generated (bank shortfall covered
    by extra generated questions).
    """
    if not bank_source:
        raise ValueError("bank_source must be non-empty")
    ids = id_factory or _sequential_ids()
    pool = QuestionPool(rng_seed=seed)
    pool.predefined_bank = build_bank(bank_source, ids)

    dataset_text = prompts.serialize_dataset(dataset, dataset_budget)
    pool.generated_backlog = generate_questions(
        provider,
        prompts.render_generate_initial(dataset_text),
        BOOTSTRAP_QUESTION_COUNT,
        dataset_text,
        tier="initial_generation",
        purpose="generation",
        id_factory=ids,
        answered_history=(),
    )

    board = DisplayBoard()
    rng = random.Random(stable_hash(seed, "bootstrap-fill"))
    fill_board(board, pool, pool.theme_counts(), rng)
    return pool, board


@dataclass(frozen=True)
class CommitOutcome:
    followups: tuple[Question, ...]
    replenished: tuple[Question, ...]
    provider_failed: bool


def on_annotation_committed(
    pool: QuestionPool,
    board: DisplayBoard,
    annotation: Annotation,
    ctx: GenerationContext,
    provider: Provider,
    id_factory: Optional[IdFactory] = None,
) -> CommitOutcome:
    """React to a committed annotation.

    Recency of every still-live question decays by one (floor 1) before
    exactly five follow-ups land in the backlog; if that leaves fewer than
    ten generated questions pooled, ten more are appended. Decay is local, so
    a provider failure leaves the decay in place and generation simply waits
    for the next commit.
    """
    ids = id_factory or _sequential_ids("fq")
    decay_recency(pool, board)

    def make(count: int, trigger: Optional[str]) -> list[Question]:
        prompt = prompts.render_generate_followup(
            ctx.dataset_text,
            ctx.answered_questions,
            ctx.annotations,
            ctx.recent_question,
            ctx.recent_annotation,
            count=count,
        )
        return generate_questions(
            provider,
            prompt,
            count,
            ctx.dataset_text,
            tier="standard",
            purpose="follow_up",
            id_factory=ids,
            answered_history=ctx.answered_questions,
            trigger_annotation_id=trigger,
        )

    try:
        followups = make(FOLLOWUP_QUESTION_COUNT, annotation.id)
        pool.generated_backlog.extend(followups)
    except ProviderError:
        return CommitOutcome((), (), provider_failed=True)

    replenished: list[Question] = []
    if len(pool.generated_backlog) < REPLENISH_THRESHOLD:
        try:
            replenished = make(REPLENISH_COUNT, None)
            pool.generated_backlog.extend(replenished)
        except ProviderError:
            return CommitOutcome(tuple(followups), (), provider_failed=True)
    return CommitOutcome(tuple(followups), tuple(replenished), provider_failed=False)

"""Question engine: scoring, selection, fill policy, lifecycle transitions."""

from __future__ import annotations

import random
from datetime import datetime, timezone

import pytest
from hypothesis import given, strategies as st

from tacit.errors import NotDisplayed, ProviderError, UnknownQuestion
from tacit.model import Annotation, Question, Selection, THEMES, Theme
from tacit.provider import MockProvider
from tacit.questions import (
    BOARD_CAPACITY,
    DisplayBoard,
    GenerationContext,
    QuestionPool,
    bootstrap,
    default_bank_entries,
    default_similarity,
    fill_board,
    mark_answered,
    on_annotation_committed,
    originality,
    refill_enabled,
    remove_question,
    select_generated,
    select_predefined,
    total_score,
)

T0 = datetime(2001, 1, 1, tzinfo=timezone.utc)


def gen_question(i, orig=3, rec=3, imp=3, text=None):
    return Question(
        id=f"g-{i:03d}",
        text=text or f"generated question {i}",
        origin="generated",
        originality=orig,
        recency=rec,
        importance=imp,
    )


def bank_question(i, theme):
    return Question(id=f"p-{i:03d}", text=f"bank question {i}", origin="predefined", theme=theme)


def make_pool(scores=(), bank_by_theme=None):
    pool = QuestionPool(rng_seed=1)
    for i, (o, r, m) in enumerate(scores):
        pool.generated_backlog.append(gen_question(i, o, r, m))
    counter = 0
    for theme, count in (bank_by_theme or {}).items():
        for _ in range(count):
            pool.predefined_bank.append(bank_question(counter, theme))
            counter += 1
    return pool


class TestSimilarity:
    def test_identity(self):
        assert default_similarity("what is this", "what is this") == 1.0

    def test_disjoint(self):
        assert default_similarity("alpha beta", "gamma delta") == 0.0

    def test_hand_derived_third(self):
        # {a,b} vs {b,c}: intersection {b}=1, union {a,b,c}=3 -> 1/3
        assert default_similarity("a b", "b c") == pytest.approx(1 / 3)

    def test_punctuation_and_case_stripped(self):
        assert default_similarity("What, is THIS?", "what is this") == 1.0

    def test_empty_vs_empty(self):
        assert default_similarity("", "") == 1.0

    def test_one_empty(self):
        assert default_similarity("", "words here") == 0.0

    def test_symmetry(self):
        rng = random.Random(3)
        words = "alpha beta gamma delta epsilon zeta".split()
        for _ in range(20):
            a = " ".join(rng.sample(words, rng.randint(1, 5)))
            b = " ".join(rng.sample(words, rng.randint(1, 5)))
            assert default_similarity(a, b) == default_similarity(b, a)


class TestOriginality:
    def test_empty_history_is_five(self):
        assert originality(gen_question(0), []) == 5

    def test_identical_history_is_one(self):
        q = gen_question(0, text="what is the provenance")
        history = [gen_question(1, text="what is the provenance")]
        assert originality(q, history) == 1

    def test_half_similarity_is_three(self):
        q = gen_question(0)
        history = [gen_question(1)]
        assert originality(q, history, similarity=lambda a, b: 0.5) == 3

    def test_monotone_non_increasing_in_similarity(self):
        q = gen_question(0)
        history = [gen_question(1)]
        values = [
            originality(q, history, similarity=lambda a, b, s=s: s)
            for s in [i / 20 for i in range(21)]
        ]
        assert all(earlier >= later for earlier, later in zip(values, values[1:]))
        assert values[0] == 5
        assert values[-1] == 1

    def test_mean_over_history(self):
        q = gen_question(0)
        history = [gen_question(1), gen_question(2)]
        sims = iter([1.0, 0.0])  # mean 0.5 -> 3
        assert originality(q, history, similarity=lambda a, b: next(sims)) == 3


class TestImportance:
    class LoudRater:
        def __init__(self, reply):
            self.reply = reply

        def complete(self, request):
            return self.reply

    def test_out_of_range_rating_clamped(self):
        from tacit.questions import score_importance

        assert score_importance("q", "Dataset: d", self.LoudRater("7")) == (5, False)
        assert score_importance("q", "Dataset: d", self.LoudRater("0")) == (1, False)

    def test_provider_failure_defaults_to_three_degraded(self):
        from tacit.questions import importance

        q = gen_question(0)
        value = importance(q, "Dataset: d", FailingProvider())
        assert value == 3
        assert q.importance == 3
        assert q.importance_degraded is True

    def test_cached_on_question(self):
        from tacit.questions import importance

        q = gen_question(0)
        importance(q, "Dataset: d", MockProvider(3))
        assert 1 <= q.importance <= 5
        assert q.importance_degraded is False


class TestTotalScore:
    @pytest.mark.parametrize("triple,expected", [((5, 5, 5), 15), ((1, 1, 1), 3), ((3, 5, 4), 12)])
    def test_examples(self, triple, expected):
        o, r, m = triple
        assert total_score(gen_question(0, o, r, m)) == expected

    @given(
        o=st.integers(1, 5), r=st.integers(1, 5), m=st.integers(1, 5)
    )
    def test_sum_and_bounds(self, o, r, m):
        score = total_score(gen_question(0, o, r, m))
        assert score == o + r + m
        assert 3 <= score <= 15


def oracle_top_scores(pool, k):
    """Score multiset expected of any valid top-k pick (independent sort)."""
    ranked = sorted((total_score(q) for q in pool.generated_backlog), reverse=True)
    return ranked[:k]


class TestSelectGenerated:
    def test_tie_example(self):
        pool = make_pool(scores=[(5, 4, 3), (3, 3, 3), (4, 4, 4), (2, 3, 2)])
        # totals: 12, 9, 12, 7 -> the two 12s must win
        picked = select_generated(pool, 2, random.Random(0))
        assert {q.id for q in picked} == {"g-000", "g-002"}

    def test_zero_k(self):
        pool = make_pool(scores=[(3, 3, 3)])
        assert select_generated(pool, 0, random.Random(0)) == []

    def test_exhaustion_returns_all(self):
        pool = make_pool(scores=[(3, 3, 3), (4, 4, 4)])
        assert len(select_generated(pool, 10, random.Random(0))) == 2

    def test_threshold_property_against_oracle(self):
        rng = random.Random(99)
        for trial in range(60):
            n = rng.randint(1, 50)
            pool = make_pool(
                scores=[
                    (rng.randint(1, 5), rng.randint(1, 5), rng.randint(1, 5)) for _ in range(n)
                ]
            )
            k = rng.randint(0, n)
            picked = select_generated(pool, k, random.Random(trial))
            assert sorted((total_score(q) for q in picked), reverse=True) == oracle_top_scores(pool, k)
            left_out = [q for q in pool.generated_backlog if q not in picked]
            if picked and left_out:
                # min selected score dominates every non-tied leftover
                boundary = min(total_score(q) for q in picked)
                strictly_below = [q for q in left_out if total_score(q) != boundary]
                for q in strictly_below:
                    assert total_score(q) < boundary

    def test_deterministic_under_seed(self):
        pool = make_pool(scores=[(3, 3, 3)] * 20)
        a = [q.id for q in select_generated(pool, 5, random.Random(7))]
        b = [q.id for q in select_generated(pool, 5, random.Random(7))]
        assert a == b

    def test_does_not_mutate_pool(self):
        pool = make_pool(scores=[(3, 3, 3)] * 4)
        select_generated(pool, 2, random.Random(0))
        assert len(pool.generated_backlog) == 4


class TestSelectPredefined:
    def counts(self, pool):
        return pool.theme_counts()

    def test_most_unanswered_theme_wins(self):
        pool = make_pool(bank_by_theme={Theme.MOTIVATION: 3, Theme.USES: 1})
        picked = select_predefined(pool.predefined_bank, self.counts(pool), 1, random.Random(0))
        assert picked[0].theme is Theme.MOTIVATION

    def test_theme_tie_is_seed_determined(self):
        pool = make_pool(bank_by_theme={Theme.MOTIVATION: 2, Theme.USES: 2})
        seen = set()
        for seed in range(10):
            picked = select_predefined(pool.predefined_bank, self.counts(pool), 1, random.Random(seed))
            seen.add(picked[0].theme)
        assert seen == {Theme.MOTIVATION, Theme.USES}
        one = select_predefined(pool.predefined_bank, self.counts(pool), 1, random.Random(4))
        two = select_predefined(pool.predefined_bank, self.counts(pool), 1, random.Random(4))
        assert one[0].id == two[0].id

    def test_empty_bank(self):
        pool = make_pool()
        assert select_predefined([], self.counts(pool), 3, random.Random(0)) == []

    def test_counts_update_between_picks(self):
        pool = make_pool(bank_by_theme={Theme.MOTIVATION: 2, Theme.USES: 1})
        picked = select_predefined(pool.predefined_bank, self.counts(pool), 3, random.Random(1))
        # after one motivation pick the counts tie 1-1; all three eventually drain
        assert len(picked) == 3
        assert picked[0].theme is Theme.MOTIVATION
        assert {q.theme for q in picked} == {Theme.MOTIVATION, Theme.USES}

    def test_every_pick_from_maximal_theme(self):
        rng = random.Random(5)
        pool = make_pool(
            bank_by_theme={t: rng.randint(0, 4) for t in THEMES}
        )
        remaining = {t: pool.unanswered_bank_count(t) for t in THEMES}
        picked = select_predefined(pool.predefined_bank, dict(remaining), 8, random.Random(2))
        for q in picked:  # oracle: recount before each pick
            top = max(remaining.values())
            assert remaining[q.theme] == top
            remaining[q.theme] -= 1

    def test_requires_all_themes_in_progress(self):
        pool = make_pool(bank_by_theme={Theme.MOTIVATION: 1})
        with pytest.raises(ValueError):
            select_predefined(pool.predefined_bank, {Theme.MOTIVATION: 1}, 1, random.Random(0))


class TestRefillEnabled:
    @pytest.mark.parametrize("size,expected", [(0, True), (3, True), (4, True), (5, False), (10, False)])
    def test_threshold(self, size, expected):
        board = DisplayBoard(slots=[gen_question(i) for i in range(size)])
        for q in board.slots:
            q.status = "displayed"
        assert refill_enabled(board) is expected


def displayed_board(n):
    board = DisplayBoard()
    for i in range(n):
        q = gen_question(100 + i)
        q.status = "displayed"
        board.slots.append(q)
    return board


def ample_pool():
    return make_pool(
        scores=[(3, 3, 3)] * 30,
        bank_by_theme={t: 7 for t in THEMES},
    )


class TestFillBoard:
    @pytest.mark.parametrize(
        "displayed,predef,gen",
        [(0, 5, 5), (1, 4, 5), (2, 4, 4), (3, 3, 4), (4, 3, 3)],
    )
    def test_fill_parity(self, displayed, predef, gen):
        pool = ample_pool()
        board = displayed_board(displayed)
        plan = fill_board(board, pool, pool.theme_counts(), random.Random(0))
        assert (len(plan.predefined), len(plan.generated)) == (predef, gen)
        assert len(board.slots) == BOARD_CAPACITY
        assert not plan.insufficient

    def test_bank_exhausted_all_generated(self):
        pool = make_pool(scores=[(3, 3, 3)] * 30)
        board = displayed_board(3)
        plan = fill_board(board, pool, pool.theme_counts(), random.Random(0))
        assert len(plan.predefined) == 0
        assert len(plan.generated) == 7
        assert not plan.insufficient

    def test_partial_bank_shortfall_covered_by_generated(self):
        pool = make_pool(scores=[(3, 3, 3)] * 30, bank_by_theme={Theme.MOTIVATION: 3})
        board = DisplayBoard()
        plan = fill_board(board, pool, pool.theme_counts(), random.Random(0))
        assert (len(plan.predefined), len(plan.generated)) == (3, 7)
        assert len(board.slots) == 10

    def test_generated_shortfall_covered_by_bank(self):
        pool = make_pool(scores=[(3, 3, 3)] * 2, bank_by_theme={t: 7 for t in THEMES})
        board = DisplayBoard()
        plan = fill_board(board, pool, pool.theme_counts(), random.Random(0))
        assert len(plan.generated) == 2
        assert len(plan.predefined) == 8
        assert not plan.insufficient

    def test_both_exhausted_flags_insufficient(self):
        pool = make_pool(scores=[(3, 3, 3)] * 2, bank_by_theme={Theme.USES: 1})
        board = DisplayBoard()
        plan = fill_board(board, pool, pool.theme_counts(), random.Random(0))
        assert plan.insufficient
        assert len(board.slots) == 3

    def test_moves_to_displayed_status(self):
        pool = ample_pool()
        board = DisplayBoard()
        fill_board(board, pool, pool.theme_counts(), random.Random(0))
        assert all(q.status == "displayed" for q in board.slots)
        assert len(pool.generated_backlog) == 25

    def test_full_board_noop(self):
        pool = ample_pool()
        board = displayed_board(10)
        plan = fill_board(board, pool, pool.theme_counts(), random.Random(0))
        assert plan.picked == ()


class TestRemoveAndAnswer:
    def build(self):
        pool = ample_pool()
        board = DisplayBoard()
        fill_board(board, pool, pool.theme_counts(), random.Random(0))
        return pool, board

    def test_remove_shrinks_board(self):
        pool, board = self.build()
        target = board.slots[0].id
        removed = remove_question(board, pool, target)
        assert removed.status == "removed"
        assert len(board.slots) == 9
        assert pool.find(target) is removed

    def test_remove_twice_not_displayed(self):
        pool, board = self.build()
        target = board.slots[0].id
        remove_question(board, pool, target)
        with pytest.raises(NotDisplayed):
            remove_question(board, pool, target)

    def test_remove_unknown(self):
        pool, board = self.build()
        with pytest.raises(UnknownQuestion):
            remove_question(board, pool, "nope")

    def test_removed_never_selected_again(self):
        pool, board = self.build()
        target = board.slots[0].id
        remove_question(board, pool, target)
        # drain the board then refill; the removed id must never come back
        for q in list(board.slots):
            remove_question(board, pool, q.id)
        plan = fill_board(board, pool, pool.theme_counts(), random.Random(1))
        assert target not in {q.id for q in plan.picked}
        assert target not in {q.id for q in pool.generated_backlog}
        assert target not in {q.id for q in pool.predefined_bank}

    def test_mark_answered_moves_to_history(self):
        pool, board = self.build()
        target = board.slots[0].id
        answered = mark_answered(board, pool, target)
        assert answered.status == "answered"
        assert len(board.slots) == 9
        assert pool.answered_history == [answered]

    def test_answered_excluded_from_future_fills(self):
        pool, board = self.build()
        target = board.slots[0].id
        mark_answered(board, pool, target)
        for q in list(board.slots):
            remove_question(board, pool, q.id)
        plan = fill_board(board, pool, pool.theme_counts(), random.Random(1))
        assert target not in {q.id for q in plan.picked}

    def test_answer_refreshes_originality(self):
        pool, board = self.build()
        twin_text = board.slots[0].text
        pool.generated_backlog.append(gen_question(999, 5, 5, 5, text=twin_text))
        mark_answered(board, pool, board.slots[0].id)
        twin = pool.find("g-999")
        assert twin.originality == 1  # identical to the answered question

    def test_no_dual_state_after_random_ops(self):
        pool, board = self.build()
        rng = random.Random(6)
        for _ in range(40):
            op = rng.choice(["remove", "answer", "fill"])
            if op in ("remove", "answer") and board.slots:
                target = rng.choice(board.slots).id
                (remove_question if op == "remove" else mark_answered)(board, pool, target)
            elif op == "fill" and refill_enabled(board):
                fill_board(board, pool, pool.theme_counts(), rng)
            ids = [q.id for q in pool.generated_backlog + pool.predefined_bank
                   + pool.answered_history + pool.removed + board.slots]
            assert len(ids) == len(set(ids))
            assert len(board.slots) <= BOARD_CAPACITY


def make_context(dataset_text="Dataset: d\nColumns (1):\n- a [numeric, nulls=0]"):
    ann = Annotation(
        id="a-0001", selection=Selection.whole_dataset(), text="context note",
        origin="direct", sequence=1, created_at=T0,
    )
    return ann, GenerationContext(
        dataset_text=dataset_text,
        answered_questions=(),
        annotations=(ann,),
        recent_annotation=ann,
        recent_question=None,
    )


class FailingProvider:
    def complete(self, request):
        raise ProviderError("down")


class TestOnAnnotationCommitted:
    def test_followups_no_replenish(self):
        pool = make_pool(scores=[(3, 3, 3)] * 12)
        board = DisplayBoard()
        ann, ctx = make_context()
        outcome = on_annotation_committed(pool, board, ann, ctx, MockProvider(3))
        assert len(outcome.followups) == 5
        assert outcome.replenished == ()
        assert len(pool.generated_backlog) == 17

    def test_low_backlog_replenishes_ten(self):
        pool = make_pool(scores=[(3, 3, 3)] * 2)
        board = DisplayBoard()
        ann, ctx = make_context()
        outcome = on_annotation_committed(pool, board, ann, ctx, MockProvider(3))
        assert len(outcome.followups) == 5
        assert len(outcome.replenished) == 10
        assert len(pool.generated_backlog) == 17

    def test_recency_floor(self):
        pool = make_pool(scores=[(3, 1, 3), (3, 5, 3)])
        board = DisplayBoard()
        ann, ctx = make_context()
        on_annotation_committed(pool, board, ann, ctx, MockProvider(3))
        old = [q for q in pool.generated_backlog if q.id.startswith("g-")]
        assert old[0].recency == 1  # stays at the floor
        assert old[1].recency == 4

    def test_new_questions_start_at_recency_five(self):
        pool = make_pool(scores=[(3, 3, 3)] * 12)
        board = DisplayBoard()
        ann, ctx = make_context()
        outcome = on_annotation_committed(pool, board, ann, ctx, MockProvider(3))
        assert all(q.recency == 5 for q in outcome.followups)

    def test_followups_carry_trigger(self):
        pool = make_pool(scores=[(3, 3, 3)] * 12)
        board = DisplayBoard()
        ann, ctx = make_context()
        outcome = on_annotation_committed(pool, board, ann, ctx, MockProvider(3))
        assert all(q.trigger_annotation_id == ann.id for q in outcome.followups)

    def test_displayed_questions_also_decay(self):
        pool = make_pool(scores=[(3, 3, 3)] * 12)
        board = displayed_board(2)
        before = [q.recency for q in board.slots]
        ann, ctx = make_context()
        on_annotation_committed(pool, board, ann, ctx, MockProvider(3))
        assert [q.recency for q in board.slots] == [r - 1 for r in before]

    def test_provider_failure_still_decays(self):
        pool = make_pool(scores=[(3, 4, 3)] * 3)
        board = DisplayBoard()
        ann, ctx = make_context()
        outcome = on_annotation_committed(pool, board, ann, ctx, FailingProvider())
        assert outcome.provider_failed
        assert all(q.recency == 3 for q in pool.generated_backlog)
        assert len(pool.generated_backlog) == 3


class TestBootstrap:
    def test_counts_with_full_bank(self, sales_dataset):
        pool, board = bootstrap(sales_dataset, MockProvider(7), default_bank_entries(), seed=7)
        assert len(pool.generated_backlog) == 25  # 30 generated - 5 displayed
        assert len(board.slots) == 10
        origins = sorted(q.origin for q in board.slots)
        assert origins.count("predefined") == 5
        assert origins.count("generated") == 5
        assert len(pool.predefined_bank) == 49 - 5

    def test_small_bank_shortfall(self, sales_dataset):
        entries = default_bank_entries()[:3]
        pool, board = bootstrap(sales_dataset, MockProvider(7), entries, seed=7)
        origins = [q.origin for q in board.slots]
        assert origins.count("predefined") == 3
        assert origins.count("generated") == 7

    def test_atomicity_on_unparseable_output(self, sales_dataset):
        class Gibberish:
            def complete(self, request):
                return "not json at all"

        from tacit.errors import MalformedProviderOutput

        with pytest.raises(MalformedProviderOutput):
            bootstrap(sales_dataset, Gibberish(), default_bank_entries(), seed=7)

    def test_fresh_questions_have_recency_five_and_importance_cached(self, sales_dataset):
        provider = MockProvider(7)
        pool, board = bootstrap(sales_dataset, provider, default_bank_entries(), seed=7)
        for q in pool.generated_backlog:
            assert q.recency == 5
            assert 1 <= q.importance <= 5
            assert not q.importance_degraded
        # importance scored exactly once per generated question
        importance_calls = [p for p, _ in provider.call_log if p == "importance"]
        assert len(importance_calls) == 30

    def test_tier_routing(self, sales_dataset):
        provider = MockProvider(7)
        bootstrap(sales_dataset, provider, default_bank_entries(), seed=7)
        assert provider.call_log[0][0] == "generation"

    def test_deterministic_under_seed(self, sales_dataset):
        a_pool, a_board = bootstrap(sales_dataset, MockProvider(7), default_bank_entries(), seed=7)
        b_pool, b_board = bootstrap(sales_dataset, MockProvider(7), default_bank_entries(), seed=7)
        assert [q.text for q in a_board.slots] == [q.text for q in b_board.slots]
        assert [q.to_dict() for q in a_pool.generated_backlog] == [
            q.to_dict() for q in b_pool.generated_backlog
        ]

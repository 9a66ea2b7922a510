"""Two-stage answer validation: faithfulness, then non-contradiction.

Stage 2 never runs when stage 1 fails, and a provider failure is a third
outcome (a retryable system error), never mapped to a rejection: a rejection
tells the expert to rewrite, a system error must not.
"""

from __future__ import annotations

from typing import Sequence

from . import prompts
from .model import Annotation, Question, ValidationResult
from .provider import CompletionRequest, Provider, complete_parsed

STAGE_FAITHFULNESS = "faithfulness"
STAGE_CONTRADICTION = "contradiction"


def validate_answer(
    question: Question,
    answer_text: str,
    annotations: Sequence[Annotation],
    provider: Provider,
    budget: int = 8000,
) -> ValidationResult:
    """Run a submitted answer through both checks.

    Accepted only when the answer faithfully addresses the question and does
    not conflict with any existing annotation; a rejection names the failing
    stage and always carries feedback.
    """
    if not answer_text or not answer_text.strip():
        return ValidationResult(
            verdict="rejected",
            feedback="Please write an answer before submitting.",
            stage=STAGE_FAITHFULNESS,
        )

    faithful_request = CompletionRequest(
        tier="standard",
        prompt=prompts.render_check_faithful(question.text, answer_text),
        purpose="faithfulness",
    )
    passed, feedback = complete_parsed(provider, faithful_request, prompts.parse_verdict)
    if not passed:
        return ValidationResult(verdict="rejected", feedback=feedback, stage=STAGE_FAITHFULNESS)

    contradiction_request = CompletionRequest(
        tier="standard",
        prompt=prompts.render_check_contradiction(annotations, answer_text, budget),
        purpose="contradiction",
    )
    passed, feedback = complete_parsed(provider, contradiction_request, prompts.parse_verdict)
    if not passed:
        return ValidationResult(verdict="rejected", feedback=feedback, stage=STAGE_CONTRADICTION)

    return ValidationResult(verdict="accepted")

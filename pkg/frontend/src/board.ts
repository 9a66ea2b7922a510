/**
 * Question board: up to ten questions, inline answer box with rejection
 * feedback and resubmission, per-question delete, and the refill control
 * gated by the service's refill_enabled flag.
 */

import { ControlState, VisibleQuestion, refillButtonEnabled } from "./gating.js";
import { clear, el } from "./dom.js";

export interface BoardHandlers {
  onAnswer(questionId: string, text: string): void;
  onRemove(questionId: string): void;
  onRefill(): void;
}

export class BoardView {
  readonly root: HTMLElement;
  private list: HTMLElement;
  private refillButton: HTMLButtonElement;
  private openAnswerFor: string | null = null;
  private feedback = new Map<string, string>();
  private drafts = new Map<string, string>();

  constructor(private handlers: BoardHandlers) {
    this.root = el("div", "board-panel panel");
    this.root.appendChild(el("h2", "", "Questions"));
    this.list = el("div", "question-list");
    this.root.appendChild(this.list);
    this.refillButton = el("button", "refill-button", "generate new questions");
    this.refillButton.addEventListener("click", () => this.handlers.onRefill());
    this.root.appendChild(this.refillButton);
  }

  showFeedback(questionId: string, feedback: string): void {
    this.feedback.set(questionId, feedback);
  }

  clearFeedback(questionId: string): void {
    this.feedback.delete(questionId);
    this.drafts.delete(questionId);
    this.openAnswerFor = null;
  }

  render(questions: VisibleQuestion[], controls: ControlState): void {
    clear(this.list);
    for (const { question, fading } of questions) {
      const item = el("div", fading ? "question-item fading" : "question-item");
      const label = el("div", "question-text", question.text);
      label.title = `${question.origin}${question.theme ? " / " + question.theme : ""} | score ${question.total_score}`;
      item.appendChild(label);

      if (fading) {
        item.appendChild(el("div", "accepted-note", "answer accepted"));
        this.list.appendChild(item);
        continue;
      }

      const controlsRow = el("div", "question-controls");
      const answerButton = el("button", "", "answer");
      answerButton.disabled = controls.mutationPending;
      answerButton.addEventListener("click", () => {
        this.openAnswerFor = this.openAnswerFor === question.id ? null : question.id;
        this.render(questions, controls);
      });
      const removeButton = el("button", "danger", "remove");
      removeButton.disabled = controls.mutationPending;
      removeButton.addEventListener("click", () => this.handlers.onRemove(question.id));
      controlsRow.appendChild(answerButton);
      controlsRow.appendChild(removeButton);
      item.appendChild(controlsRow);

      if (this.openAnswerFor === question.id) {
        const editor = el("div", "answer-editor");
        const textarea = el("textarea");
        textarea.placeholder = "write your answer";
        textarea.value = this.drafts.get(question.id) ?? "";
        textarea.addEventListener("input", () => this.drafts.set(question.id, textarea.value));
        const submit = el("button", "primary", "submit answer");
        submit.disabled = controls.mutationPending;
        submit.addEventListener("click", () => this.handlers.onAnswer(question.id, textarea.value));
        editor.appendChild(textarea);
        const rejection = this.feedback.get(question.id);
        if (rejection) {
          editor.appendChild(el("div", "rejection", rejection));
        }
        editor.appendChild(submit);
        item.appendChild(editor);
      }
      this.list.appendChild(item);
    }
    this.refillButton.disabled = !refillButtonEnabled(controls);
  }
}

/**
 * Annotation list plus the annotation entry box below the grid. Hovering a
 * data-specific annotation highlights exactly the instance cells the service
 * stored for it.
 */

import { clear, el } from "./dom.js";
import { instancesToCellSet } from "./selection.js";
import { AnnotationRecord } from "./types.js";

export interface AnnotationHandlers {
  onHover(cells: Set<string>): void;
  onHoverEnd(): void;
}

export class AnnotationList {
  readonly root: HTMLElement;
  private list: HTMLElement;

  constructor(private handlers: AnnotationHandlers) {
    this.root = el("div", "annotation-panel panel");
    this.root.appendChild(el("h2", "", "Annotations"));
    this.list = el("div", "annotation-list");
    this.root.appendChild(this.list);
  }

  render(records: AnnotationRecord[]): void {
    clear(this.list);
    for (const record of records) {
      const item = el("div", "annotation-item");
      const scope = record.scope === "general" ? "general" : this.describeSelection(record);
      item.appendChild(el("span", "annotation-scope", `[${scope}]`));
      item.appendChild(el("span", "annotation-text", " " + record.text));
      if (record.origin === "answer" && record.question_text) {
        item.appendChild(el("div", "annotation-question", `answer to: ${record.question_text}`));
      }
      if (record.scope === "data_specific") {
        item.addEventListener("mouseenter", () =>
          this.handlers.onHover(instancesToCellSet(record.instances))
        );
        item.addEventListener("mouseleave", () => this.handlers.onHoverEnd());
      }
      this.list.appendChild(item);
    }
  }

  private describeSelection(record: AnnotationRecord): string {
    const sel = record.selection;
    switch (sel.kind) {
      case "columns":
        return `columns ${sel.column_indices?.join(",")}`;
      case "rows":
        return `rows ${sel.row_indices?.join(",")}`;
      case "cells":
        return `${sel.row_indices?.length ?? 0} cell(s)`;
      case "rectangle":
        return `rect ${sel.rect?.join(",")}`;
      default:
        return "general";
    }
  }
}

export interface EntryHandlers {
  onCommit(text: string): void;
}

/** The textbox below the grid: general notes, or data-specific when a
 * selection is active (the current scope is always shown). */
export class AnnotationEntry {
  readonly root: HTMLElement;
  private scopeLabel: HTMLElement;
  private textarea: HTMLTextAreaElement;
  private button: HTMLButtonElement;

  constructor(handlers: EntryHandlers) {
    this.root = el("div", "annotation-entry");
    this.scopeLabel = el("span", "entry-scope", "annotating: whole dataset");
    this.textarea = el("textarea");
    this.textarea.placeholder = "add an annotation about the current selection (or the whole dataset)";
    this.button = el("button", "primary", "add annotation");
    this.button.addEventListener("click", () => {
      const text = this.textarea.value.trim();
      if (text) handlers.onCommit(text);
    });
    this.root.appendChild(this.scopeLabel);
    this.root.appendChild(this.textarea);
    this.root.appendChild(this.button);
  }

  setScopeLabel(text: string): void {
    this.scopeLabel.textContent = `annotating: ${text}`;
  }

  setBusy(busy: boolean): void {
    this.button.disabled = busy;
  }

  clearText(): void {
    this.textarea.value = "";
  }
}

/**
 * Wiring: one session per page, board polling, linked views, and the three
 * annotation pathways (general note, data-specific note, question answer).
 */

import { ApiClient, ApiError } from "./api.js";
import { AnnotationEntry, AnnotationList } from "./annotations.js";
import { BoardView } from "./board.js";
import { BrushQuery, ChartsArea, ScatterBrush } from "./charts.js";
import {
  FADE_MS,
  applyBoard,
  beginMutation,
  endMutation,
  expireFades,
  initialControls,
  scheduleFade,
  visibleQuestions,
} from "./gating.js";
import { GridView } from "./grid.js";
import { describe, toPayload, WHOLE_DATASET } from "./selection.js";
import { intersectIds } from "./crossfilter.js";
import { el } from "./dom.js";
import { ThemesPanel } from "./themes.js";
import { BoardPayload } from "./types.js";

const POLL_MS = 2000;

class App {
  private api = new ApiClient("");
  private sessionId: string | null = null;
  private controls = initialControls();
  private board: BoardPayload = { questions: [], refill_enabled: false, board_version: -1 };
  private etag: string | null = null;
  private xColumn: number | null = null;
  private yColumn: number | null = null;

  private grid = new GridView({
    onSelectionChange: (selection) => this.entry.setScopeLabel(describe(selection)),
    onColumnAction: (action) => this.columnAction(action.kind, action.column),
  });
  private charts = new ChartsArea(
    (query) => this.histogramBrush(query),
    (brush) => this.scatterBrush(brush)
  );
  private boardView = new BoardView({
    onAnswer: (qid, text) => this.answer(qid, text),
    onRemove: (qid) => this.remove(qid),
    onRefill: () => this.refill(),
  });
  private annotationList = new AnnotationList({
    onHover: (cells) => this.grid.setHighlight(cells, new Set()),
    onHoverEnd: () => this.grid.setHighlight(new Set(), new Set()),
  });
  private entry = new AnnotationEntry({ onCommit: (text) => this.annotate(text) });
  private themes = new ThemesPanel();

  private status = el("div", "status-line");

  mount(): void {
    const layout = document.getElementById("app")!;
    const topBar = el("div", "top-bar");
    const uploadInput = el("input") as HTMLInputElement;
    uploadInput.type = "file";
    uploadInput.accept = ".csv,text/csv";
    const uploadButton = el("button", "primary", "upload dataset");
    uploadButton.addEventListener("click", () => {
      const file = uploadInput.files?.[0];
      if (file) this.createSession(file);
    });
    const exportButton = el("button", "", "export annotations");
    exportButton.addEventListener("click", () => {
      if (this.sessionId) window.location.href = this.api.exportUrl(this.sessionId);
    });
    const reportButton = el("button", "", "dataset report");
    reportButton.addEventListener("click", () => this.showReport());
    topBar.append(uploadInput, uploadButton, exportButton, reportButton, this.status);
    layout.appendChild(topBar);

    const main = el("div", "main-row");
    main.appendChild(this.boardView.root);
    const center = el("div", "center-column");
    center.appendChild(this.grid.root);
    center.appendChild(this.charts.root);
    center.appendChild(this.entry.root);
    main.appendChild(center);
    const right = el("div", "right-column");
    right.appendChild(this.annotationList.root);
    right.appendChild(this.themes.root);
    main.appendChild(right);
    layout.appendChild(main);

    window.setInterval(() => this.poll(), POLL_MS);
    window.setInterval(() => {
      this.controls = expireFades(this.controls, Date.now());
      this.renderBoard();
    }, 300);
  }

  private setStatus(text: string, isError = false): void {
    this.status.textContent = text;
    this.status.classList.toggle("error", isError);
  }

  private fail(error: unknown): void {
    if (error instanceof ApiError) {
      const retry = error.retryable ? " (retryable - try again)" : "";
      this.setStatus(`${error.code}: ${error.message}${retry}`, true);
    } else {
      this.setStatus(String(error), true);
    }
  }

  private async createSession(file: File): Promise<void> {
    try {
      this.setStatus("uploading...");
      this.sessionId = await this.api.createSession(file, file.name);
      this.etag = null;
      const dataset = await this.api.dataset(this.sessionId);
      this.grid.setDataset(dataset);
      await this.refreshBoard();
      await this.refreshAnnotations();
      await this.refreshThemes();
      this.setStatus(`session ready: ${dataset.name} (${dataset.row_count} rows)`);
    } catch (error) {
      this.fail(error);
    }
  }

  private async poll(): Promise<void> {
    if (!this.sessionId || document.hidden || this.controls.mutationPending) return;
    try {
      const result = await this.api.board(this.sessionId, this.etag);
      if (result.payload) {
        this.board = result.payload;
        this.etag = result.etag;
        this.controls = applyBoard(this.controls, result.payload);
        this.renderBoard();
      }
    } catch {
      // polling failures are transient; the next tick retries
    }
  }

  private renderBoard(): void {
    this.boardView.render(visibleQuestions(this.board, this.controls, Date.now()), this.controls);
  }

  private async refreshBoard(): Promise<void> {
    if (!this.sessionId) return;
    const result = await this.api.board(this.sessionId);
    if (result.payload) {
      this.board = result.payload;
      this.etag = result.etag;
      this.controls = applyBoard(this.controls, result.payload);
    }
    this.renderBoard();
  }

  private async refreshAnnotations(): Promise<void> {
    if (!this.sessionId) return;
    this.annotationList.render(await this.api.annotations(this.sessionId));
  }

  private async refreshThemes(): Promise<void> {
    if (!this.sessionId) return;
    this.themes.render(await this.api.themes(this.sessionId));
  }

  private async mutate(run: () => Promise<void>): Promise<void> {
    if (!this.sessionId || this.controls.mutationPending) return;
    this.controls = beginMutation(this.controls);
    this.entry.setBusy(true);
    this.renderBoard();
    try {
      await run();
    } catch (error) {
      this.fail(error);
    } finally {
      this.controls = endMutation(this.controls);
      this.entry.setBusy(false);
      this.renderBoard();
    }
  }

  private async answer(questionId: string, text: string): Promise<void> {
    await this.mutate(async () => {
      const verdict = await this.api.answer(this.sessionId!, questionId, text);
      if (verdict.verdict === "accepted") {
        const question = this.board.questions.find((q) => q.id === questionId);
        this.boardView.clearFeedback(questionId);
        if (question) this.controls = scheduleFade(this.controls, question, Date.now());
        await this.refreshBoard();
        await this.refreshAnnotations();
        await this.refreshThemes();
        this.setStatus("answer accepted");
        window.setTimeout(() => this.renderBoard(), FADE_MS + 50);
      } else {
        this.boardView.showFeedback(questionId, verdict.feedback);
        this.setStatus(`rejected at ${verdict.stage}: revise and resubmit`);
      }
    });
  }

  private async remove(questionId: string): Promise<void> {
    await this.mutate(async () => {
      const board = await this.api.removeQuestion(this.sessionId!, questionId);
      this.board = board;
      this.controls = applyBoard(this.controls, board);
    });
  }

  private async refill(): Promise<void> {
    await this.mutate(async () => {
      const board = await this.api.refill(this.sessionId!);
      this.board = board;
      this.controls = applyBoard(this.controls, board);
      if (board.insufficient) this.setStatus("question supply exhausted; board partially filled");
    });
  }

  private async annotate(text: string): Promise<void> {
    await this.mutate(async () => {
      const selection = toPayload(this.grid.currentSelection());
      await this.api.annotate(this.sessionId!, selection, text);
      this.entry.clearText();
      this.grid.clearSelection();
      this.entry.setScopeLabel(describe(WHOLE_DATASET));
      await this.refreshAnnotations();
      await this.refreshBoard();
      this.setStatus("annotation saved");
    });
  }

  private async columnAction(kind: string, column: number): Promise<void> {
    if (!this.sessionId) return;
    try {
      if (kind === "histogram") {
        const payload = await this.api.histogram(this.sessionId, column);
        this.charts.showHistogram(`histogram: column ${column}`, payload);
      } else if (kind === "set-x") {
        this.xColumn = column;
        await this.maybeScatter();
      } else if (kind === "set-y") {
        this.yColumn = column;
        await this.maybeScatter();
      }
    } catch (error) {
      this.fail(error);
    }
  }

  private async maybeScatter(): Promise<void> {
    if (this.sessionId && this.xColumn !== null && this.yColumn !== null) {
      const payload = await this.api.scatter(this.sessionId, this.xColumn, this.yColumn);
      this.charts.showScatter(`scatter: ${this.xColumn} vs ${this.yColumn}`, payload);
    }
  }

  private async histogramBrush(query: BrushQuery | null): Promise<void> {
    if (!this.sessionId) return;
    if (!query) {
      this.grid.setHighlight(new Set(), new Set());
      this.charts.scatter.setHighlight(new Set());
      return;
    }
    try {
      const ids = await this.api.rowsInRange(this.sessionId, query.column, query.low, query.high);
      const rows = new Set(ids);
      this.grid.setHighlight(new Set(), rows);
      this.charts.scatter.setHighlight(rows);
    } catch (error) {
      this.fail(error);
    }
  }

  private async scatterBrush(brush: ScatterBrush | null): Promise<void> {
    if (!this.sessionId || this.xColumn === null || this.yColumn === null) return;
    if (!brush) {
      this.grid.setHighlight(new Set(), new Set());
      this.charts.scatter.setHighlight(new Set());
      return;
    }
    try {
      const xIds = await this.api.rowsInRange(this.sessionId, this.xColumn, brush.x0, brush.x1);
      const yIds = await this.api.rowsInRange(this.sessionId, this.yColumn, brush.y0, brush.y1);
      const rows = intersectIds(xIds, yIds);
      this.grid.setHighlight(new Set(), rows);
      this.charts.scatter.setHighlight(rows);
    } catch (error) {
      this.fail(error);
    }
  }

  private async showReport(): Promise<void> {
    if (!this.sessionId) return;
    try {
      const report = await this.api.report(this.sessionId);
      const overlay = el("div", "report-overlay");
      const box = el("div", "report-box");
      const close = el("button", "", "close");
      close.addEventListener("click", () => overlay.remove());
      const pre = el("pre");
      pre.textContent = report;
      box.append(close, pre);
      overlay.appendChild(box);
      document.body.appendChild(overlay);
    } catch (error) {
      this.fail(error);
    }
  }
}

new App().mount();

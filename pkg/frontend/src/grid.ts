/**
 * Spreadsheet view: scrollable grid with selection by row header, column
 * header, individual cells (ctrl+click) and rectangular rubberband drag.
 * Sorting reorders the view only; selections map back to data indices.
 */

import { clear, el } from "./dom.js";
import { GridSelection, WHOLE_DATASET, cellSet } from "./selection.js";
import { SortDirection, identityPermutation, sortPermutation } from "./sorting.js";
import { DatasetPayload } from "./types.js";

const MAX_RENDER_ROWS = 2000;

export interface ColumnAction {
  kind: "sort" | "histogram" | "set-x" | "set-y";
  column: number;
  direction?: SortDirection;
}

export interface GridHandlers {
  onSelectionChange(selection: GridSelection): void;
  onColumnAction(action: ColumnAction): void;
}

export class GridView {
  readonly root: HTMLElement;
  private dataset: DatasetPayload | null = null;
  private permutation: number[] = [];
  private selection: GridSelection = WHOLE_DATASET;
  private highlight = new Set<string>(); // hover/cross-filter marks, "r,c"
  private highlightRows = new Set<number>();
  private dragStart: { viewRow: number; col: number } | null = null;
  private menu: HTMLElement | null = null;

  constructor(private handlers: GridHandlers) {
    this.root = el("div", "grid-view");
  }

  setDataset(dataset: DatasetPayload): void {
    this.dataset = dataset;
    this.permutation = identityPermutation(dataset.row_count);
    this.selection = WHOLE_DATASET;
    this.render();
  }

  currentSelection(): GridSelection {
    return this.selection;
  }

  clearSelection(): void {
    this.setSelection(WHOLE_DATASET);
  }

  /** Cross-filter / hover marks; pass empty sets to clear. */
  setHighlight(cells: Set<string>, rows: Set<number>): void {
    this.highlight = cells;
    this.highlightRows = rows;
    this.paintMarks();
  }

  sortBy(column: number, direction: SortDirection): void {
    if (!this.dataset) return;
    const values = this.dataset.rows.map((row) => row[column]);
    const numeric = this.dataset.columns[column].inferred_type === "numeric";
    this.permutation = sortPermutation(values, numeric, direction);
    this.render();
  }

  private setSelection(selection: GridSelection): void {
    this.selection = selection;
    this.handlers.onSelectionChange(selection);
    this.paintMarks();
  }

  private closeMenu(): void {
    this.menu?.remove();
    this.menu = null;
  }

  private openMenu(column: number, anchor: HTMLElement): void {
    this.closeMenu();
    const menu = el("div", "column-menu");
    const entries: [string, ColumnAction][] = [
      ["sort asc", { kind: "sort", column, direction: "asc" }],
      ["sort desc", { kind: "sort", column, direction: "desc" }],
      ["histogram", { kind: "histogram", column }],
      ["set as X", { kind: "set-x", column }],
      ["set as Y", { kind: "set-y", column }],
    ];
    for (const [label, action] of entries) {
      const item = el("button", "menu-item", label);
      item.addEventListener("click", () => {
        this.closeMenu();
        if (action.kind === "sort") this.sortBy(action.column, action.direction!);
        this.handlers.onColumnAction(action);
      });
      menu.appendChild(item);
    }
    anchor.appendChild(menu);
    this.menu = menu;
  }

  private finishRubberband(endViewRow: number, endCol: number): void {
    if (!this.dragStart || !this.dataset) return;
    const { viewRow, col } = this.dragStart;
    this.dragStart = null;
    if (viewRow === endViewRow && col === endCol) {
      return; // plain click handled separately
    }
    const viewLo = Math.min(viewRow, endViewRow);
    const viewHi = Math.max(viewRow, endViewRow);
    const sorted = this.permutation.some((dataRow, i) => dataRow !== i);
    if (!sorted) {
      this.setSelection({ kind: "rectangle", r0: viewLo, r1: viewHi, c0: col, c1: endCol });
      return;
    }
    // under a sort permutation a view-rectangle is an arbitrary set of rows
    const cells: [number, number][] = [];
    const cLo = Math.min(col, endCol);
    const cHi = Math.max(col, endCol);
    for (let v = viewLo; v <= viewHi; v++) {
      for (let c = cLo; c <= cHi; c++) cells.push([this.permutation[v], c]);
    }
    this.setSelection({ kind: "cells", cells });
  }

  private toggleIn(list: number[], value: number): number[] {
    return list.includes(value) ? list.filter((v) => v !== value) : [...list, value];
  }

  private render(): void {
    if (!this.dataset) return;
    clear(this.root);
    const ds = this.dataset;
    const table = el("table", "grid-table");

    const head = el("thead");
    const headRow = el("tr");
    headRow.appendChild(el("th", "corner-cell", "#"));
    ds.columns.forEach((column, c) => {
      const th = el("th", "col-header");
      th.textContent = `${column.name} (${column.inferred_type})`;
      th.title = "click to select column; right-click for sort/chart actions";
      th.addEventListener("click", () => {
        const current = this.selection.kind === "columns" ? this.selection.columns : [];
        const next = this.toggleIn(current, c);
        this.setSelection(next.length ? { kind: "columns", columns: next } : WHOLE_DATASET);
      });
      th.addEventListener("contextmenu", (event) => {
        event.preventDefault();
        this.openMenu(c, th);
      });
      headRow.appendChild(th);
    });
    head.appendChild(headRow);
    table.appendChild(head);

    const body = el("tbody");
    const shown = Math.min(ds.row_count, MAX_RENDER_ROWS);
    for (let viewRow = 0; viewRow < shown; viewRow++) {
      const dataRow = this.permutation[viewRow];
      const tr = el("tr");
      tr.dataset.row = String(dataRow);
      const rowHeader = el("th", "row-header", String(dataRow));
      rowHeader.addEventListener("click", () => {
        const current = this.selection.kind === "rows" ? this.selection.rows : [];
        const next = this.toggleIn(current, dataRow);
        this.setSelection(next.length ? { kind: "rows", rows: next } : WHOLE_DATASET);
      });
      tr.appendChild(rowHeader);
      ds.rows[dataRow].forEach((raw, c) => {
        const td = el("td", "grid-cell", raw);
        td.dataset.cell = `${dataRow},${c}`;
        td.addEventListener("mousedown", (event) => {
          if (event.button !== 0) return;
          this.dragStart = { viewRow, col: c };
        });
        td.addEventListener("mouseup", (event) => {
          if (this.dragStart) {
            this.finishRubberband(viewRow, c);
          }
          if (event.ctrlKey || event.metaKey) {
            const current = this.selection.kind === "cells" ? this.selection.cells : [];
            this.setSelection({ kind: "cells", cells: [...current, [dataRow, c]] });
          } else if (event.detail === 1 && this.selection.kind === "whole_dataset") {
            this.setSelection({ kind: "cells", cells: [[dataRow, c]] });
          }
        });
        tr.appendChild(td);
      });
      body.appendChild(tr);
    }
    table.appendChild(body);
    this.root.appendChild(table);
    if (ds.row_count > shown) {
      this.root.appendChild(
        el("div", "grid-note", `showing first ${shown} of ${ds.row_count} rows`)
      );
    }
    document.addEventListener("click", (event) => {
      if (this.menu && !this.menu.contains(event.target as Node)) this.closeMenu();
    });
    this.paintMarks();
  }

  private paintMarks(): void {
    if (!this.dataset) return;
    const selected = cellSet(this.selection, this.dataset.row_count, this.dataset.column_count);
    this.root.querySelectorAll<HTMLTableCellElement>("td.grid-cell").forEach((td) => {
      const key = td.dataset.cell!;
      td.classList.toggle("selected", selected.has(key));
      td.classList.toggle("highlight", this.highlight.has(key));
    });
    this.root.querySelectorAll<HTMLTableRowElement>("tbody tr").forEach((tr) => {
      tr.classList.toggle("row-highlight", this.highlightRows.has(Number(tr.dataset.row)));
    });
  }
}

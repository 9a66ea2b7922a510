/**
 * Grid selection model.
 *
 * Selections always reference ingest-order data indices, never sorted view
 * positions; sorting is a presentation permutation applied elsewhere. The
 * payload builders normalize user gestures (e.g. a rubberband dragged from
 * any corner) into the wire format the service validates.
 */

import { SelectionPayload } from "./types.js";

export type GridSelection =
  | { kind: "whole_dataset" }
  | { kind: "columns"; columns: number[] }
  | { kind: "rows"; rows: number[] }
  | { kind: "cells"; cells: [number, number][] }
  | { kind: "rectangle"; r0: number; r1: number; c0: number; c1: number };

export const WHOLE_DATASET: GridSelection = { kind: "whole_dataset" };

function dedupe(values: number[]): number[] {
  return [...new Set(values)];
}

/** Normalize a grid gesture into the service's selection payload. */
export function toPayload(sel: GridSelection): SelectionPayload {
  switch (sel.kind) {
    case "whole_dataset":
      return { kind: "whole_dataset" };
    case "columns":
      return { kind: "columns", column_indices: dedupe(sel.columns) };
    case "rows":
      return { kind: "rows", row_indices: dedupe(sel.rows) };
    case "cells": {
      const seen = new Set<string>();
      const rows: number[] = [];
      const cols: number[] = [];
      for (const [r, c] of sel.cells) {
        const key = `${r},${c}`;
        if (!seen.has(key)) {
          seen.add(key);
          rows.push(r);
          cols.push(c);
        }
      }
      return { kind: "cells", row_indices: rows, column_indices: cols };
    }
    case "rectangle": {
      const rect: [number, number, number, number] = [
        Math.min(sel.r0, sel.r1),
        Math.max(sel.r0, sel.r1),
        Math.min(sel.c0, sel.c1),
        Math.max(sel.c0, sel.c1),
      ];
      return { kind: "rectangle", rect };
    }
  }
}

const cellKey = (r: number, c: number) => `${r},${c}`;

/**
 * The cell set a selection covers, as "r,c" keys, for local highlighting
 * while the user drags. whole_dataset maps to the empty set (the sheet gets
 * a global style instead of per-cell marks).
 */
export function cellSet(sel: GridSelection, rowCount: number, colCount: number): Set<string> {
  const out = new Set<string>();
  switch (sel.kind) {
    case "whole_dataset":
      break;
    case "columns":
      for (let r = 0; r < rowCount; r++) for (const c of sel.columns) out.add(cellKey(r, c));
      break;
    case "rows":
      for (const r of sel.rows) for (let c = 0; c < colCount; c++) out.add(cellKey(r, c));
      break;
    case "cells":
      for (const [r, c] of sel.cells) out.add(cellKey(r, c));
      break;
    case "rectangle": {
      const [rs, re, cs, ce] = [
        Math.min(sel.r0, sel.r1),
        Math.max(sel.r0, sel.r1),
        Math.min(sel.c0, sel.c1),
        Math.max(sel.c0, sel.c1),
      ];
      for (let r = rs; r <= re; r++) for (let c = cs; c <= ce; c++) out.add(cellKey(r, c));
      break;
    }
  }
  return out;
}

/** Hover-highlight set from the instances the service stored for an annotation. */
export function instancesToCellSet(instances: [number, number][]): Set<string> {
  return new Set(instances.map(([r, c]) => cellKey(r, c)));
}

export function describe(sel: GridSelection): string {
  switch (sel.kind) {
    case "whole_dataset":
      return "whole dataset";
    case "columns":
      return `columns ${dedupe(sel.columns).join(",")}`;
    case "rows":
      return `rows ${dedupe(sel.rows).join(",")}`;
    case "cells":
      return `${toPayload(sel).row_indices!.length} cell(s)`;
    case "rectangle": {
      const p = toPayload(sel).rect!;
      return `rows ${p[0]}-${p[1]} x cols ${p[2]}-${p[3]}`;
    }
  }
}

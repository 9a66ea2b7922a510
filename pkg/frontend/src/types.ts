/** Service payload shapes, mirrored from the HTTP API. */

export type SelectionKind = "whole_dataset" | "columns" | "rows" | "cells" | "rectangle";

export interface SelectionPayload {
  kind: SelectionKind;
  column_indices?: number[];
  row_indices?: number[];
  rect?: [number, number, number, number];
}

export interface ColumnInfo {
  name: string;
  inferred_type: "numeric" | "categorical" | "datetime" | "text";
  null_count: number;
}

export interface DatasetPayload {
  name: string;
  row_count: number;
  column_count: number;
  columns: ColumnInfo[];
  rows: string[][];
}

export interface BoardQuestion {
  id: string;
  text: string;
  origin: "predefined" | "generated";
  theme: string | null;
  originality: number;
  recency: number;
  importance: number;
  total_score: number;
}

export interface BoardPayload {
  questions: BoardQuestion[];
  refill_enabled: boolean;
  board_version: number;
  insufficient?: boolean;
}

export interface AnnotationRecord {
  id: string;
  sequence: number;
  scope: "general" | "data_specific";
  selection: SelectionPayload;
  text: string;
  origin: "direct" | "answer";
  question_id?: string | null;
  question_text?: string | null;
  created_at: string;
  instances: [number, number][];
}

export interface VerdictPayload {
  verdict: "accepted" | "rejected";
  feedback: string;
  stage: "faithfulness" | "contradiction" | null;
  annotation?: unknown;
}

export interface HistogramPayload {
  column_index: number;
  bin_count: number;
  bin_edges: number[];
  counts: number[];
  matching_row_ids: number[][];
}

export interface ScatterPayload {
  points: [number, number, number][]; // row_id, x, y
}

export interface ThemeEntry {
  theme: string;
  answered: number;
  unanswered_bank: number;
  summary: string | null;
  stale: boolean;
}

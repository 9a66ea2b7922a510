/** Typed client for the session service. All state lives server-side. */

import {
  AnnotationRecord,
  BoardPayload,
  DatasetPayload,
  HistogramPayload,
  ScatterPayload,
  SelectionPayload,
  ThemeEntry,
  VerdictPayload,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    public retryable: boolean,
    detail: string
  ) {
    super(`${code}: ${detail}`);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface BoardFetch {
  payload: BoardPayload | null; // null when 304 Not Modified
  etag: string | null;
}

export class ApiClient {
  constructor(
    private readonly base: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init)
  ) {}

  private async parse<T>(response: Response): Promise<T> {
    if (response.ok) {
      return (await response.json()) as T;
    }
    let code = `HTTP ${response.status}`;
    let detail = response.statusText;
    let retryable = false;
    try {
      const body = await response.json();
      code = body.error ?? code;
      detail = body.detail ?? detail;
      retryable = Boolean(body.retryable);
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, code, retryable, detail);
  }

  async createSession(file: Blob, filename: string): Promise<string> {
    const form = new FormData();
    form.append("file", file, filename);
    const response = await this.fetchFn(`${this.base}/sessions`, { method: "POST", body: form });
    const body = await this.parse<{ session_id: string }>(response);
    return body.session_id;
  }

  async board(sessionId: string, etag: string | null = null): Promise<BoardFetch> {
    const headers: Record<string, string> = {};
    if (etag !== null) headers["If-None-Match"] = etag;
    const response = await this.fetchFn(`${this.base}/sessions/${sessionId}/board`, { headers });
    if (response.status === 304) {
      return { payload: null, etag };
    }
    const payload = await this.parse<BoardPayload>(response);
    return { payload, etag: response.headers.get("ETag") };
  }

  async refill(sessionId: string): Promise<BoardPayload> {
    const response = await this.fetchFn(`${this.base}/sessions/${sessionId}/board/refill`, {
      method: "POST",
    });
    return this.parse<BoardPayload>(response);
  }

  async removeQuestion(sessionId: string, questionId: string): Promise<BoardPayload> {
    const response = await this.fetchFn(
      `${this.base}/sessions/${sessionId}/questions/${questionId}`,
      { method: "DELETE" }
    );
    return this.parse<BoardPayload>(response);
  }

  async answer(sessionId: string, questionId: string, text: string): Promise<VerdictPayload> {
    const response = await this.fetchFn(
      `${this.base}/sessions/${sessionId}/questions/${questionId}/answer`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ text }),
      }
    );
    return this.parse<VerdictPayload>(response);
  }

  async annotate(
    sessionId: string,
    selection: SelectionPayload,
    text: string
  ): Promise<AnnotationRecord> {
    const response = await this.fetchFn(`${this.base}/sessions/${sessionId}/annotations`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ selection, text }),
    });
    return this.parse<AnnotationRecord>(response);
  }

  async annotations(sessionId: string): Promise<AnnotationRecord[]> {
    const response = await this.fetchFn(`${this.base}/sessions/${sessionId}/annotations`);
    const body = await this.parse<{ annotations: AnnotationRecord[] }>(response);
    return body.annotations;
  }

  async dataset(sessionId: string): Promise<DatasetPayload> {
    const response = await this.fetchFn(`${this.base}/sessions/${sessionId}/dataset`);
    return this.parse<DatasetPayload>(response);
  }

  async histogram(sessionId: string, column: number, bins?: number): Promise<HistogramPayload> {
    const query = bins ? `?bins=${bins}` : "";
    const response = await this.fetchFn(
      `${this.base}/sessions/${sessionId}/columns/${column}/histogram${query}`
    );
    return this.parse<HistogramPayload>(response);
  }

  async scatter(sessionId: string, x: number, y: number): Promise<ScatterPayload> {
    const response = await this.fetchFn(
      `${this.base}/sessions/${sessionId}/scatter?x=${x}&y=${y}`
    );
    return this.parse<ScatterPayload>(response);
  }

  async rowsInRange(
    sessionId: string,
    column: number,
    low: number,
    high: number
  ): Promise<number[]> {
    const response = await this.fetchFn(
      `${this.base}/sessions/${sessionId}/rows-in-range?column=${column}&low=${low}&high=${high}`
    );
    const body = await this.parse<{ row_ids: number[] }>(response);
    return body.row_ids;
  }

  async themes(sessionId: string): Promise<ThemeEntry[]> {
    const response = await this.fetchFn(`${this.base}/sessions/${sessionId}/themes`);
    const body = await this.parse<{ themes: ThemeEntry[] }>(response);
    return body.themes;
  }

  async report(sessionId: string): Promise<string> {
    const response = await this.fetchFn(`${this.base}/sessions/${sessionId}/report`, {
      method: "POST",
    });
    const body = await this.parse<{ report: string }>(response);
    return body.report;
  }

  exportUrl(sessionId: string): string {
    return `${this.base}/sessions/${sessionId}/export`;
  }
}

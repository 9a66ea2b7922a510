/**
 * Histogram and scatterplot panels with brush-based cross-filtering.
 * Brushes resolve to service row-id queries; charts never classify rows
 * themselves.
 */

import { binRange, pixelsToBins } from "./crossfilter.js";
import { clear, el } from "./dom.js";
import { HistogramPayload, ScatterPayload } from "./types.js";

const WIDTH = 320;
const HEIGHT = 180;
const PAD = 28;

export interface BrushQuery {
  column: number;
  low: number;
  high: number;
}

export class HistogramPanel {
  readonly root: HTMLElement;
  private canvas: HTMLCanvasElement;
  private payload: HistogramPayload | null = null;
  private brushPixels: [number, number] | null = null;

  constructor(private onBrush: (query: BrushQuery | null) => void) {
    this.root = el("div", "chart-panel");
    this.root.appendChild(el("div", "chart-title", "histogram"));
    this.canvas = el("canvas");
    this.canvas.width = WIDTH;
    this.canvas.height = HEIGHT;
    this.root.appendChild(this.canvas);
    this.wireBrush();
  }

  show(title: string, payload: HistogramPayload): void {
    this.payload = payload;
    this.brushPixels = null;
    (this.root.querySelector(".chart-title") as HTMLElement).textContent = title;
    this.draw();
  }

  private plotWidth(): number {
    return WIDTH - 2 * PAD;
  }

  private wireBrush(): void {
    let startX: number | null = null;
    this.canvas.addEventListener("mousedown", (event) => {
      startX = event.offsetX - PAD;
    });
    this.canvas.addEventListener("mouseup", (event) => {
      if (startX === null || !this.payload) return;
      const endX = event.offsetX - PAD;
      if (Math.abs(endX - startX) < 3) {
        this.brushPixels = null;
        this.onBrush(null);
      } else {
        this.brushPixels = [startX, endX];
        const [first, last] = pixelsToBins(this.payload, startX, endX, this.plotWidth());
        const range = binRange(this.payload, first, last);
        this.onBrush({ column: this.payload.column_index, low: range.low, high: range.high });
      }
      startX = null;
      this.draw();
    });
  }

  private draw(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx || !this.payload) return;
    ctx.clearRect(0, 0, WIDTH, HEIGHT);
    const { counts } = this.payload;
    const maxCount = Math.max(1, ...counts);
    const barWidth = this.plotWidth() / counts.length;
    counts.forEach((count, i) => {
      const h = ((HEIGHT - 2 * PAD) * count) / maxCount;
      ctx.fillStyle = "#4878a8";
      ctx.fillRect(PAD + i * barWidth, HEIGHT - PAD - h, barWidth - 1, h);
    });
    if (this.brushPixels) {
      const [a, b] = this.brushPixels;
      ctx.fillStyle = "rgba(220, 170, 60, 0.25)";
      ctx.fillRect(PAD + Math.min(a, b), PAD / 2, Math.abs(b - a), HEIGHT - 1.5 * PAD);
    }
    ctx.strokeStyle = "#777";
    ctx.strokeRect(PAD, PAD / 2, this.plotWidth(), HEIGHT - 1.5 * PAD);
  }
}

export interface ScatterBrush {
  x0: number;
  x1: number;
  y0: number;
  y1: number;
}

export class ScatterPanel {
  readonly root: HTMLElement;
  private canvas: HTMLCanvasElement;
  private payload: ScatterPayload | null = null;
  private highlighted = new Set<number>();
  private extent: { xMin: number; xMax: number; yMin: number; yMax: number } | null = null;

  constructor(private onBrush: (brush: ScatterBrush | null) => void) {
    this.root = el("div", "chart-panel");
    this.root.appendChild(el("div", "chart-title", "scatterplot"));
    this.canvas = el("canvas");
    this.canvas.width = WIDTH;
    this.canvas.height = HEIGHT;
    this.root.appendChild(this.canvas);
    this.wireBrush();
  }

  show(title: string, payload: ScatterPayload): void {
    this.payload = payload;
    const xs = payload.points.map((p) => p[1]);
    const ys = payload.points.map((p) => p[2]);
    this.extent = xs.length
      ? { xMin: Math.min(...xs), xMax: Math.max(...xs), yMin: Math.min(...ys), yMax: Math.max(...ys) }
      : null;
    (this.root.querySelector(".chart-title") as HTMLElement).textContent = title;
    this.draw();
  }

  setHighlight(ids: Set<number>): void {
    this.highlighted = ids;
    this.draw();
  }

  private toValue(xPix: number, yPix: number): [number, number] {
    const e = this.extent!;
    const fx = (xPix - PAD) / (WIDTH - 2 * PAD);
    const fy = 1 - (yPix - PAD / 2) / (HEIGHT - 1.5 * PAD);
    return [e.xMin + fx * (e.xMax - e.xMin || 1), e.yMin + fy * (e.yMax - e.yMin || 1)];
  }

  private wireBrush(): void {
    let start: [number, number] | null = null;
    this.canvas.addEventListener("mousedown", (event) => {
      start = [event.offsetX, event.offsetY];
    });
    this.canvas.addEventListener("mouseup", (event) => {
      if (!start || !this.payload || !this.extent) return;
      const end: [number, number] = [event.offsetX, event.offsetY];
      if (Math.hypot(end[0] - start[0], end[1] - start[1]) < 4) {
        this.onBrush(null);
      } else {
        const [vx0, vy0] = this.toValue(start[0], start[1]);
        const [vx1, vy1] = this.toValue(end[0], end[1]);
        this.onBrush({
          x0: Math.min(vx0, vx1),
          x1: Math.max(vx0, vx1),
          y0: Math.min(vy0, vy1),
          y1: Math.max(vy0, vy1),
        });
      }
      start = null;
    });
  }

  private draw(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx || !this.payload) return;
    ctx.clearRect(0, 0, WIDTH, HEIGHT);
    if (!this.extent) return;
    const e = this.extent;
    for (const [rowId, x, y] of this.payload.points) {
      const fx = (x - e.xMin) / (e.xMax - e.xMin || 1);
      const fy = (y - e.yMin) / (e.yMax - e.yMin || 1);
      const px = PAD + fx * (WIDTH - 2 * PAD);
      const py = HEIGHT - PAD - fy * (HEIGHT - 1.5 * PAD);
      ctx.fillStyle = this.highlighted.has(rowId) ? "#d08030" : "#a85048";
      ctx.beginPath();
      ctx.arc(px, py, this.highlighted.has(rowId) ? 4 : 2.5, 0, Math.PI * 2);
      ctx.fill();
    }
    ctx.strokeStyle = "#777";
    ctx.strokeRect(PAD, PAD / 2, WIDTH - 2 * PAD, HEIGHT - 1.5 * PAD);
  }
}

export class ChartsArea {
  readonly root: HTMLElement;
  histogram: HistogramPanel;
  scatter: ScatterPanel;

  constructor(
    onHistogramBrush: (query: BrushQuery | null) => void,
    onScatterBrush: (brush: ScatterBrush | null) => void
  ) {
    this.root = el("div", "charts-area");
    this.histogram = new HistogramPanel(onHistogramBrush);
    this.scatter = new ScatterPanel(onScatterBrush);
  }

  showHistogram(title: string, payload: HistogramPayload): void {
    if (!this.histogram.root.parentElement) this.root.appendChild(this.histogram.root);
    this.histogram.show(title, payload);
  }

  showScatter(title: string, payload: ScatterPayload): void {
    if (!this.scatter.root.parentElement) this.root.appendChild(this.scatter.root);
    this.scatter.show(title, payload);
  }

  clearAll(): void {
    clear(this.root);
  }
}

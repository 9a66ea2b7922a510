/**
 * Linked brushing between histogram, scatterplot and grid.
 *
 * A brush maps to a numeric range; the service's rows-in-range endpoint is
 * the single authority for which rows match, and the returned id set is what
 * every view highlights.
 */

import { HistogramPayload } from "./types.js";

/** Largest double strictly below x (for half-open upper bin bounds). */
export function nextDown(x: number): number {
  if (!Number.isFinite(x)) return x;
  if (x === 0) return -Number.MIN_VALUE;
  const f64 = new Float64Array(1);
  const u64 = new BigUint64Array(f64.buffer);
  f64[0] = x;
  u64[0] += x > 0 ? -1n : 1n;
  return f64[0];
}

export interface BrushRange {
  low: number;
  high: number;
}

/**
 * The inclusive value range covered by brushing bins [first..last].
 *
 * Interior bins are half-open, so the upper bound steps just below the next
 * edge; the final bin is closed and uses the last edge itself. The service
 * treats both bounds inclusively.
 */
export function binRange(hist: HistogramPayload, first: number, last: number): BrushRange {
  if (first < 0 || last >= hist.bin_count || first > last) {
    throw new RangeError(`bin brush [${first}, ${last}] outside 0..${hist.bin_count - 1}`);
  }
  const low = hist.bin_edges[first];
  const high =
    last === hist.bin_count - 1 ? hist.bin_edges[last + 1] : nextDown(hist.bin_edges[last + 1]);
  return { low, high };
}

/** Map a pixel-space brush to the bin interval it touches. */
export function pixelsToBins(
  hist: HistogramPayload,
  x0: number,
  x1: number,
  plotWidth: number
): [number, number] {
  const lo = Math.min(x0, x1);
  const hi = Math.max(x0, x1);
  const binWidth = plotWidth / hist.bin_count;
  const first = Math.max(0, Math.min(hist.bin_count - 1, Math.floor(lo / binWidth)));
  const last = Math.max(0, Math.min(hist.bin_count - 1, Math.floor(hi / binWidth)));
  return [first, last];
}

/** Intersection of per-axis service responses, for scatterplot box brushes. */
export function intersectIds(a: number[], b: number[]): Set<number> {
  const bSet = new Set(b);
  return new Set(a.filter((id) => bSet.has(id)));
}

export function highlightSet(ids: number[]): Set<number> {
  return new Set(ids);
}

/**
 * Column sorting as a pure presentation permutation.
 *
 * The grid displays rows in permuted order while every selection and
 * annotation keeps referencing ingest-order indices, so annotations survive
 * re-sorting unchanged.
 */

export type SortDirection = "asc" | "desc";

export interface SortState {
  column: number;
  direction: SortDirection;
}

/**
 * view-to-data permutation: element i is the data row shown at view row i.
 * Numeric columns compare parsed values; nulls sort last either way; the
 * sort is stable so equal keys keep ingest order.
 */
export function sortPermutation(
  values: (string | null)[],
  numeric: boolean,
  direction: SortDirection
): number[] {
  const indices = values.map((_, i) => i);
  const sign = direction === "asc" ? 1 : -1;
  const keyed = indices.map((i) => {
    const raw = values[i];
    const isNull = raw === null || raw === "";
    const key = numeric && !isNull ? Number(raw) : raw ?? "";
    return { i, isNull, key };
  });
  keyed.sort((a, b) => {
    if (a.isNull !== b.isNull) return a.isNull ? 1 : -1; // nulls always last
    if (a.key < b.key) return -1 * sign;
    if (a.key > b.key) return 1 * sign;
    return a.i - b.i; // stable
  });
  return keyed.map((k) => k.i);
}

export function identityPermutation(n: number): number[] {
  return Array.from({ length: n }, (_, i) => i);
}

export function isIdentity(perm: number[]): boolean {
  return perm.every((dataRow, viewRow) => dataRow === viewRow);
}

/** data-to-view inverse: where a given data row currently appears. */
export function inversePermutation(perm: number[]): number[] {
  const inverse = new Array<number>(perm.length);
  perm.forEach((dataRow, viewRow) => {
    inverse[dataRow] = viewRow;
  });
  return inverse;
}

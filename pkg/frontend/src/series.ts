/**
 * Turning metric rows into plottable series: grouping by the series key,
 * sorting along the x axis, and trailing moving-average smoothing.
 */

import { Row, Table, requireColumn } from './csv.js';

export interface Point {
  x: number;
  y: number;
}

export interface Series {
  label: string;
  points: Point[];
}

export type XAxis = 'iteration' | 'wallclock';

/** Column backing each x-axis choice. */
export function xColumn(axis: XAxis): string {
  return axis === 'iteration' ? 't' : 'wallclock';
}

/** Trailing moving average over `window` rounds; window 1 is identity. */
export function smooth(values: number[], window: number): number[] {
  if (!Number.isInteger(window) || window < 1) {
    throw new Error('smoothing window must be a positive integer');
  }
  if (window === 1) return values.slice();
  const out: number[] = [];
  let acc = 0;
  for (let i = 0; i < values.length; i++) {
    acc += values[i];
    if (i >= window) acc -= values[i - window];
    out.push(acc / Math.min(i + 1, window));
  }
  return out;
}

function numeric(row: Row, column: string): number | null {
  const raw = row[column];
  if (raw === undefined || raw === '') return null;
  const value = Number(raw);
  return Number.isFinite(value) ? value : null;
}

/**
 * Group rows by the series column and extract smoothed (x, y) points.
 * Rows with a blank metric (e.g. accuracy on unlabeled tasks) are
 * dropped; an entirely blank metric column is an error.
 */
export function extractSeries(
  table: Table,
  seriesKey: string,
  axis: XAxis,
  metric: string,
  window: number,
): Series[] {
  requireColumn(table, seriesKey);
  requireColumn(table, metric);
  const xCol = xColumn(axis);
  requireColumn(table, xCol);

  const groups = new Map<string, Point[]>();
  for (const row of table.rows) {
    const label = row[seriesKey];
    if (label === undefined || label === '') continue;
    const x = numeric(row, xCol);
    const y = numeric(row, metric);
    if (x === null || y === null) continue;
    if (!groups.has(label)) groups.set(label, []);
    groups.get(label)!.push({ x, y });
  }
  if (groups.size === 0) {
    throw new Error(`no plottable rows: column '${metric}' has no values`);
  }

  const labels = [...groups.keys()].sort((a, b) => {
    const na = Number(a);
    const nb = Number(b);
    if (Number.isFinite(na) && Number.isFinite(nb)) return na - nb;
    return a < b ? -1 : a > b ? 1 : 0;
  });
  return labels.map((label) => {
    const points = groups
      .get(label)!
      .slice()
      .sort((p, q) => p.x - q.x);
    const ys = smooth(
      points.map((p) => p.y),
      window,
    );
    return {
      label,
      points: points.map((p, i) => ({ x: p.x, y: ys[i] })),
    };
  });
}

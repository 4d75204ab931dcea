/**
 * Figure assembly: one SVG line chart per plot spec, with axes, a grid,
 * one polyline per series value and a legend.
 */

import { Table, concatTables, loadCsv } from './csv.js';
import { Series, XAxis, extractSeries } from './series.js';
import {
  escapeXml, fmt, linearScale, polylinePath, seriesColor, ticks,
} from './svg.js';

export interface PlotSpec {
  /** rounds.csv inputs; concatenated when several are given */
  csvPaths: string[];
  /** optional sweep.csv input, appended to the rounds inputs */
  sweepPath?: string;
  xAxis: XAxis;
  seriesKey: string;
  /** metric column, typically accuracy or loss */
  metric: string;
  /** trailing moving-average window in rounds; 1 = raw series */
  smoothWindow: number;
  outPath: string;
}

const WIDTH = 640;
const HEIGHT = 420;
const MARGIN = { top: 24, right: 150, bottom: 44, left: 64 };

function extent(series: Series[], pick: (p: { x: number; y: number }) => number):
    [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const s of series) {
    for (const p of s.points) {
      const v = pick(p);
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  if (!(Number.isFinite(lo) && Number.isFinite(hi))) {
    throw new Error('series contain no finite points');
  }
  return lo === hi ? [lo - 1, hi + 1] : [lo, hi];
}

export function renderSvg(
  series: Series[], xLabel: string, yLabel: string, title: string,
): string {
  const x = linearScale(extent(series, (p) => p.x),
                        [MARGIN.left, WIDTH - MARGIN.right]);
  const y = linearScale(extent(series, (p) => p.y),
                        [HEIGHT - MARGIN.bottom, MARGIN.top]);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" ` +
    `height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" ` +
    `font-family="sans-serif" font-size="11">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  parts.push(
    `<text x="${MARGIN.left}" y="15" font-size="13" fill="#222">` +
    `${escapeXml(title)}</text>`,
  );

  for (const tx of ticks(x.domain)) {
    const px = fmt(x(tx));
    parts.push(
      `<line x1="${px}" y1="${MARGIN.top}" x2="${px}" ` +
      `y2="${HEIGHT - MARGIN.bottom}" stroke="#eee"/>`,
      `<text x="${px}" y="${HEIGHT - MARGIN.bottom + 16}" ` +
      `text-anchor="middle" fill="#444">${fmt(tx)}</text>`,
    );
  }
  for (const ty of ticks(y.domain)) {
    const py = fmt(y(ty));
    parts.push(
      `<line x1="${MARGIN.left}" y1="${py}" x2="${WIDTH - MARGIN.right}" ` +
      `y2="${py}" stroke="#eee"/>`,
      `<text x="${MARGIN.left - 6}" y="${py}" text-anchor="end" ` +
      `dominant-baseline="middle" fill="#444">${fmt(ty)}</text>`,
    );
  }
  parts.push(
    `<line x1="${MARGIN.left}" y1="${HEIGHT - MARGIN.bottom}" ` +
    `x2="${WIDTH - MARGIN.right}" y2="${HEIGHT - MARGIN.bottom}" stroke="#333"/>`,
    `<line x1="${MARGIN.left}" y1="${MARGIN.top}" x2="${MARGIN.left}" ` +
    `y2="${HEIGHT - MARGIN.bottom}" stroke="#333"/>`,
    `<text x="${(MARGIN.left + WIDTH - MARGIN.right) / 2}" ` +
    `y="${HEIGHT - 8}" text-anchor="middle" fill="#222">` +
    `${escapeXml(xLabel)}</text>`,
    `<text transform="translate(14,${(MARGIN.top + HEIGHT - MARGIN.bottom) / 2}) ` +
    `rotate(-90)" text-anchor="middle" fill="#222">${escapeXml(yLabel)}</text>`,
  );

  series.forEach((s, i) => {
    const path = polylinePath(s.points.map((p) => ({ x: x(p.x), y: y(p.y) })));
    parts.push(
      `<path d="${path}" fill="none" stroke="${seriesColor(i)}" ` +
      `stroke-width="1.6"/>`,
    );
  });

  const legendX = WIDTH - MARGIN.right + 12;
  series.forEach((s, i) => {
    const ly = MARGIN.top + 8 + i * 18;
    parts.push(
      `<line x1="${legendX}" y1="${ly}" x2="${legendX + 18}" y2="${ly}" ` +
      `stroke="${seriesColor(i)}" stroke-width="2"/>`,
      `<text x="${legendX + 24}" y="${ly}" dominant-baseline="middle" ` +
      `fill="#222">${escapeXml(s.label)}</text>`,
    );
  });

  parts.push('</svg>');
  return parts.join('\n') + '\n';
}

/** Load the spec's inputs and render the figure as an SVG string. */
export function renderFigure(spec: PlotSpec): string {
  const tables: Table[] = spec.csvPaths.map(loadCsv);
  if (spec.sweepPath) tables.push(loadCsv(spec.sweepPath));
  const table = concatTables(tables);
  const series = extractSeries(
    table, spec.seriesKey, spec.xAxis, spec.metric, spec.smoothWindow,
  );
  const title =
    `${spec.metric} vs ${spec.xAxis} by ${spec.seriesKey}` +
    (spec.smoothWindow > 1 ? ` (smoothed over ${spec.smoothWindow})` : '');
  return renderSvg(series, spec.xAxis, spec.metric, title);
}

#!/usr/bin/env node
/**
 * Render one figure from simulator CSV artifacts.
 *
 * Usage:
 *   asyncfed-plot --csv rounds.csv [--csv more.csv] [--sweep sweep.csv]
 *                 --x iteration|wallclock --series <column>
 *                 [--y accuracy|loss|<column>] [--smooth N] --out fig.svg
 */

import { writeFileSync } from 'fs';
import { PlotSpec, renderFigure } from './plot.js';

export function parseArgs(argv: string[]): PlotSpec {
  const csvPaths: string[] = [];
  let sweepPath: string | undefined;
  let xAxis: string | undefined;
  let seriesKey: string | undefined;
  let metric = 'accuracy';
  let smoothWindow = 1;
  let outPath: string | undefined;

  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const next = () => {
      if (i + 1 >= argv.length) throw new Error(`missing value for ${flag}`);
      return argv[++i];
    };
    switch (flag) {
      case '--csv': csvPaths.push(next()); break;
      case '--sweep': sweepPath = next(); break;
      case '--x': xAxis = next(); break;
      case '--series': seriesKey = next(); break;
      case '--y': metric = next(); break;
      case '--smooth': smoothWindow = Number(next()); break;
      case '--out': outPath = next(); break;
      default: throw new Error(`unknown flag ${flag}`);
    }
  }
  if (csvPaths.length === 0 && !sweepPath) {
    throw new Error('need at least one --csv or --sweep input');
  }
  if (xAxis !== 'iteration' && xAxis !== 'wallclock') {
    throw new Error("--x must be 'iteration' or 'wallclock'");
  }
  if (!seriesKey) throw new Error('--series is required');
  if (!outPath) throw new Error('--out is required');
  if (!Number.isInteger(smoothWindow) || smoothWindow < 1) {
    throw new Error('--smooth must be a positive integer');
  }
  return { csvPaths, sweepPath, xAxis, seriesKey, metric, smoothWindow, outPath };
}

export function main(argv: string[]): number {
  try {
    const spec = parseArgs(argv);
    const svg = renderFigure(spec);
    writeFileSync(spec.outPath, svg);
    console.log(`wrote ${spec.outPath} (${svg.length} bytes)`);
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 2;
  }
}

if (process.argv[1] && process.argv[1].endsWith('cli.js')) {
  process.exit(main(process.argv.slice(2)));
}

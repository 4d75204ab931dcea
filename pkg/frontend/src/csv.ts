/**
 * Loading and typing of the simulator's CSV artifacts.
 *
 * Both rounds.csv and sweep.csv are plain comma-separated files with a
 * header row; sweep files prepend the swept key (unless it is already a
 * fixed round column, like `policy`) and a `seed` column.
 */

import { readFileSync } from 'fs';
import Papa from 'papaparse';

export type Row = Record<string, string>;

export interface Table {
  columns: string[];
  rows: Row[];
}

export function parseCsv(text: string): Table {
  const parsed = Papa.parse<Row>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0];
    throw new Error(`CSV parse error at row ${first.row}: ${first.message}`);
  }
  const columns = parsed.meta.fields ?? [];
  if (columns.length === 0 || parsed.data.length === 0) {
    throw new Error('CSV input is empty');
  }
  return { columns, rows: parsed.data };
}

export function loadCsv(path: string): Table {
  return parseCsv(readFileSync(path, 'utf8'));
}

/** Concatenate tables that share the needed columns. */
export function concatTables(tables: Table[]): Table {
  if (tables.length === 0) throw new Error('no CSV inputs given');
  const columns = tables[0].columns;
  return { columns, rows: tables.flatMap((t) => t.rows) };
}

export function requireColumn(table: Table, name: string): void {
  if (!table.columns.includes(name)) {
    throw new Error(
      `column '${name}' not found; available: ${table.columns.join(', ')}`,
    );
  }
}

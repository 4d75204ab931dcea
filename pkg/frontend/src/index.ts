export { Table, Row, parseCsv, loadCsv, concatTables, requireColumn } from './csv.js';
export { Series, Point, XAxis, extractSeries, smooth, xColumn } from './series.js';
export { linearScale, ticks, fmt, polylinePath, seriesColor, escapeXml } from './svg.js';
export { PlotSpec, renderFigure, renderSvg } from './plot.js';
export { parseArgs, main } from './cli.js';

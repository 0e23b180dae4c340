/**
 * SVG chart of per-level toxicity estimates against the target.
 *
 * Renders only what the server reports: raw and monotonized estimates,
 * the target line y = p, the decision band for interval designs, and the
 * fitted model curve for CRM. No client-side estimation.
 */

import type { LevelRow } from './api.js';

export interface ChartOptions {
  p: number;
  band?: { lo: number; hi: number };
  width?: number;
  height?: number;
}

const MARGIN = { top: 12, right: 16, bottom: 28, left: 40 };

function fmt(x: number): string {
  return x.toFixed(1).replace(/\.0$/, '');
}

export function renderChart(levels: LevelRow[], opts: ChartOptions): SVGSVGElement {
  const width = opts.width ?? 460;
  const height = opts.height ?? 260;
  const innerW = width - MARGIN.left - MARGIN.right;
  const innerH = height - MARGIN.top - MARGIN.bottom;
  const m = levels.length;

  const x = (level: number) => MARGIN.left + ((level - 0.5) / m) * innerW;
  const y = (rate: number) => MARGIN.top + (1 - rate) * innerH;

  const svg = document.createElementNS('http://www.w3.org/2000/svg', 'svg');
  svg.setAttribute('viewBox', `0 0 ${width} ${height}`);
  svg.setAttribute('width', String(width));
  svg.setAttribute('class', 'dose-chart');

  const add = (tag: string, attrs: Record<string, string>, text?: string) => {
    const el = document.createElementNS('http://www.w3.org/2000/svg', tag);
    for (const [k, v] of Object.entries(attrs)) el.setAttribute(k, v);
    if (text !== undefined) el.textContent = text;
    svg.appendChild(el);
    return el;
  };

  // axes and y gridlines
  add('line', {
    x1: String(MARGIN.left), y1: String(y(0)),
    x2: String(MARGIN.left + innerW), y2: String(y(0)),
    stroke: '#444', 'stroke-width': '1',
  });
  for (const tick of [0, 0.2, 0.4, 0.6, 0.8, 1]) {
    add('line', {
      x1: String(MARGIN.left), y1: String(y(tick)),
      x2: String(MARGIN.left + innerW), y2: String(y(tick)),
      stroke: '#eee', 'stroke-width': '1',
    });
    add('text', {
      x: String(MARGIN.left - 6), y: String(y(tick) + 4),
      'text-anchor': 'end', 'font-size': '11', fill: '#555',
    }, fmt(tick));
  }
  for (const row of levels) {
    add('text', {
      x: String(x(row.level)), y: String(height - 8),
      'text-anchor': 'middle', 'font-size': '11', fill: '#555',
    }, `d${row.level}`);
  }

  // interval-design decision band
  if (opts.band) {
    add('rect', {
      x: String(MARGIN.left), y: String(y(opts.band.hi)),
      width: String(innerW), height: String(y(opts.band.lo) - y(opts.band.hi)),
      fill: '#cfe3f5', opacity: '0.6', 'data-role': 'band',
    });
    for (const edge of [opts.band.lo, opts.band.hi]) {
      add('line', {
        x1: String(MARGIN.left), y1: String(y(edge)),
        x2: String(MARGIN.left + innerW), y2: String(y(edge)),
        stroke: '#4a77a8', 'stroke-dasharray': '5,4', 'stroke-width': '1',
      });
    }
  }

  // target line y = p
  add('line', {
    x1: String(MARGIN.left), y1: String(y(opts.p)),
    x2: String(MARGIN.left + innerW), y2: String(y(opts.p)),
    stroke: '#c03a2b', 'stroke-width': '1.5', 'data-role': 'target',
  });

  // CRM fitted curve, when the server supplies one
  const modeled = levels.filter((r) => r.model != null);
  if (modeled.length === m) {
    const path = modeled
      .map((r, i) => `${i === 0 ? 'M' : 'L'}${x(r.level)},${y(r.model as number)}`)
      .join(' ');
    add('path', {
      d: path, fill: 'none', stroke: '#7b52a1', 'stroke-width': '1.5', 'data-role': 'model',
    });
  }

  // monotonized estimates as a step-friendly polyline over defined levels
  const mono = levels.filter((r) => r.monotonized != null);
  if (mono.length > 1) {
    const path = mono
      .map((r, i) => `${i === 0 ? 'M' : 'L'}${x(r.level)},${y(r.monotonized as number)}`)
      .join(' ');
    add('path', {
      d: path, fill: 'none', stroke: '#2d7a43', 'stroke-width': '1.2',
      'stroke-dasharray': '3,3', 'data-role': 'isotonic',
    });
  }

  // raw estimates, sized by level sample count
  for (const row of levels) {
    if (row.raw == null) continue;
    add('circle', {
      cx: String(x(row.level)), cy: String(y(row.raw)),
      r: String(Math.min(3 + Math.sqrt(row.n), 9)),
      fill: '#1f3d5c', 'data-role': 'estimate', 'data-level': String(row.level),
    });
  }

  return svg;
}

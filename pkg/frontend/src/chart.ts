import type { ChartData } from "./types.js";

// All rendering works off the payload as delivered: category labels and
// series values go onto the canvas verbatim; the only derived presentation
// figures are pie percentage labels and axis scaling.

const WIDTH = 640;
const HEIGHT = 360;
const PLOT = { left: 60, right: 620, top: 40, bottom: 310 };

const PALETTE = [
  "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
  "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
];

export function chartDataProblem(data: unknown): string | null {
  if (typeof data !== "object" || data === null) return "chart payload is not an object";
  const chart = data as Partial<ChartData>;
  if (chart.kind !== "pie" && chart.kind !== "stacked_bar" && chart.kind !== "line") {
    return `unknown chart kind ${String(chart.kind)}`;
  }
  if (!Array.isArray(chart.categories)) return "categories missing";
  if (!Array.isArray(chart.series) || chart.series.length === 0) return "series missing";
  for (const series of chart.series) {
    if (typeof series?.name !== "string" || !Array.isArray(series.values)) {
      return "malformed series";
    }
    if (series.values.length !== chart.categories.length) {
      return `series ${series.name} has ${series.values.length} values for ${chart.categories.length} categories`;
    }
    if (series.values.some((v) => typeof v !== "number" || Number.isNaN(v))) {
      return `series ${series.name} carries non-numeric values`;
    }
  }
  if (chart.kind === "pie") {
    if (chart.series.length !== 1) return "pie charts take exactly one series";
    if (chart.series[0].values.some((v) => v < 0)) return "pie slices must be non-negative";
  }
  return null;
}

export function errorPlaceholder(problem: string): string {
  return `<div class="chart-error" role="alert">Chart unavailable: ${escapeHtml(problem)}</div>`;
}

// Returns an SVG string for a valid payload, or the error placeholder —
// never throws, so a bad payload cannot take the page down.
export function renderChart(data: unknown): string {
  const problem = chartDataProblem(data);
  if (problem !== null) return errorPlaceholder(problem);
  const chart = data as ChartData;
  try {
    const body =
      chart.kind === "pie" ? renderPie(chart)
      : chart.kind === "stacked_bar" ? renderStackedBar(chart)
      : renderLine(chart);
    return (
      `<svg class="chart" viewBox="0 0 ${WIDTH} ${HEIGHT}" xmlns="http://www.w3.org/2000/svg">` +
      `<text x="${WIDTH / 2}" y="22" text-anchor="middle" class="chart-title">${escapeHtml(chart.title)}</text>` +
      body +
      `</svg>`
    );
  } catch (err) {
    return errorPlaceholder(err instanceof Error ? err.message : String(err));
  }
}

export function pieShareLabel(value: number, total: number): string {
  if (total <= 0) return "0.0%";
  return `${((value / total) * 100).toFixed(1)}%`;
}

function renderPie(chart: ChartData): string {
  const values = chart.series[0].values;
  const total = values.reduce((acc, v) => acc + v, 0);
  const cx = WIDTH / 2;
  const cy = (HEIGHT + 30) / 2;
  const radius = 120;
  const parts: string[] = [];
  let angle = -Math.PI / 2;
  values.forEach((value, i) => {
    const share = total > 0 ? value / total : 0;
    const sweep = share * 2 * Math.PI;
    const end = angle + sweep;
    const large = sweep > Math.PI ? 1 : 0;
    const x1 = cx + radius * Math.cos(angle);
    const y1 = cy + radius * Math.sin(angle);
    const x2 = cx + radius * Math.cos(end);
    const y2 = cy + radius * Math.sin(end);
    const color = PALETTE[i % PALETTE.length];
    if (share >= 1) {
      parts.push(`<circle cx="${cx}" cy="${cy}" r="${radius}" fill="${color}" data-slice="${i}"/>`);
    } else if (share > 0) {
      parts.push(
        `<path d="M ${cx} ${cy} L ${fmt(x1)} ${fmt(y1)} A ${radius} ${radius} 0 ${large} 1 ${fmt(x2)} ${fmt(y2)} Z" ` +
        `fill="${color}" data-slice="${i}"/>`,
      );
    }
    const mid = angle + sweep / 2;
    const lx = cx + radius * 1.25 * Math.cos(mid);
    const ly = cy + radius * 1.25 * Math.sin(mid);
    parts.push(
      `<text x="${fmt(lx)}" y="${fmt(ly)}" text-anchor="middle" class="slice-label" data-slice-label="${i}">` +
      `${escapeHtml(chart.categories[i])}: ${pieShareLabel(value, total)}</text>`,
    );
    angle = end;
  });
  return parts.join("");
}

function renderStackedBar(chart: ChartData): string {
  const columnTotals = chart.categories.map((_, col) =>
    chart.series.reduce((acc, s) => acc + s.values[col], 0),
  );
  const maxTotal = Math.max(...columnTotals, 0);
  const scale = maxTotal > 0 ? (PLOT.bottom - PLOT.top) / maxTotal : 0;
  const slot = (PLOT.right - PLOT.left) / chart.categories.length;
  const barWidth = slot * 0.6;
  const parts: string[] = [];
  chart.categories.forEach((category, col) => {
    const x = PLOT.left + slot * col + slot * 0.2;
    let y = PLOT.bottom;
    chart.series.forEach((series, si) => {
      const height = series.values[col] * scale;
      y -= height;
      parts.push(
        `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(barWidth)}" height="${fmt(height)}" ` +
        `fill="${PALETTE[si % PALETTE.length]}" data-bar="${col}" data-segment="${escapeHtml(series.name)}"/>`,
      );
    });
    parts.push(
      `<text x="${fmt(x + barWidth / 2)}" y="${PLOT.bottom + 18}" text-anchor="middle" class="axis-label">` +
      `${escapeHtml(category)}</text>`,
    );
  });
  parts.push(axisLine(), legend(chart), unitsLabel(chart));
  return parts.join("");
}

function renderLine(chart: ChartData): string {
  const maxValue = Math.max(...chart.series.flatMap((s) => s.values), 0);
  const scale = maxValue > 0 ? (PLOT.bottom - PLOT.top) / maxValue : 0;
  const slot = (PLOT.right - PLOT.left) / Math.max(chart.categories.length - 1, 1);
  const parts: string[] = [];
  chart.series.forEach((series, si) => {
    const points = series.values
      .map((v, col) => `${fmt(PLOT.left + slot * col)},${fmt(PLOT.bottom - v * scale)}`)
      .join(" ");
    parts.push(
      `<polyline points="${points}" fill="none" stroke="${PALETTE[si % PALETTE.length]}" ` +
      `stroke-width="2" data-line="${escapeHtml(series.name)}"/>`,
    );
  });
  chart.categories.forEach((category, col) => {
    parts.push(
      `<text x="${fmt(PLOT.left + slot * col)}" y="${PLOT.bottom + 18}" text-anchor="middle" class="axis-label">` +
      `${escapeHtml(category)}</text>`,
    );
  });
  parts.push(axisLine(), legend(chart), unitsLabel(chart));
  return parts.join("");
}

function axisLine(): string {
  return `<line x1="${PLOT.left}" y1="${PLOT.bottom}" x2="${PLOT.right}" y2="${PLOT.bottom}" stroke="#555"/>`;
}

function legend(chart: ChartData): string {
  const items = chart.series.map((series, si) =>
    `<tspan x="${PLOT.left}" dy="${si === 0 ? 0 : 14}" fill="${PALETTE[si % PALETTE.length]}">` +
    `■ ${escapeHtml(series.name)}</tspan>`,
  );
  return `<text x="${PLOT.left}" y="${PLOT.bottom + 36}" class="legend">${items.join("")}</text>`;
}

function unitsLabel(chart: ChartData): string {
  return `<text x="${PLOT.left}" y="${PLOT.top - 8}" class="units">${escapeHtml(chart.units)}</text>`;
}

function fmt(n: number): string {
  return Number.isInteger(n) ? String(n) : n.toFixed(2);
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

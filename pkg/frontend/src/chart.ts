/**
 * Trajectory chart: pure SVG string from the trajectory payload. Point
 * labels print the service's values at review precision (one decimal), so
 * what is drawn is exactly what the API returned.
 */

import type { TrajectoryPayload } from "./types.js";

const WIDTH = 640;
const HEIGHT = 280;
const MARGIN = { top: 24, right: 24, bottom: 36, left: 48 };

export function formatScore(value: number): string {
  return value.toFixed(1);
}

interface PlotPoint {
  round: number;
  value: number;
  x: number;
  y: number;
}

function scale(points: number[], tau: number | null): { min: number; max: number } {
  const values = [...points];
  if (tau !== null) values.push(tau);
  let min = Math.min(...values);
  let max = Math.max(...values);
  if (min === max) {
    min -= 1;
    max += 1;
  }
  const pad = (max - min) * 0.15;
  return { min: min - pad, max: max + pad };
}

export function trajectoryPlot(payload: TrajectoryPayload): PlotPoint[] {
  if (payload.points.length === 0) return [];
  const { min, max } = scale(payload.points, payload.tau);
  const innerW = WIDTH - MARGIN.left - MARGIN.right;
  const innerH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const step = payload.points.length > 1 ? innerW / (payload.points.length - 1) : 0;
  return payload.points.map((value, round) => ({
    round,
    value,
    x: MARGIN.left + (payload.points.length > 1 ? round * step : innerW / 2),
    y: MARGIN.top + innerH - ((value - min) / (max - min)) * innerH,
  }));
}

export function renderTrajectoryChart(payload: TrajectoryPayload): string {
  if (payload.points.length === 0) {
    return `<div class="chart placeholder" data-testid="trajectory-placeholder">
  No review rounds yet${payload.tau !== null ? ` (threshold ${formatScore(payload.tau)})` : ""}.
</div>`;
  }
  const plot = trajectoryPlot(payload);
  const { min, max } = scale(payload.points, payload.tau);
  const innerH = HEIGHT - MARGIN.top - MARGIN.bottom;

  const polyline = plot.map((p) => `${p.x.toFixed(1)},${p.y.toFixed(1)}`).join(" ");
  const dots = plot
    .map(
      (p) => `
  <circle cx="${p.x.toFixed(1)}" cy="${p.y.toFixed(1)}" r="4" class="dot" />
  <text x="${p.x.toFixed(1)}" y="${(p.y - 10).toFixed(1)}" text-anchor="middle"
        class="value" data-testid="point-${p.round}">${formatScore(p.value)}</text>
  <text x="${p.x.toFixed(1)}" y="${HEIGHT - 12}" text-anchor="middle" class="axis">t=${p.round}</text>`,
    )
    .join("");

  let tauLine = "";
  if (payload.tau !== null) {
    const tauY = MARGIN.top + innerH - ((payload.tau - min) / (max - min)) * innerH;
    tauLine = `
  <line x1="${MARGIN.left}" y1="${tauY.toFixed(1)}" x2="${WIDTH - MARGIN.right}" y2="${tauY.toFixed(1)}"
        class="tau" stroke-dasharray="6 4" />
  <text x="${WIDTH - MARGIN.right}" y="${(tauY - 6).toFixed(1)}" text-anchor="end" class="tau-label"
        data-testid="tau-line">threshold ${formatScore(payload.tau)}</text>`;
  }

  return `<svg viewBox="0 0 ${WIDTH} ${HEIGHT}" class="chart" role="img" aria-label="score trajectory">
  <polyline points="${polyline}" fill="none" class="line" />${tauLine}${dots}
</svg>`;
}

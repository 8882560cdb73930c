/**
 * Run dashboard: phase banner, the trajectory chart, and the per-round
 * drill-down (per-reviewer totals, then all twenty subscores per chunk).
 * Every number shown comes straight from an API payload.
 */

import { formatScore, renderTrajectoryChart } from "./chart.js";
import type {
  ManifestPayload,
  ReviewPayload,
  RoundReviewsPayload,
  TrajectoryPayload,
} from "./types.js";

export interface ReviewCell {
  reviewer: string;
  chunk: number;
  total: number | null; // null = missing cell
  subscores: Record<string, Record<string, number>> | null;
  decision: string | null;
}

export interface RoundView {
  round: number;
  totals: Array<{ reviewer: string; total: number }>;
  average: number | null;
  decision: string | null;
  cells: ReviewCell[];
}

export function roundView(round: number, payload: RoundReviewsPayload): RoundView {
  const cells: ReviewCell[] = payload.reviews.map((review: ReviewPayload) => ({
    reviewer: `${review.reviewer.family}/${review.reviewer.model_name}`,
    chunk: review.chunk_index,
    total: review.total,
    subscores: review.subscores,
    decision: review.decision,
  }));
  for (const [reviewer, chunk] of payload.scores?.missing_cells ?? []) {
    cells.push({ reviewer, chunk, total: null, subscores: null, decision: null });
  }
  cells.sort((a, b) => a.reviewer.localeCompare(b.reviewer) || a.chunk - b.chunk);
  const totals = Object.entries(payload.scores?.totals ?? {}).map(([reviewer, total]) => ({
    reviewer,
    total,
  }));
  return {
    round,
    totals,
    average: payload.scores?.avg_display ?? null,
    decision: payload.scores?.decision ?? null,
    cells,
  };
}

function subscoreTable(cell: ReviewCell): string {
  if (cell.subscores === null) {
    return `<span class="missing" data-testid="missing-cell">missing</span>`;
  }
  const rows = Object.entries(cell.subscores)
    .map(([dimension, subs]) => {
      const cols = Object.entries(subs)
        .map(([name, score]) => `<td title="${name}">${score}</td>`)
        .join("");
      return `<tr><th>${dimension}</th>${cols}</tr>`;
    })
    .join("");
  return `<table class="subscores">${rows}</table>`;
}

export function renderRound(view: RoundView): string {
  const totals = view.totals
    .map(
      (t) =>
        `<li>${t.reviewer}: <strong data-testid="total-${t.reviewer}">${formatScore(t.total)}</strong></li>`,
    )
    .join("");
  const cells = view.cells
    .map(
      (cell) => `
  <details class="cell ${cell.total === null ? "flagged" : ""}">
    <summary>${cell.reviewer} / chunk ${cell.chunk}:
      ${cell.total === null ? '<span class="missing">missing</span>' : `${cell.total} (${cell.decision})`}
    </summary>
    ${subscoreTable(cell)}
  </details>`,
    )
    .join("");
  return `<section class="round" data-round="${view.round}">
  <h3>Round ${view.round}
    ${view.average !== null ? `- average <span data-testid="round-avg">${formatScore(view.average)}</span>` : ""}
    ${view.decision ? `(${view.decision})` : ""}</h3>
  <ul class="totals">${totals}</ul>
  ${cells}
</section>`;
}

export function renderDashboard(
  manifest: ManifestPayload,
  trajectory: TrajectoryPayload,
  rounds: RoundView[],
): string {
  const failure = manifest.state.failure
    ? `<div class="banner error">failed: ${manifest.state.failure}</div>`
    : "";
  return `<section class="dashboard">
  <h2>${manifest.run_id}</h2>
  <div class="banner phase" data-testid="phase">phase: ${manifest.state.phase}</div>
  ${failure}
  ${renderTrajectoryChart(trajectory)}
  ${rounds.map(renderRound).join("\n")}
  <button id="abort" data-cmd="abort">abort run</button>
</section>`;
}

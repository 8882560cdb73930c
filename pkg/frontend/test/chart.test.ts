import { describe, expect, it } from "vitest";

import { formatScore, renderTrajectoryChart, trajectoryPlot } from "../src/chart.js";
import type { TrajectoryPayload } from "../src/types.js";

// Trajectory payload exactly as the service persists it for the scripted
// four-round refinement run (threshold 92.0).
const FOUR_ROUNDS: TrajectoryPayload = { tau: 92.0, points: [87.0, 90.1, 91.4, 92.7] };

describe("trajectory chart", () => {
  it("renders exactly the API's trajectory values", () => {
    const svg = renderTrajectoryChart(FOUR_ROUNDS);
    expect(svg).toContain('data-testid="point-0">87.0</text>');
    expect(svg).toContain('data-testid="point-1">90.1</text>');
    expect(svg).toContain('data-testid="point-2">91.4</text>');
    expect(svg).toContain('data-testid="point-3">92.7</text>');
    expect(svg).toContain("threshold 92.0");
    expect(svg).toMatchSnapshot();
  });

  it("plots one point per round in order", () => {
    const plot = trajectoryPlot(FOUR_ROUNDS);
    expect(plot.map((p) => p.round)).toEqual([0, 1, 2, 3]);
    expect(plot.map((p) => p.value)).toEqual([87.0, 90.1, 91.4, 92.7]);
    const xs = plot.map((p) => p.x);
    expect([...xs].sort((a, b) => a - b)).toEqual(xs);
    // Higher scores sit higher on the chart (smaller y).
    expect(plot[3]!.y).toBeLessThan(plot[0]!.y);
  });

  it("places the threshold line between the rounds it separates", () => {
    const plot = trajectoryPlot(FOUR_ROUNDS);
    const svg = renderTrajectoryChart(FOUR_ROUNDS);
    const tauY = Number(/y1="([0-9.]+)"/.exec(svg)?.[1] ?? NaN);
    // tau = 92.0 lies between round 2 (91.4, below) and round 3 (92.7, above).
    expect(tauY).toBeGreaterThan(plot[3]!.y);
    expect(tauY).toBeLessThan(plot[2]!.y);
  });

  it("shows a placeholder before any rounds complete", () => {
    const svg = renderTrajectoryChart({ tau: 92.0, points: [] });
    expect(svg).toContain("trajectory-placeholder");
    expect(svg).toContain("No review rounds yet");
  });

  it("formats scores at review precision", () => {
    expect(formatScore(87)).toBe("87.0");
    expect(formatScore(100)).toBe("100.0");
    expect(formatScore(92.66666)).toBe("92.7");
  });
});

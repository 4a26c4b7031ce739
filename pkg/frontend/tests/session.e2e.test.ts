// Scripted human-benchmark session against a live bench service.
//
// Drives the same controller the browser uses: start a 50-selection
// session, click through holes patch by patch, reconcile the displayed
// score with the server's recomputation, and overlay the agent comparison
// chart.  Every network payload passes the ground-truth auditor.

import { JSDOM } from "jsdom";
import { beforeAll, describe, expect, it } from "vitest";

import { BenchClient } from "../src/api.js";
import { SessionController } from "../src/controller.js";
import { renderComparisonChart } from "../src/chart.js";
import { E2E_BASE } from "./globalSetup.js";

const doc = new JSDOM("<!doctype html><html><body></body></html>").window.document;

describe("scripted 50-selection session", () => {
  let controller: SessionController;

  beforeAll(async () => {
    const client = new BenchClient(E2E_BASE);
    controller = new SessionController(client);
    await controller.start("bench", 50);
  });

  it("completes the full budget through the UI path", async () => {
    let guard = 0;
    while (controller.state.remaining > 0 && guard < 500) {
      guard += 1;
      const view = controller.state.currentView;
      const unknown = view?.holes.filter((h) => h.state === "unknown") ?? [];
      if (unknown.length === 0) {
        await controller.nextPatch(1);
        continue;
      }
      await controller.clickHole(unknown[0].hole_id);
    }
    expect(controller.state.remaining).toBe(0);
    expect(controller.state.series.length).toBe(50);
    expect(controller.state.complete).toBe(true);
  });

  it("server-recomputed score equals the displayed score", async () => {
    const summary = await controller.loadSummary();
    expect(summary.recomputed_score).toBe(summary.score);
    expect(controller.state.score).toBe(summary.score);
    expect(summary.selections.length).toBe(50);
    // The displayed running series is the server's own cumulative record.
    expect(controller.state.series).toEqual(summary.cumulative_scores);
  });

  it("renders agent and human curves on shared axes", async () => {
    const agent = await controller.loadComparison();
    expect(agent).not.toBeNull();
    expect(agent!.length).toBeGreaterThan(0);
    expect(agent!.length).toBeLessThanOrEqual(50);
    const svg = renderComparisonChart(
      doc,
      controller.state.series,
      controller.state.agentSeries,
      controller.state.budget,
    );
    const curves = svg.querySelectorAll("polyline.curve");
    expect(curves.length).toBe(2);
    expect(svg.dataset.budget).toBe("50");
    // Curves are monotone non-decreasing cumulative counts.
    for (const series of [controller.state.series, controller.state.agentSeries!]) {
      for (let i = 1; i < series.length; i++) {
        expect(series[i]).toBeGreaterThanOrEqual(series[i - 1]);
      }
    }
  });

  it("audited every payload and found no unrevealed ground truth", () => {
    // The auditor throws on violation, which would have failed the tests
    // above; revealed holes must exactly match the selections made.
    expect(controller.revealedIds.size).toBe(50);
  });

  it("duplicate clicks surface as a notice, not a crash", async () => {
    const anyRevealed = [...controller.revealedIds][0];
    const result = await controller.clickHole(anyRevealed);
    expect(result).toBeNull();
    expect(controller.state.notice).toBeTruthy();
  });
});

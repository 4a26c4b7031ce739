import { describe, expect, it } from "vitest";

import type { PatchView, SelectResult, SessionInfo } from "../src/api.js";
import {
  applyAtlas,
  applySelect,
  applySessionCreated,
  applySummary,
  applyView,
  currentPatchId,
  emptyState,
  stepPatch,
} from "../src/state.js";

const session: SessionInfo = {
  id: "s1",
  dataset_id: "demo",
  budget: 3,
  budget_minutes: 7.2,
  mode: "human",
  score: 0,
  remaining: 3,
  selections: [],
};

const view: PatchView = {
  patch_id: "G0-S0-P0",
  square_id: "G0-S0",
  grid_id: "G0",
  holes: [
    { hole_id: "h1", x: 0, y: 0, state: "unknown" },
    { hole_id: "h2", x: 1, y: 0, state: "unknown" },
  ],
};

describe("session state store", () => {
  it("initializes from the create response", () => {
    const state = emptyState();
    applySessionCreated(state, session);
    expect(state.sessionId).toBe("s1");
    expect(state.remaining).toBe(3);
    expect(state.score).toBe(0);
    expect(state.complete).toBe(false);
  });

  it("flattens a hierarchical atlas", () => {
    const state = emptyState();
    applyAtlas(state, {
      grids: [
        {
          grid_id: "G0",
          squares: [
            { square_id: "G0-S0", patches: [{ patch_id: "P0", holes: 4 }] },
            { square_id: "G0-S1", patches: [{ patch_id: "P1", holes: 2 }] },
          ],
        },
      ],
    });
    expect(state.patches.map((p) => p.patch_id)).toEqual(["P0", "P1"]);
    expect(currentPatchId(state)).toBe("P0");
  });

  it("keeps the patches-only listing as is", () => {
    const state = emptyState();
    applyAtlas(state, { patches: [{ patch_id: "PX", holes: 5 }] });
    expect(state.patches[0].patch_id).toBe("PX");
  });

  it("applies a selection: score, remaining, series, overlay", () => {
    const state = emptyState();
    applySessionCreated(state, session);
    applyView(state, structuredClone(view));
    const result: SelectResult = {
      hole_id: "h1",
      ctf: 4.5,
      is_low: true,
      score: 1,
      remaining: 2,
    };
    applySelect(state, result);
    expect(state.score).toBe(1);
    expect(state.remaining).toBe(2);
    expect(state.series).toEqual([1]);
    expect(state.revealed.get("h1")).toEqual({ ctf: 4.5, isLow: true });
    const overlay = state.currentView?.holes.find((h) => h.hole_id === "h1");
    expect(overlay?.state).toBe("revealed");
  });

  it("never displays a CTF it was not sent", () => {
    const state = emptyState();
    applySessionCreated(state, session);
    applyView(state, structuredClone(view));
    const unknown = state.currentView?.holes.find((h) => h.hole_id === "h2");
    expect(unknown?.ctf).toBeUndefined();
    expect(state.revealed.has("h2")).toBe(false);
  });

  it("summary overrides local series and sets percentile", () => {
    const state = emptyState();
    applySessionCreated(state, session);
    applySummary(state, {
      session_id: "s1",
      score: 2,
      recomputed_score: 2,
      budget: 3,
      complete: true,
      selections: [],
      cumulative_scores: [1, 1, 2],
      percentile: 100,
      cohort_size: 1,
    });
    expect(state.series).toEqual([1, 1, 2]);
    expect(state.complete).toBe(true);
    expect(state.percentile).toBe(100);
  });

  it("patch navigation wraps both ways", () => {
    const state = emptyState();
    applyAtlas(state, {
      patches: [
        { patch_id: "A", holes: 1 },
        { patch_id: "B", holes: 1 },
        { patch_id: "C", holes: 1 },
      ],
    });
    expect(stepPatch(state, 1)).toBe("B");
    expect(stepPatch(state, 1)).toBe("C");
    expect(stepPatch(state, 1)).toBe("A");
    expect(stepPatch(state, -1)).toBe("C");
  });
});

// Client-side session state, built exclusively from server responses.
//
// The store never computes ground truth on its own: hole states come from
// /view and /select payloads, scores from the server's counters, so a
// replay of the same responses always reconstructs the same state.

import type {
  AgentComparison,
  AtlasGrid,
  PatchRef,
  PatchView,
  SelectResult,
  SessionInfo,
  Summary,
} from "./api.js";

export interface RevealedHole {
  ctf: number;
  isLow: boolean;
}

export interface UiSessionState {
  sessionId: string | null;
  datasetId: string;
  budget: number;
  remaining: number;
  score: number;
  patches: PatchRef[];
  patchIndex: number;
  currentView: PatchView | null;
  revealed: Map<string, RevealedHole>;
  series: number[];
  agentSeries: number[] | null;
  percentile: number | null;
  complete: boolean;
  notice: string | null;
}

export function emptyState(): UiSessionState {
  return {
    sessionId: null,
    datasetId: "",
    budget: 0,
    remaining: 0,
    score: 0,
    patches: [],
    patchIndex: 0,
    currentView: null,
    revealed: new Map(),
    series: [],
    agentSeries: null,
    percentile: null,
    complete: false,
    notice: null,
  };
}

export function applySessionCreated(state: UiSessionState, session: SessionInfo): void {
  state.sessionId = session.id;
  state.datasetId = session.dataset_id;
  state.budget = session.budget;
  state.remaining = session.remaining;
  state.score = session.score;
  state.series = [];
  state.revealed = new Map();
  state.complete = session.remaining === 0;
}

export function applyAtlas(
  state: UiSessionState,
  atlas: { grids?: AtlasGrid[]; patches?: PatchRef[] },
): void {
  if (atlas.patches !== undefined) {
    state.patches = atlas.patches;
    return;
  }
  const flat: PatchRef[] = [];
  for (const grid of atlas.grids ?? []) {
    for (const square of grid.squares) {
      for (const patch of square.patches) {
        flat.push({
          patch_id: patch.patch_id,
          square_id: square.square_id,
          grid_id: grid.grid_id,
          holes: patch.holes,
        });
      }
    }
  }
  state.patches = flat;
}

export function applyView(state: UiSessionState, view: PatchView): void {
  state.currentView = view;
  for (const hole of view.holes) {
    if (hole.state === "revealed" && hole.ctf !== undefined && hole.is_low !== undefined) {
      state.revealed.set(hole.hole_id, { ctf: hole.ctf, isLow: hole.is_low });
    }
  }
  const idx = state.patches.findIndex((p) => p.patch_id === view.patch_id);
  if (idx >= 0) {
    state.patchIndex = idx;
  }
}

export function applySelect(state: UiSessionState, result: SelectResult): void {
  state.revealed.set(result.hole_id, { ctf: result.ctf, isLow: result.is_low });
  state.score = result.score;
  state.remaining = result.remaining;
  state.series.push(result.score);
  state.complete = result.remaining === 0;
  state.notice = null;
  if (state.currentView !== null) {
    for (const hole of state.currentView.holes) {
      if (hole.hole_id === result.hole_id) {
        hole.state = "revealed";
        hole.ctf = result.ctf;
        hole.is_low = result.is_low;
      }
    }
  }
}

export function applySummary(state: UiSessionState, summary: Summary): void {
  state.score = summary.score;
  state.series = [...summary.cumulative_scores];
  state.percentile = summary.percentile;
  state.complete = summary.complete;
}

export function applyAgentComparison(state: UiSessionState, cmp: AgentComparison): void {
  state.agentSeries = [...cmp.cumulative_scores];
}

export function currentPatchId(state: UiSessionState): string | null {
  return state.patches.length > 0 ? state.patches[state.patchIndex].patch_id : null;
}

export function stepPatch(state: UiSessionState, delta: number): string | null {
  if (state.patches.length === 0) return null;
  const n = state.patches.length;
  state.patchIndex = ((state.patchIndex + delta) % n + n) % n;
  return state.patches[state.patchIndex].patch_id;
}

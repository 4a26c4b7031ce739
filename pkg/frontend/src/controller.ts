// Session controller: the full benchmark protocol without any DOM.
//
// The browser app delegates here; tests drive the same code path (start,
// navigate, click holes, fetch the comparison) against a live server.

import { ApiError, BenchClient, makeCtfAuditor } from "./api.js";
import type { PatchView, SelectResult, Summary } from "./api.js";
import {
  UiSessionState,
  applyAgentComparison,
  applyAtlas,
  applySelect,
  applySessionCreated,
  applySummary,
  applyView,
  currentPatchId,
  emptyState,
  stepPatch,
} from "./state.js";

export type Listener = (state: UiSessionState) => void;

export class SessionController {
  readonly state: UiSessionState = emptyState();
  readonly revealedIds = new Set<string>();
  private listeners: Listener[] = [];

  constructor(private readonly client: BenchClient) {
    client.addAuditor(makeCtfAuditor(this.revealedIds));
  }

  onChange(listener: Listener): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  async start(datasetId: string, budget: number): Promise<void> {
    const session = await this.client.createSession(datasetId, budget);
    applySessionCreated(this.state, session);
    const atlas = await this.client.atlas(session.id);
    applyAtlas(this.state, atlas);
    const first = currentPatchId(this.state);
    if (first !== null) {
      await this.showPatch(first);
    }
    this.notify();
  }

  async showPatch(patchId: string): Promise<PatchView> {
    if (this.state.sessionId === null) throw new Error("no active session");
    const view = await this.client.view(this.state.sessionId, patchId);
    applyView(this.state, view);
    this.notify();
    return view;
  }

  async nextPatch(delta = 1): Promise<void> {
    const patch = stepPatch(this.state, delta);
    if (patch !== null) {
      await this.showPatch(patch);
    }
  }

  /**
   * Select a hole.  Duplicate (409) and exhausted (410) answers surface as
   * a non-blocking notice instead of an exception; a duplicate is treated
   * as already applied.
   */
  async clickHole(holeId: string): Promise<SelectResult | null> {
    if (this.state.sessionId === null) throw new Error("no active session");
    if (this.state.remaining <= 0) {
      this.state.notice = "selection budget exhausted";
      this.notify();
      return null;
    }
    try {
      const result = await this.client.select(this.state.sessionId, holeId);
      applySelect(this.state, result);
      this.notify();
      return result;
    } catch (err) {
      if (err instanceof ApiError && (err.status === 409 || err.status === 410)) {
        this.state.notice = err.detail;
        this.notify();
        return null;
      }
      throw err;
    }
  }

  async loadSummary(): Promise<Summary> {
    if (this.state.sessionId === null) throw new Error("no active session");
    const summary = await this.client.summary(this.state.sessionId);
    applySummary(this.state, summary);
    this.notify();
    return summary;
  }

  /** Agent series for the overlay; null when no policy is loaded (503). */
  async loadComparison(): Promise<number[] | null> {
    try {
      const cmp = await this.client.compareAgent(this.state.datasetId, this.state.budget);
      applyAgentComparison(this.state, cmp);
      this.notify();
      return this.state.agentSeries;
    } catch (err) {
      if (err instanceof ApiError && err.status === 503) {
        this.state.notice = "agent unavailable";
        this.notify();
        return null;
      }
      throw err;
    }
  }
}

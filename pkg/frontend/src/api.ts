// Typed client for the bench service /v1 API.
//
// Every JSON payload that crosses the wire is passed to the installed
// audit hooks before it reaches application code, so tests (and paranoid
// operators) can verify that no unrevealed ground truth ever arrives.

export interface DatasetInfo {
  id: string;
  holes: number;
  patches: number;
  squares: number;
  grids: number;
}

export interface DatasetListing {
  datasets: DatasetInfo[];
  budgets: number[];
  any_budget: boolean;
}

export interface SelectionRecord {
  hole_id: string;
  ctf: number;
  is_low: boolean;
  at: string;
}

export interface SessionInfo {
  id: string;
  dataset_id: string;
  budget: number;
  budget_minutes: number;
  mode: string;
  score: number;
  remaining: number;
  selections: SelectionRecord[];
}

export interface HoleView {
  hole_id: string;
  x: number;
  y: number;
  state: "unknown" | "revealed";
  ctf?: number;
  is_low?: boolean;
}

export interface PatchView {
  patch_id: string;
  square_id?: string;
  grid_id?: string;
  holes: HoleView[];
}

export interface PatchRef {
  patch_id: string;
  square_id?: string;
  grid_id?: string;
  holes: number;
}

export interface SelectResult {
  hole_id: string;
  ctf: number;
  is_low: boolean;
  score: number;
  remaining: number;
}

export interface Summary {
  session_id: string;
  score: number;
  recomputed_score: number;
  budget: number;
  complete: boolean;
  selections: SelectionRecord[];
  cumulative_scores: number[];
  percentile: number;
  cohort_size: number;
}

export interface AgentComparison {
  mode: string;
  dataset_id: string;
  budget: number;
  budget_minutes: number;
  score: number;
  selections_used: number;
  cumulative_scores: number[];
}

export type PayloadAuditor = (payload: unknown, url: string) => void;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export class BenchClient {
  private auditors: PayloadAuditor[] = [];

  constructor(
    public readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  addAuditor(auditor: PayloadAuditor): void {
    this.auditors.push(auditor);
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const url = `${this.baseUrl}${path}`;
    const response = await this.fetchImpl(url, {
      method,
      headers: body !== undefined ? { "Content-Type": "application/json" } : undefined,
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    const payload = await response.json();
    for (const audit of this.auditors) {
      audit(payload, url);
    }
    if (!response.ok) {
      const detail = (payload as { detail?: string }).detail ?? "request failed";
      throw new ApiError(response.status, detail);
    }
    return payload as T;
  }

  health(): Promise<{ status: string; version: string; agent_loaded: boolean }> {
    return this.request("GET", "/v1/health");
  }

  datasets(): Promise<DatasetListing> {
    return this.request("GET", "/v1/datasets");
  }

  createSession(datasetId: string, budget: number): Promise<SessionInfo> {
    return this.request("POST", "/v1/sessions", { dataset_id: datasetId, budget });
  }

  session(id: string): Promise<SessionInfo> {
    return this.request("GET", `/v1/sessions/${id}`);
  }

  atlas(sessionId: string): Promise<{ grids?: AtlasGrid[]; patches?: PatchRef[]; patches_only: boolean }> {
    return this.request("GET", `/v1/sessions/${sessionId}/atlas`);
  }

  view(sessionId: string, patchId: string): Promise<PatchView> {
    return this.request("GET", `/v1/sessions/${sessionId}/view?patch=${encodeURIComponent(patchId)}`);
  }

  select(sessionId: string, holeId: string): Promise<SelectResult> {
    return this.request("POST", `/v1/sessions/${sessionId}/select`, { hole_id: holeId });
  }

  summary(sessionId: string): Promise<Summary> {
    return this.request("GET", `/v1/sessions/${sessionId}/summary`);
  }

  compareAgent(datasetId: string, budget: number): Promise<AgentComparison> {
    return this.request("POST", "/v1/compare", { dataset_id: datasetId, budget });
  }
}

export interface AtlasGrid {
  grid_id: string;
  squares: { square_id: string; patches: { patch_id: string; holes: number }[] }[];
}

/**
 * Auditor asserting that every ground-truth field (`ctf`, `is_low`) in a
 * payload belongs to a hole this session has already paid a selection
 * for.  Only a select response legitimately reveals a hole; any other
 * payload carrying ground truth for an unrevealed hole trips the audit.
 */
export function makeCtfAuditor(revealed: Set<string>): PayloadAuditor {
  const walk = (node: unknown, url: string, isReveal: boolean): void => {
    if (Array.isArray(node)) {
      for (const item of node) walk(item, url, isReveal);
      return;
    }
    if (node === null || typeof node !== "object") return;
    const obj = node as Record<string, unknown>;
    if ("ctf" in obj || "is_low" in obj) {
      const holeId = typeof obj.hole_id === "string" ? obj.hole_id : undefined;
      if (holeId === undefined) {
        throw new Error(`payload from ${url} carries ground truth without a hole_id`);
      }
      if (isReveal) {
        revealed.add(holeId);
      } else if (!revealed.has(holeId)) {
        throw new Error(`payload from ${url} leaks ground truth of unrevealed hole ${holeId}`);
      }
    }
    for (const value of Object.values(obj)) walk(value, url, isReveal);
  };
  return (payload, url) => walk(payload, url, url.endsWith("/select"));
}

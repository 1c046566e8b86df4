/** Typed client for the verification service HTTP API. */

export interface Setup {
  id: string;
  app_ref: string;
  created_at: string;
  requirement_count: number;
}

export interface Criterion {
  id: string;
  text: string;
  verdict: string;
  explanation: string;
  evidence: number[];
}

export interface Requirement {
  id: string;
  title: string;
  description: string;
  state: string;
  criteria: Criterion[];
  test_data: { key: string; value: string }[];
}

export interface RunStatus {
  run_id: string;
  status: string;
  failure_reason: string | null;
}

export interface TrajectoryStep {
  index: number;
  observation: { rendering: string; state_hash: string; step_index: number };
  reasoning: string;
  action: string;
  usage: { input_tokens: number; output_tokens: number };
}

export interface TrajectoryPage {
  run_id: string;
  page: number;
  page_size: number;
  total_steps: number;
  total_pages: number;
  steps: TrajectoryStep[];
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: body !== undefined ? { "Content-Type": "application/json" } : undefined,
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    if (!response.ok) {
      let detail = `${response.status}`;
      try {
        const payload = await response.json();
        detail = payload.detail ?? JSON.stringify(payload);
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  listSetups(): Promise<Setup[]> {
    return this.request("GET", "/api/setups");
  }

  createSetup(appRef: string, requirements: string): Promise<{ id: string }> {
    return this.request("POST", "/api/setups", { app_ref: appRef, requirements });
  }

  listRequirements(setupId: string): Promise<Requirement[]> {
    return this.request("GET", `/api/setups/${setupId}/requirements`);
  }

  verify(setupId: string, requirementIds: string[], parallelism = 2): Promise<{ run_ids: string[] }> {
    return this.request("POST", `/api/setups/${setupId}/verify`, {
      requirement_ids: requirementIds,
      parallelism,
    });
  }

  runStatus(runId: string): Promise<RunStatus> {
    return this.request("GET", `/api/runs/${runId}/status`);
  }

  trajectoryPage(runId: string, page: number, pageSize = 50): Promise<TrajectoryPage> {
    return this.request("GET", `/api/runs/${runId}/trajectory?page=${page}&page_size=${pageSize}`);
  }

  /** All steps of a run, walking every page in order. */
  async fullTrajectory(runId: string): Promise<TrajectoryStep[]> {
    const steps: TrajectoryStep[] = [];
    let page = 1;
    for (;;) {
      const body = await this.trajectoryPage(runId, page);
      steps.push(...body.steps);
      if (page >= body.total_pages) break;
      page += 1;
    }
    return steps;
  }
}

export const TERMINAL_STATUSES = new Set(["succeeded", "failed"]);

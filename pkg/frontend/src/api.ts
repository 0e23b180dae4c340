/**
 * Typed client for the dosefind trial-session HTTP API.
 *
 * Every decision comes from the server; this module only moves JSON.
 */

export type DesignKind = 'interval' | 'point' | 'crm';

export interface DesignSpecInput {
  kind: DesignKind;
  p: number;
  m: number;
  cohort?: number;
  start?: number;
  dp1?: number;
  dp2?: number;
  skeleton?: number[];
}

export interface LevelRow {
  level: number;
  n: number;
  tox: number;
  raw: number | null;
  raw_ratio: string | null;
  monotonized: number | null;
  model?: number | null;
  skeleton?: number;
}

export interface CreateResponse {
  id: string;
  next_dose: number;
  decision_reason: string;
}

export interface OutcomesResponse {
  next_dose: number;
  decision_reason: string;
  outcomes_recorded: number[];
  estimates: LevelRow[];
}

export interface SessionView {
  id: string;
  created: string;
  status: 'active' | 'closed';
  spec: DesignSpecInput & { cohort: number; start: number };
  simulation_assist: boolean;
  levels: LevelRow[];
  history: Array<[number, number]>;
  audit: Array<{ ts: string; dose: number; outcomes: number[] }>;
  next_dose: number;
  decision_reason: string;
  band?: { lo: number; hi: number };
}

export interface CloseResponse {
  recommended_mtd: number;
  status: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: unknown,
  ) {
    super(typeof detail === 'string' ? detail : JSON.stringify(detail));
    this.name = 'ApiError';
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const res = await fetch(`${base}${path}`, {
    headers: { 'Content-Type': 'application/json' },
    ...init,
  });
  if (!res.ok) {
    let detail: unknown = res.statusText;
    try {
      detail = ((await res.json()) as { detail?: unknown }).detail ?? detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(res.status, detail);
  }
  return (await res.json()) as T;
}

export class TrialClient {
  constructor(private readonly base: string = '') {}

  createSession(spec: DesignSpecInput): Promise<CreateResponse> {
    return request(this.base, '/sessions', {
      method: 'POST',
      body: JSON.stringify({ spec }),
    });
  }

  getSession(id: string): Promise<SessionView> {
    return request(this.base, `/sessions/${id}`);
  }

  submitOutcomes(id: string, dose: number, outcomes: number[]): Promise<OutcomesResponse> {
    return request(this.base, `/sessions/${id}/outcomes`, {
      method: 'POST',
      body: JSON.stringify({ dose, outcomes }),
    });
  }

  closeSession(id: string): Promise<CloseResponse> {
    return request(this.base, `/sessions/${id}/close`, { method: 'POST' });
  }
}

/**
 * Typed client for the interaction service.
 *
 * Every shape here mirrors the service's JSON verbatim; the UI never
 * derives or recomputes what the service already provides.
 */

export type ItemState =
  | "pending"
  | "auto-executed"
  | "awaiting-judgment"
  | "accepted"
  | "rejected"
  | "executed"
  | "abstained";

export type SessionMode = "confirm-chosen" | "confirm-reparsed" | "select";

export interface SelectionCandidate {
  tokens: string[];
  confidence: number;
  gloss: string;
}

export interface Judgment {
  worker_id: string;
  accept: boolean;
}

export interface DecisionRecord {
  id: string;
  confidence: number;
  policy: string;
  decision: "execute" | "abstain";
  executed_tokens?: string[];
  candidate_correct: boolean;
  gloss?: string;
  judgment?: boolean;
}

export interface Execution {
  status: "ok" | "fault" | "skipped";
  value?: unknown;
  code?: string;
  message?: string;
  reason?: string;
}

export interface Item {
  item_id: string;
  context_user: string | null;
  context_agent: string | null;
  utterance: string;
  predicted_tokens: string[];
  terminated: boolean;
  confidence: number;
  gold_tokens: string[];
  state: ItemState;
  gloss: string | null;
  candidate_tokens: string[] | null;
  candidate_correct: boolean;
  judgments: Judgment[];
  unanimous: boolean | null;
  candidates: SelectionCandidate[] | null;
  chosen_index: number | null;
  rewrite: string | null;
  provenance: "selected" | "rewritten" | null;
  record: DecisionRecord | null;
  execution: Execution | null;
}

export interface SessionSummary {
  session_id: string;
  mode: SessionMode;
  tau: number;
  quorum: number;
  seed: number;
  n_items: number;
  states: Record<string, number>;
}

export interface Report {
  total: number;
  executed: number;
  coverage: number;
  risk: number;
  precision: number;
  recall: number;
  f1: number;
  f0_5: number;
  false_positives: number;
  no_executions: boolean;
}

export interface CreateSessionRequest {
  mode: SessionMode;
  tau: number;
  split?: string;
  offset?: number;
  limit?: number | null;
  quorum?: number;
  seed?: number | null;
}

export type SelectionAction = { index: number } | { rewrite: string };

/** Service-side failure, carrying the wire error code. */
export class ServiceError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

async function parseOrThrow<T>(response: Response): Promise<T> {
  const payload = await response.json();
  if (!response.ok) {
    const code = typeof payload?.code === "string" ? payload.code : "unknown";
    const message =
      typeof payload?.message === "string" ? payload.message : response.statusText;
    throw new ServiceError(code, message, response.status);
  }
  return payload as T;
}

export class ServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = (input, init) =>
      fetch(input, init),
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchImpl(this.url(path));
    return parseOrThrow<T>(response);
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchImpl(this.url(path), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return parseOrThrow<T>(response);
  }

  createSession(request: CreateSessionRequest): Promise<SessionSummary> {
    return this.post("/sessions", request);
  }

  getSession(sid: string): Promise<SessionSummary> {
    return this.get(`/sessions/${sid}`);
  }

  async listItems(sid: string, state?: ItemState): Promise<Item[]> {
    const query = state ? `?state=${encodeURIComponent(state)}` : "";
    const payload = await this.get<{ items: Item[] }>(
      `/sessions/${sid}/items${query}`,
    );
    return payload.items;
  }

  getItem(sid: string, iid: string): Promise<Item> {
    return this.get(`/sessions/${sid}/items/${iid}`);
  }

  submitJudgment(
    sid: string,
    iid: string,
    workerId: string,
    accept: boolean,
  ): Promise<Item> {
    return this.post(`/sessions/${sid}/items/${iid}/judgments`, {
      worker_id: workerId,
      accept,
    });
  }

  submitSelection(
    sid: string,
    iid: string,
    action: SelectionAction,
  ): Promise<Item> {
    return this.post(`/sessions/${sid}/items/${iid}/selection`, action);
  }

  getReport(sid: string): Promise<Report> {
    return this.get(`/sessions/${sid}/report`);
  }

  async getExport(sid: string): Promise<DecisionRecord[]> {
    const payload = await this.get<{ records: DecisionRecord[] }>(
      `/sessions/${sid}/export`,
    );
    return payload.records;
  }
}

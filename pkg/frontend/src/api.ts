// Typed client for the review service. Shapes mirror the committed contract
// in api-schema.json; every number shown in the UI comes from these responses.

export interface CostView {
  absolute_seconds: number;
  v_t: number;
  v_d: number;
  v_v: number;
  baseline_typing_seconds: number | null;
  relative_to_typing: number | null;
}

export interface SessionSnapshot {
  clusters_total: number;
  clusters_pending: number;
  clusters_resolved: number;
  members: number;
  cost: CostView;
  dictionary_mode: string;
  dictionary_size: number;
  method_tag: string;
}

export interface ClusterSummary {
  id: number;
  size: number;
  modal_prediction: string;
  flagged_count: number;
  status: "pending" | "resolved";
}

export interface SuggestionView {
  word: string;
  distance: number;
  rank: number;
}

export interface MemberView {
  id: string;
  prediction: string;
  image: string | null;
  label: string | null;
  source: string | null;
}

export interface ClusterDetail {
  id: number;
  size: number;
  status: "pending" | "resolved";
  modal_prediction: string;
  suggestions: SuggestionView[];
  members: MemberView[];
}

export interface ActionBody {
  kind: "verify" | "select" | "type";
  label: string;
  suggestion_rank?: number | null;
}

export interface ActionOutcome {
  cluster_id: number;
  resolved: boolean;
  cost: CostView;
}

export class ApiError extends Error {
  readonly status: number;
  readonly detail: string;

  constructor(status: number, detail: string) {
    super(`${status}: ${detail}`);
    this.name = "ApiError";
    this.status = status;
    this.detail = detail;
  }
}

/** What the app needs from the service; ReviewApi is the live implementation. */
export interface ReviewClient {
  session(): Promise<SessionSnapshot>;
  clusters(status?: "pending" | "resolved"): Promise<ClusterSummary[]>;
  cluster(id: number): Promise<ClusterDetail>;
  clusterAction(id: number, body: ActionBody): Promise<ActionOutcome>;
  memberAction(instanceId: string, body: ActionBody): Promise<ActionOutcome>;
  exportUrl(): string;
}

export class ReviewApi implements ReviewClient {
  private readonly base: string;
  private readonly token: string | undefined;

  constructor(base = "", token?: string) {
    this.base = base;
    this.token = token;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const headers = new Headers(init?.headers);
    if (this.token !== undefined) {
      headers.set("x-review-token", this.token);
    }
    if (init?.body !== undefined) {
      headers.set("content-type", "application/json");
    }
    const res = await fetch(this.base + path, { ...init, headers });
    if (!res.ok) {
      let detail = res.statusText;
      try {
        const payload = await res.json();
        if (typeof payload.detail === "string") {
          detail = payload.detail;
        } else if (payload.detail !== undefined) {
          detail = JSON.stringify(payload.detail);
        }
      } catch {
        // Non-JSON error body; keep the status text.
      }
      throw new ApiError(res.status, detail);
    }
    return (await res.json()) as T;
  }

  session(): Promise<SessionSnapshot> {
    return this.request<SessionSnapshot>("/api/session");
  }

  clusters(status?: "pending" | "resolved"): Promise<ClusterSummary[]> {
    const query = status === undefined ? "" : `?status=${status}`;
    return this.request<ClusterSummary[]>(`/api/clusters${query}`);
  }

  cluster(id: number): Promise<ClusterDetail> {
    return this.request<ClusterDetail>(`/api/clusters/${id}`);
  }

  clusterAction(id: number, body: ActionBody): Promise<ActionOutcome> {
    return this.request<ActionOutcome>(`/api/clusters/${id}/action`, {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  memberAction(instanceId: string, body: ActionBody): Promise<ActionOutcome> {
    return this.request<ActionOutcome>(`/api/members/${instanceId}/action`, {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  exportUrl(): string {
    return `${this.base}/api/export`;
  }
}

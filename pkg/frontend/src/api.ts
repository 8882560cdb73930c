/**
 * Thin typed client over the run service. GETs use ETag polling so the 2s
 * refresh loop is cheap; POST failures surface status + message for inline
 * display instead of throwing.
 */

import type {
  DecisionCommand,
  ManifestPayload,
  RoundReviewsPayload,
  RunSummary,
  TopicsSnapshot,
  TrajectoryPayload,
} from "./types.js";

export interface PostResult {
  ok: boolean;
  status: number;
  error?: string;
}

interface CacheEntry {
  etag: string;
  data: unknown;
}

export class ApiClient {
  private cache = new Map<string, CacheEntry>();

  constructor(
    private baseUrl: string = "",
    private token: string | null = null,
  ) {}

  private headers(extra: Record<string, string> = {}): Record<string, string> {
    const headers: Record<string, string> = { ...extra };
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    return headers;
  }

  private async getJson<T>(path: string): Promise<T> {
    const cached = this.cache.get(path);
    const headers = this.headers(cached ? { "If-None-Match": cached.etag } : {});
    const response = await fetch(this.baseUrl + path, { headers });
    if (response.status === 304 && cached) {
      return cached.data as T;
    }
    if (!response.ok) {
      throw new Error(`GET ${path} failed with ${response.status}`);
    }
    const data = (await response.json()) as T;
    const etag = response.headers.get("etag");
    if (etag) this.cache.set(path, { etag, data });
    return data;
  }

  listRuns(): Promise<RunSummary[]> {
    return this.getJson("/runs");
  }

  getState(dir: string): Promise<ManifestPayload> {
    return this.getJson(`/runs/${encodeURIComponent(dir)}/state`);
  }

  getTopics(dir: string): Promise<TopicsSnapshot> {
    return this.getJson(`/runs/${encodeURIComponent(dir)}/topics`);
  }

  getTrajectory(dir: string): Promise<TrajectoryPayload> {
    return this.getJson(`/runs/${encodeURIComponent(dir)}/trajectory`);
  }

  getRoundReviews(dir: string, round: number): Promise<RoundReviewsPayload> {
    return this.getJson(`/runs/${encodeURIComponent(dir)}/rounds/${round}/reviews`);
  }

  private async post(path: string, body: unknown): Promise<PostResult> {
    const response = await fetch(this.baseUrl + path, {
      method: "POST",
      headers: this.headers({ "Content-Type": "application/json" }),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (response.ok) return { ok: true, status: response.status };
    let error = `HTTP ${response.status}`;
    try {
      const payload = (await response.json()) as { error?: string };
      if (payload.error) error = payload.error;
    } catch {
      // non-JSON error body; keep the status text
    }
    return { ok: false, status: response.status, error };
  }

  postDecision(dir: string, command: DecisionCommand): Promise<PostResult> {
    return this.post(`/runs/${encodeURIComponent(dir)}/topics/decision`, command);
  }

  postAbort(dir: string): Promise<PostResult> {
    return this.post(`/runs/${encodeURIComponent(dir)}/abort`, {});
  }
}

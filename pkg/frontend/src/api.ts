/** Typed client for the engine's HTTP API.
 *
 * The editor talks to the engine exclusively through these six endpoints;
 * errors arrive as `{code, stage, message}` bodies and are rethrown as
 * ApiError so callers can surface them inline.
 */

import type { LayoutJson } from "./layout-file.js";

export type JobState = "queued" | "running:sog" | "running:cc" | "done" | "failed";

export interface EngineErrorBody {
  code: string;
  stage: string;
  message: string;
}

export interface JobSnapshot {
  job_id: string;
  state: JobState;
  objects: Record<string, string>;
  error: EngineErrorBody | null;
  job_dir: string | null;
  source_job_id?: string;
}

export interface HealthResponse {
  status: string;
  version: string;
}

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly stage: string;

  constructor(status: number, body: Partial<EngineErrorBody>) {
    super(body.message ?? `request failed with status ${status}`);
    this.name = "ApiError";
    this.status = status;
    this.code = body.code ?? "";
    this.stage = body.stage ?? "";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class EngineClient {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl = "", fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn ?? ((input, init) => globalThis.fetch(input, init));
  }

  private async requestJson<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) {
      throw new ApiError(response.status, await errorBody(response));
    }
    return (await response.json()) as T;
  }

  async health(): Promise<HealthResponse> {
    return this.requestJson<HealthResponse>("/api/health");
  }

  /** Submit a layout (plus optional config overrides); resolves to the job id. */
  async submitJob(layout: LayoutJson, overrides: Record<string, unknown> = {}): Promise<string> {
    const body = JSON.stringify({ layout, overrides });
    const out = await this.requestJson<{ job_id: string }>("/api/jobs", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body,
    });
    return out.job_id;
  }

  async getJob(jobId: string): Promise<JobSnapshot> {
    return this.requestJson<JobSnapshot>(`/api/jobs/${encodeURIComponent(jobId)}`);
  }

  /** Rerun one object of a finished job; resolves to the new job id. */
  async regenerateObject(jobId: string, objectId: string, seed?: number): Promise<string> {
    const out = await this.requestJson<{ job_id: string }>(
      `/api/jobs/${encodeURIComponent(jobId)}/objects/${encodeURIComponent(objectId)}/regenerate`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(seed === undefined ? {} : { seed }),
      },
    );
    return out.job_id;
  }

  sceneImageUrl(jobId: string): string {
    return `${this.baseUrl}/api/jobs/${encodeURIComponent(jobId)}/image`;
  }

  objectImageUrl(jobId: string, objectId: string): string {
    return (
      `${this.baseUrl}/api/jobs/${encodeURIComponent(jobId)}` +
      `/objects/${encodeURIComponent(objectId)}/image`
    );
  }

  private async fetchPng(url: string): Promise<Uint8Array> {
    const response = await this.fetchFn(url);
    if (!response.ok) {
      throw new ApiError(response.status, await errorBody(response));
    }
    return new Uint8Array(await response.arrayBuffer());
  }

  async fetchSceneImage(jobId: string): Promise<Uint8Array> {
    return this.fetchPng(this.sceneImageUrl(jobId));
  }

  async fetchObjectImage(jobId: string, objectId: string): Promise<Uint8Array> {
    return this.fetchPng(this.objectImageUrl(jobId, objectId));
  }
}

async function errorBody(response: Response): Promise<Partial<EngineErrorBody>> {
  try {
    const data = (await response.json()) as Record<string, unknown>;
    return {
      code: typeof data.code === "string" ? data.code : "",
      stage: typeof data.stage === "string" ? data.stage : "",
      message: typeof data.message === "string" ? data.message : JSON.stringify(data),
    };
  } catch {
    return {};
  }
}

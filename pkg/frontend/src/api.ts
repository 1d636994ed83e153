// Thin fetch client for the control API.

import type {
  ApiErrorBody, ConfigSchema, EventsPayload, RunStatusPayload,
  StartRunResponse,
} from "./types.js";

export class ApiError extends Error {
  readonly status: number;
  readonly body: ApiErrorBody;

  constructor(status: number, body: ApiErrorBody) {
    super(body.message);
    this.status = status;
    this.body = body;
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(path, init);
  if (!resp.ok) {
    let body: ApiErrorBody;
    try {
      body = await resp.json();
    } catch {
      body = { code: "http_error", message: `HTTP ${resp.status}` };
    }
    throw new ApiError(resp.status, body);
  }
  return resp.json() as Promise<T>;
}

export function fetchSchema(): Promise<ConfigSchema> {
  return request("/api/v1/config-schema");
}

export function startRun(config: Record<string, unknown>): Promise<StartRunResponse> {
  return request("/api/v1/runs", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(config),
  });
}

export function listRuns(): Promise<{ runs: RunStatusPayload[] }> {
  return request("/api/v1/runs");
}

export function getStatus(runId: string): Promise<RunStatusPayload> {
  return request(`/api/v1/runs/${runId}`);
}

export function pollEvents(runId: string, since: number,
                           waitS = 20): Promise<EventsPayload> {
  return request(`/api/v1/runs/${runId}/events?since=${since}&wait=${waitS}`);
}

export function stopRun(runId: string): Promise<{ run_id: string; phase: string }> {
  return request(`/api/v1/runs/${runId}/stop`, { method: "POST" });
}

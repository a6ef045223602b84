// Thin fetch wrappers around the /api/* contract. Any non-2xx response is
// raised as an ApiError carrying the parsed JSON body so the caller can show
// the service's own error message.

import type {
  AlertsResponse, CompareResponse, ComponentsInfo, ExplainResponse,
  StateDetail, StatesPage,
} from "./types.js";

export class ApiError extends Error {
  status: number;
  body: unknown;

  constructor(status: number, body: unknown) {
    super(`service returned ${status}`);
    this.status = status;
    this.body = body;
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(path, init);
  let body: unknown = null;
  try {
    body = await resp.json();
  } catch {
    body = null;
  }
  if (!resp.ok) {
    throw new ApiError(resp.status, body);
  }
  return body as T;
}

function post<T>(path: string, payload: unknown): Promise<T> {
  return request<T>(path, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(payload),
  });
}

export function fetchComponents(): Promise<ComponentsInfo> {
  return request("/api/components");
}

export function fetchStates(offset = 0, limit = 50): Promise<StatesPage> {
  return request(`/api/states?offset=${offset}&limit=${limit}`);
}

export function fetchStateDetail(stateId: string): Promise<StateDetail> {
  return request(`/api/states/${encodeURIComponent(stateId)}`);
}

export function postExplain(stateId: string, action: number,
                            method: string): Promise<ExplainResponse> {
  return post("/api/explain", { state_id: stateId, action, method });
}

export function postCompare(stateId: string, actions: number[],
                            method: string): Promise<CompareResponse> {
  return post("/api/compare", { state_id: stateId, actions, method });
}

export function fetchAlerts(method: string): Promise<AlertsResponse> {
  return request(`/api/alerts?method=${encodeURIComponent(method)}`);
}

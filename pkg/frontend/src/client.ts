/** Thin typed client for the /v1 endpoints. */

import type { ApiErrorBody, ForecastRequest, ForecastResponse, Meta } from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
    readonly fields?: Record<string, string>,
  ) {
    super(message);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function errorFrom(resp: Response): Promise<ApiError> {
  let body: ApiErrorBody | null = null;
  try {
    body = (await resp.json()) as ApiErrorBody;
  } catch {
    // non-JSON error body; fall through to the status line
  }
  const detail = body?.fields
    ? Object.entries(body.fields).map(([k, v]) => `${k}: ${v}`).join("; ")
    : body?.error ?? resp.statusText;
  return new ApiError(resp.status, detail, body?.fields);
}

export class ForecastClient {
  constructor(
    private readonly baseUrl = "",
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  async health(): Promise<{ status: string; checkpointLoaded: boolean }> {
    const resp = await this.fetchFn(`${this.baseUrl}/v1/health`);
    if (!resp.ok) throw await errorFrom(resp);
    return (await resp.json()) as { status: string; checkpointLoaded: boolean };
  }

  async meta(): Promise<Meta> {
    const resp = await this.fetchFn(`${this.baseUrl}/v1/meta`);
    if (!resp.ok) throw await errorFrom(resp);
    return (await resp.json()) as Meta;
  }

  async forecast(request: ForecastRequest): Promise<ForecastResponse> {
    const resp = await this.fetchFn(`${this.baseUrl}/v1/forecast`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
    });
    if (!resp.ok) throw await errorFrom(resp);
    return (await resp.json()) as ForecastResponse;
  }
}

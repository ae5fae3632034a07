/** Typed client for the backend's HTTP JSON API. The studio consumes only
 * these endpoints; no analysis logic lives in the browser.
 */

import type {
  ChartSpec, CorrectionBody, CorrectionMode, ResultTableJson, TraceVersionJson,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
    readonly payload: unknown = null,
  ) {
    super(message);
  }
}

async function expectJson<T>(response: Response): Promise<T> {
  const body = await response.json().catch(() => null);
  if (!response.ok) {
    const detail = (body as { error?: string } | null)?.error ?? response.statusText;
    throw new ApiError(detail, response.status, body);
  }
  return body as T;
}

export class StudioApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, "")}${path}`;
  }

  async createSession(database: string): Promise<string> {
    const response = await this.fetchFn(this.url("/sessions"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ database }),
    });
    const payload = await expectJson<{ session_id: string }>(response);
    return payload.session_id;
  }

  async submitQuery(sessionId: string, query: string): Promise<TraceVersionJson> {
    const response = await this.fetchFn(this.url(`/sessions/${sessionId}/query`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ query }),
    });
    return expectJson<TraceVersionJson>(response);
  }

  async getTrace(sessionId: string, version?: number): Promise<TraceVersionJson> {
    const suffix = version === undefined ? "" : `?version=${version}`;
    const response = await this.fetchFn(this.url(`/sessions/${sessionId}/trace${suffix}`));
    return expectJson<TraceVersionJson>(response);
  }

  async stepData(sessionId: string, nodeId: string): Promise<ResultTableJson> {
    const response = await this.fetchFn(
      this.url(`/sessions/${sessionId}/steps/${nodeId}/data`),
    );
    return expectJson<ResultTableJson>(response);
  }

  async correct(sessionId: string, body: CorrectionBody): Promise<TraceVersionJson> {
    const response = await this.fetchFn(this.url(`/sessions/${sessionId}/correct`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return expectJson<TraceVersionJson>(response);
  }

  async exportVql(sessionId: string): Promise<string> {
    const response = await this.fetchFn(this.url(`/sessions/${sessionId}/export?kind=vql`));
    if (!response.ok) throw new ApiError(response.statusText, response.status);
    return response.text();
  }

  /** Raw body text so a client-side download byte-matches the server export. */
  async exportChartSpecText(sessionId: string): Promise<string> {
    const response = await this.fetchFn(
      this.url(`/sessions/${sessionId}/export?kind=chart-spec`),
    );
    if (!response.ok) throw new ApiError(response.statusText, response.status);
    return response.text();
  }

  async exportChartSpec(sessionId: string): Promise<ChartSpec> {
    return JSON.parse(await this.exportChartSpecText(sessionId)) as ChartSpec;
  }
}

/** Client-side gating for the correction form: manual mode needs a
 * non-empty preference, self mode forbids one. */
export function canSubmitCorrection(mode: CorrectionMode, preference: string): boolean {
  if (mode === "manual") return preference.trim().length > 0;
  return preference.trim().length === 0;
}

export function correctionBody(
  nodeId: string,
  mode: CorrectionMode,
  preference: string,
): CorrectionBody {
  if (!canSubmitCorrection(mode, preference)) {
    throw new Error("correction form is incomplete for the chosen mode");
  }
  return mode === "manual"
    ? { node_id: nodeId, mode, preference: preference.trim() }
    : { node_id: nodeId, mode };
}

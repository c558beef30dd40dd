// Thin client over the planlens HTTP service. fetch is injectable for tests.

import type { AnswerPayload, DriftResponse, SessionInfo } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiFailure extends Error {
  readonly status: number;
  readonly code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.status = status;
    this.code = code;
  }
}

async function readError(response: Response): Promise<ApiFailure> {
  let code = "http_error";
  let message = `request failed with status ${response.status}`;
  try {
    const body = await response.json();
    if (body?.error) {
      code = body.error.code ?? code;
      message = body.error.message ?? message;
    }
  } catch {
    // non-JSON error body; keep the generic message
  }
  return new ApiFailure(response.status, code, message);
}

export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl = "", fetchImpl: FetchLike = (input, init) => fetch(input, init)) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchImpl = fetchImpl;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) throw await readError(response);
    return (await response.json()) as T;
  }

  async uploadDataset(network: File, demand: File, history?: File): Promise<string> {
    const form = new FormData();
    form.append("network", network);
    form.append("demand", demand);
    if (history) form.append("history", history);
    const response = await this.fetchImpl(this.baseUrl + "/datasets", {
      method: "POST",
      body: form,
    });
    if (!response.ok) throw await readError(response);
    const body = await response.json();
    return body.dataset_id as string;
  }

  async createSession(datasetId: string): Promise<SessionInfo> {
    return this.postJson<SessionInfo>("/sessions", { dataset_id: datasetId });
  }

  async ask(sessionId: string, question: string): Promise<AnswerPayload> {
    return this.postJson<AnswerPayload>(`/sessions/${sessionId}/ask`, { question });
  }

  async runScenario(sessionId: string, dsl: string): Promise<unknown> {
    return this.postJson(`/sessions/${sessionId}/scenario`, { dsl });
  }

  async drift(a: File, b: File): Promise<DriftResponse> {
    const form = new FormData();
    form.append("a", a);
    form.append("b", b);
    const response = await this.fetchImpl(this.baseUrl + "/drift", {
      method: "POST",
      body: form,
    });
    if (!response.ok) throw await readError(response);
    return (await response.json()) as DriftResponse;
  }

  async supportedQuestions(): Promise<string[]> {
    const response = await this.fetchImpl(this.baseUrl + "/supported-questions");
    if (!response.ok) throw await readError(response);
    const body = await response.json();
    return body.questions as string[];
  }
}

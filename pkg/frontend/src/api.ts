// Thin typed client over the workbench REST API. Every mutation carries a
// fresh request id so retries are replay-safe on the server.

import type {
  AnnotationOut,
  ApiErrorBody,
  DocumentView,
  JobView,
  ProjectSummary,
  RankedResponse,
  SearchResponse,
  Span,
  ThemesResponse,
  ThemeView,
} from "./types.js";

const BASE = "/api/v1";

export class ApiError extends Error {
  code: string;
  status: number;

  constructor(status: number, body: ApiErrorBody) {
    super(body.message);
    this.code = body.code;
    this.status = status;
  }
}

function requestId(): string {
  if (typeof crypto !== "undefined" && "randomUUID" in crypto) {
    return crypto.randomUUID();
  }
  return `req-${Date.now()}-${Math.floor(Math.random() * 1e9)}`;
}

async function call<T>(
  method: string,
  path: string,
  body?: unknown,
  raw?: string,
): Promise<T> {
  const headers: Record<string, string> = {};
  let payload: string | undefined;
  if (raw !== undefined) {
    headers["Content-Type"] = "application/x-ndjson";
    payload = raw;
  } else if (body !== undefined) {
    headers["Content-Type"] = "application/json";
    payload = JSON.stringify(body);
  }
  if (method !== "GET") {
    headers["X-Request-Id"] = requestId();
  }
  const resp = await fetch(`${BASE}${path}`, { method, headers, body: payload });
  const text = await resp.text();
  const data = text ? JSON.parse(text) : null;
  if (!resp.ok) {
    const err: ApiErrorBody =
      data && data.code ? data : { code: "HttpError", message: `HTTP ${resp.status}` };
    throw new ApiError(resp.status, err);
  }
  return data as T;
}

export const api = {
  createProject(name: string): Promise<ProjectSummary> {
    return call("POST", "/projects", { name });
  },
  listProjects(): Promise<{ projects: ProjectSummary[] }> {
    return call("GET", "/projects");
  },
  getProject(pid: string): Promise<ProjectSummary> {
    return call("GET", `/projects/${pid}`);
  },
  importDocuments(pid: string, jsonl: string): Promise<{ documents: number }> {
    return call("POST", `/projects/${pid}/documents:import`, undefined, jsonl);
  },
  searchDocuments(
    pid: string,
    params: { terms?: string; thread?: string; limit?: number; offset?: number },
  ): Promise<SearchResponse> {
    const q = new URLSearchParams();
    if (params.terms) q.set("terms", params.terms);
    if (params.thread) q.set("thread", params.thread);
    if (params.limit !== undefined) q.set("limit", String(params.limit));
    if (params.offset !== undefined) q.set("offset", String(params.offset));
    return call("GET", `/projects/${pid}/documents?${q.toString()}`);
  },
  rankedDocuments(pid: string, themeId: number, limit = 20): Promise<RankedResponse> {
    return call("GET", `/projects/${pid}/documents?topic=${themeId}&limit=${limit}`);
  },
  getDocument(pid: string, docId: string): Promise<DocumentView> {
    return call("GET", `/projects/${pid}/documents/${docId}`);
  },
  applyCode(pid: string, docId: string, span: Span, label: string): Promise<AnnotationOut> {
    return call("POST", `/projects/${pid}/documents/${docId}/codes`, { span, label });
  },
  deleteCode(pid: string, docId: string, codeId: number): Promise<AnnotationOut> {
    return call("DELETE", `/projects/${pid}/documents/${docId}/codes/${codeId}`);
  },
  getThemes(pid: string): Promise<ThemesResponse> {
    return call("GET", `/projects/${pid}/themes`);
  },
  mergeCode(pid: string, themeId: number, codeId: number): Promise<ThemeView> {
    return call("POST", `/projects/${pid}/themes/${themeId}/merge`, { code_id: codeId });
  },
  splitCode(
    pid: string,
    themeId: number,
    codeId: number,
  ): Promise<{ theme: ThemeView; new_theme: ThemeView }> {
    return call("POST", `/projects/${pid}/themes/${themeId}/split`, { code_id: codeId });
  },
  renameTheme(pid: string, themeId: number, name: string): Promise<ThemeView> {
    return call("PATCH", `/projects/${pid}/themes/${themeId}`, { name });
  },
  startTraining(pid: string, overrides: Record<string, unknown> = {}): Promise<JobView> {
    return call("POST", `/projects/${pid}/train`, overrides);
  },
  getJob(pid: string, jobId: string): Promise<JobView> {
    return call("GET", `/projects/${pid}/jobs/${jobId}`);
  },
  topWords(
    pid: string,
    topic: number,
    n = 10,
  ): Promise<{ topic: number; name: string | null; words: { word: string; probability: number }[] }> {
    return call("GET", `/projects/${pid}/topics/${topic}/top-words?n=${n}`);
  },
  explain(
    pid: string,
    docId: string,
    themeId: number,
  ): Promise<{ words: { word: string; spans: Span[]; contribution: number }[] }> {
    return call("GET", `/projects/${pid}/documents/${docId}/explain/${themeId}`);
  },
};

export type Api = typeof api;

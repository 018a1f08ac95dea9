// Payload shapes of the workbench REST API (subset the client uses).

export type Origin = "manual" | "auto" | "deleted";

export type Span = [number, number];

export interface Chip {
  code_id: number;
  label: string;
  origin: Origin;
  spans: Span[];
  occurrences: Span[];
  doc_level: boolean;
}

export interface AnnotationOut {
  ann_id: number;
  doc_id: string;
  code_id: number;
  label: string;
  origin: Origin;
  span: Span;
  version: number | null;
  doc_level: boolean;
  occurrences: Span[];
}

export interface DocumentView {
  doc_id: string;
  text: string;
  thread_id: string;
  author: string | null;
  timestamp: string | null;
  geo: [number, number] | null;
  snapshot_version: number | null;
  annotations: AnnotationOut[];
  chips: Chip[];
}

export interface CodeRef {
  code_id: number;
  label: string;
}

export interface ThemeView {
  theme_id: number;
  name: string;
  codes: CodeRef[];
  topic: number | null;
}

export interface ThemesResponse {
  themes: ThemeView[];
  snapshot_version: number | null;
}

export interface ProjectSummary {
  project_id: string;
  name: string;
  documents: number;
  vocabulary_size: number;
  themes: number;
  codes: number;
  snapshot_version: number | null;
  job: JobView | null;
}

export interface JobView {
  job_id: string;
  project_id: string;
  state: "queued" | "running" | "done" | "failed" | "cancelled";
  version: number | null;
  message: string | null;
  started_at: string | null;
  trace: {
    elbos: number[];
    iterations: number;
    converged: boolean;
    degenerate_rows: number;
  } | null;
}

export interface RankedDocOut {
  doc_id: string;
  score: number;
  snippet: string;
}

export interface RankedResponse {
  documents: RankedDocOut[];
  snapshot_version: number;
}

export interface SearchResponse {
  doc_ids: string[];
}

export interface ApiErrorBody {
  code: string;
  message: string;
}

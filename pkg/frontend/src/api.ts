// Typed client for the semtext HTTP API. All numbers and percentage
// strings come from the server verbatim; the UI never recomputes them.

export interface SearchResult {
  item_id: string;
  doc_id: string;
  rank: number;
  score: number;
  percent: string;
  metadata: Record<string, string>;
}

export interface SearchResponse {
  results: SearchResult[];
}

export interface AskSource {
  doc_id: string;
  chunk_id: string;
  score: number;
  percent: string;
  excerpt: string;
}

export interface AskResponse {
  answer: string;
  sources: AskSource[];
}

export interface LayoutPoint {
  x: number;
  y: number;
  label: string;
  item_id: string;
}

export interface TsneResponse {
  points: LayoutPoint[];
}

export class ApiError extends Error {
  readonly code: string;

  constructor(code: string, message: string) {
    super(message);
    this.code = code;
  }
}

async function post<T>(url: string, body: unknown, signal?: AbortSignal): Promise<T> {
  const response = await fetch(url, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
    signal,
  });
  let payload: unknown = null;
  try {
    payload = await response.json();
  } catch {
    // fall through; handled below
  }
  if (!response.ok) {
    const err = (payload as { error?: { code?: string; message?: string } } | null)?.error;
    throw new ApiError(err?.code ?? `http_${response.status}`, err?.message ?? response.statusText);
  }
  if (payload === null) {
    throw new ApiError("bad_response", "response body was not JSON");
  }
  return payload as T;
}

export class ApiClient {
  constructor(private readonly base: string = "") {}

  search(query: string, topN: number, signal?: AbortSignal): Promise<SearchResponse> {
    return post(`${this.base}/search`, { query, top_n: topN }, signal);
  }

  ask(question: string, signal?: AbortSignal): Promise<AskResponse> {
    return post(`${this.base}/ask`, { question }, signal);
  }

  tsne(perplexity: number, seed: number, signal?: AbortSignal): Promise<TsneResponse> {
    return post(`${this.base}/tsne`, { perplexity, seed }, signal);
  }
}

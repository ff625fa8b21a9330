import type {
  Decomposition,
  GraphDoc,
  HeatmapDoc,
  MetricValues,
  ProjectSummary,
  RunKey,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** Thrown when a newer request for the same endpoint superseded this one. */
export class StaleRequest extends Error {
  constructor(endpoint: string) {
    super(`superseded request to ${endpoint}`);
    this.name = "StaleRequest";
  }
}

export interface CellQuery {
  n: number;
  seed: number;
  alpha: number;
  tau: number;
}

export interface Fetched<T> {
  data: T;
  /** Exact response body; metric displays must use these bytes. */
  text: string;
}

type FetchLike = (
  url: string,
  init: { signal: AbortSignal },
) => Promise<{ ok: boolean; status: number; text(): Promise<string> }>;

const detailOf = (text: string, status: number): string => {
  try {
    const body = JSON.parse(text);
    const detail = body?.detail;
    if (typeof detail === "string") return detail;
    if (detail && typeof detail.message === "string") return detail.message;
  } catch {
    // non-JSON error body; fall through
  }
  return `request failed with status ${status}`;
};

/**
 * Client for the decomposition API. At most one request per endpoint is
 * in flight: starting a new one aborts the previous, and a superseded
 * response is never handed to the caller even if it resolves late.
 */
export class ApiClient {
  private controllers = new Map<string, AbortController>();

  private sequence = new Map<string, number>();

  constructor(
    private base = "",
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(endpoint: string, query?: string): Promise<Fetched<T>> {
    this.controllers.get(endpoint)?.abort();
    const controller = new AbortController();
    this.controllers.set(endpoint, controller);
    const seq = (this.sequence.get(endpoint) ?? 0) + 1;
    this.sequence.set(endpoint, seq);

    const url = this.base + endpoint + (query ? `?${query}` : "");
    let text: string;
    let ok: boolean;
    let status: number;
    try {
      const response = await this.fetchImpl(url, { signal: controller.signal });
      text = await response.text();
      ok = response.ok;
      status = response.status;
    } catch (err) {
      if (controller.signal.aborted) throw new StaleRequest(endpoint);
      throw err;
    }
    if (this.sequence.get(endpoint) !== seq) throw new StaleRequest(endpoint);
    if (!ok) throw new ApiError(status, detailOf(text, status));
    return { data: JSON.parse(text) as T, text };
  }

  private static cellParams(q: CellQuery): URLSearchParams {
    return new URLSearchParams({
      n: String(q.n),
      seed: String(q.seed),
      alpha: String(q.alpha),
      tau: String(q.tau),
    });
  }

  async fetchProject(): Promise<ProjectSummary> {
    return (await this.request<ProjectSummary>("/project")).data;
  }

  async fetchRuns(): Promise<RunKey[]> {
    const { data } = await this.request<{ runs: RunKey[] }>("/runs");
    return data.runs;
  }

  async fetchDecomposition(q: CellQuery): Promise<Decomposition> {
    const params = ApiClient.cellParams(q);
    return (await this.request<Decomposition>("/decomposition", params.toString())).data;
  }

  /** Returns the raw body too so panels can show the server's bytes. */
  async fetchMetrics(q: CellQuery): Promise<Fetched<MetricValues>> {
    return this.request<MetricValues>("/metrics", ApiClient.cellParams(q).toString());
  }

  async fetchGraph(q: CellQuery): Promise<GraphDoc> {
    return (await this.request<GraphDoc>("/graph", ApiClient.cellParams(q).toString())).data;
  }

  async fetchHeatmap(
    n: number,
    seed: number,
    alphas: number[],
    taus: number[],
  ): Promise<HeatmapDoc> {
    const params = new URLSearchParams({
      n: String(n),
      seed: String(seed),
      alphas: alphas.join(","),
      taus: taus.join(","),
    });
    return (await this.request<HeatmapDoc>("/heatmap", params.toString())).data;
  }
}

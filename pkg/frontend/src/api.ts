/** Typed client for the control-center API.
 *
 * The fetch function is injected so tests can point the client at a fixture;
 * the default is the browser's fetch bound to globalThis.
 */

import type {
  ExperimentSummary,
  NetworkNode,
  ValidationReport,
} from "./types.js";

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`${status}: ${detail}`);
    this.name = "ApiError";
  }
}

/** Submission outcomes, one per status code the endpoint can answer with. */
export type SubmitResult =
  | { kind: "accepted"; experimentId: string }
  | { kind: "invalid"; report: ValidationReport }
  | { kind: "busy"; detail: string }
  | { kind: "unreachable"; detail: string };

async function detailOf(res: Response): Promise<string> {
  try {
    const body = (await res.json()) as { detail?: unknown };
    if (typeof body.detail === "string") return body.detail;
    return JSON.stringify(body.detail ?? body);
  } catch {
    return res.statusText || `http ${res.status}`;
  }
}

export class ControlApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) =>
      globalThis.fetch(url, init),
  ) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, "")}${path}`;
  }

  private async getJson<T>(path: string): Promise<T> {
    const res = await this.fetchFn(this.url(path));
    if (!res.ok) throw new ApiError(res.status, await detailOf(res));
    return (await res.json()) as T;
  }

  async health(): Promise<{ status: string; client_id: string }> {
    return this.getJson("/api/health");
  }

  async network(): Promise<NetworkNode[]> {
    const body = await this.getJson<{ nodes: NetworkNode[] }>("/api/network");
    return body.nodes;
  }

  async experiments(): Promise<ExperimentSummary[]> {
    const body = await this.getJson<{ experiments: ExperimentSummary[] }>(
      "/api/experiments",
    );
    return body.experiments;
  }

  async experiment(id: string): Promise<ExperimentSummary> {
    return this.getJson(`/api/experiments/${encodeURIComponent(id)}`);
  }

  async submit(requestDoc: unknown): Promise<SubmitResult> {
    const res = await this.fetchFn(this.url("/api/experiments"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(requestDoc),
    });
    if (res.status === 201) {
      const body = (await res.json()) as { experiment_id: string };
      return { kind: "accepted", experimentId: body.experiment_id };
    }
    if (res.status === 400) {
      const body = (await res.json()) as { validation?: ValidationReport };
      return {
        kind: "invalid",
        report: body.validation ?? { valid: false, errors: [] },
      };
    }
    if (res.status === 409) {
      return { kind: "busy", detail: await detailOf(res) };
    }
    if (res.status === 504) {
      return { kind: "unreachable", detail: await detailOf(res) };
    }
    throw new ApiError(res.status, await detailOf(res));
  }

  /** Asks the control center to pull the final model into its artifact
   * store; resolves to the server-side path. */
  async fetchModel(id: string): Promise<string> {
    const res = await this.fetchFn(
      this.url(`/api/experiments/${encodeURIComponent(id)}/model`),
      { method: "POST" },
    );
    if (!res.ok) throw new ApiError(res.status, await detailOf(res));
    const body = (await res.json()) as { path: string };
    return body.path;
  }
}

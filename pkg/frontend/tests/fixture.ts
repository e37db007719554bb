/** Mock control-center API: the same routes and response shapes as the real
 * service, backed by canned data. Tests drive the client and the views
 * against this single fixture. */

import type { FetchLike } from "../src/api.js";
import type {
  ExperimentSummary,
  NetworkNode,
  ValidationError,
} from "../src/types.js";

export const FIXTURE_NODES: NetworkNode[] = [
  {
    client_id: "parameter-server",
    role: "parameter_server",
    known: true,
    state: "IDLE",
    experiment_id: "exp-1",
    round: 3,
    diagnostic: "",
    heartbeat_interval: 5.0,
    last_seen: new Date(Date.now() - 2_000).toISOString(),
    stale: false,
  },
  {
    client_id: "site-a",
    role: "client_participant",
    known: true,
    state: "TRAINING",
    experiment_id: "exp-2",
    round: 4,
    diagnostic: "",
    heartbeat_interval: 5.0,
    last_seen: new Date(Date.now() - 1_000).toISOString(),
    stale: false,
  },
  {
    client_id: "site-b",
    role: "client_participant",
    known: true,
    state: "IDLE",
    experiment_id: "",
    round: 0,
    diagnostic: "",
    heartbeat_interval: 5.0,
    last_seen: new Date(Date.now() - 4_000).toISOString(),
    stale: false,
  },
  {
    client_id: "site-c",
    role: "client_observer",
    known: true,
    state: "IDLE",
    experiment_id: "",
    round: 0,
    diagnostic: "missed 3 heartbeats",
    heartbeat_interval: 5.0,
    last_seen: new Date(Date.now() - 120_000).toISOString(),
    stale: true,
  },
];

/** Finished run with a skipped middle round, as the CC assembles it from
 * the parameter server's status reports. */
export const FIXTURE_EXPERIMENT: ExperimentSummary = {
  experiment_id: "exp-1",
  status: "completed",
  rounds_total: 3,
  algorithm: "fedavg",
  last_round: 3,
  submitted_at: 1_755_000_000,
  rounds: [
    {
      round: 1,
      aggregated: true,
      n_participants: 3,
      weighted_post_eval: {
        loss: 0.41,
        precision: 0.52,
        recall: 0.61,
        f1: 0.56,
        auprc: 0.58,
        n_clients: 3,
      },
    },
    {
      round: 2,
      aggregated: false,
      reason: "insufficient acks (2 of 3)",
      aborted: true,
    },
    {
      round: 3,
      aggregated: true,
      n_participants: 3,
      weighted_post_eval: {
        loss: 0.37,
        precision: 0.55,
        recall: 0.63,
        f1: 0.59,
        auprc: 0.62,
        n_clients: 3,
      },
    },
  ],
  last_weighted_eval: {
    loss: 0.37,
    precision: 0.55,
    recall: 0.63,
    f1: 0.59,
    auprc: 0.62,
    n_clients: 3,
  },
  final_model_seen: true,
};

export const FIXTURE_RUNNING: ExperimentSummary = {
  experiment_id: "exp-2",
  status: "running",
  rounds_total: 10,
  algorithm: "scaffold",
  last_round: 4,
  submitted_at: 1_755_000_900,
  rounds: [],
};

function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

/** Mirrors the server-side rule that matters to the form: fedprox and
 * feddyn require mu, present and positive. */
function validateSubmission(doc: {
  settings?: { algorithm?: { kind?: string; mu?: number }; rounds?: number };
}): ValidationError[] {
  const errors: ValidationError[] = [];
  const algorithm = doc.settings?.algorithm ?? {};
  const kind = algorithm.kind ?? "fedavg";
  if (kind === "feddyn" || kind === "fedprox") {
    if (algorithm.mu === undefined) {
      errors.push({
        path: "settings/algorithm/mu",
        message: `required for ${kind}`,
      });
    } else if (algorithm.mu <= 0) {
      errors.push({
        path: "settings/algorithm/mu",
        message: `must be > 0 for ${kind}`,
      });
    }
  }
  if (doc.settings?.rounds !== undefined && doc.settings.rounds < 1) {
    errors.push({ path: "settings/rounds", message: "must be >= 1" });
  }
  return errors;
}

export interface MockOptions {
  busy?: boolean;
  unreachable?: boolean;
}

export interface MockApi {
  fetchFn: FetchLike;
  calls: { method: string; path: string; body?: unknown }[];
}

export function mockControlApi(options: MockOptions = {}): MockApi {
  const calls: MockApi["calls"] = [];

  const fetchFn: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    const body =
      typeof init?.body === "string" ? JSON.parse(init.body) : undefined;
    calls.push({ method, path, body });

    if (method === "GET" && path === "/api/health") {
      return json(200, { status: "ok", client_id: "control-center" });
    }
    if (method === "GET" && path === "/api/network") {
      return json(200, { nodes: FIXTURE_NODES });
    }
    if (method === "GET" && path === "/api/experiments") {
      return json(200, { experiments: [FIXTURE_EXPERIMENT, FIXTURE_RUNNING] });
    }
    if (method === "GET" && path === "/api/experiments/exp-1") {
      return json(200, FIXTURE_EXPERIMENT);
    }
    if (method === "GET" && path === "/api/experiments/exp-2") {
      return json(200, FIXTURE_RUNNING);
    }
    if (method === "GET" && path.startsWith("/api/experiments/")) {
      return json(404, { detail: "unknown experiment" });
    }
    if (method === "POST" && path === "/api/experiments") {
      if (options.unreachable) {
        return json(504, { detail: "parameter server unreachable" });
      }
      const errors = validateSubmission(body ?? {});
      if (errors.length > 0) {
        return json(400, {
          detail: "validation failed",
          validation: { valid: false, errors },
        });
      }
      if (options.busy) {
        return json(409, { detail: "parameter server busy" });
      }
      return json(201, { experiment_id: "exp-new" });
    }
    if (method === "POST" && path === "/api/experiments/exp-1/model") {
      return json(200, { path: "models/exp-1.weights" });
    }
    if (method === "POST" && path === "/api/experiments/exp-2/model") {
      return json(409, { detail: "experiment is running, not finalized" });
    }
    return json(404, { detail: `no route for ${method} ${path}` });
  };

  return { fetchFn, calls };
}

import { describe, expect, it } from "vitest";

import { ApiError, ControlApi } from "../src/api.js";
import { buildRequestDoc, defaultFormState } from "../src/form.js";
import { mockControlApi } from "./fixture.js";

function client(options = {}) {
  const mock = mockControlApi(options);
  return { api: new ControlApi("http://cc.local", mock.fetchFn), mock };
}

describe("ControlApi", () => {
  it("returns the network view with stale flags intact", async () => {
    const { api } = client();
    const nodes = await api.network();
    expect(nodes).toHaveLength(4);
    expect(nodes.filter((n) => n.stale)).toHaveLength(1);
    expect(nodes.find((n) => n.stale)?.client_id).toBe("site-c");
  });

  it("fetches an experiment with its round history", async () => {
    const { api } = client();
    const exp = await api.experiment("exp-1");
    expect(exp.status).toBe("completed");
    expect(exp.rounds).toHaveLength(3);
    expect(exp.rounds?.[1]).toMatchObject({
      round: 2,
      aggregated: false,
      reason: "insufficient acks (2 of 3)",
    });
  });

  it("raises ApiError with the server detail on 404", async () => {
    const { api } = client();
    const err = await api.experiment("missing").catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(404);
    expect((err as ApiError).detail).toBe("unknown experiment");
  });

  it("maps a 400 submission onto the validation report", async () => {
    const { api } = client();
    const state = { ...defaultFormState(), algorithm: "feddyn" as const };
    const outcome = await api.submit(buildRequestDoc(state));
    expect(outcome.kind).toBe("invalid");
    if (outcome.kind !== "invalid") throw new Error("unreachable");
    expect(outcome.report.errors).toEqual([
      { path: "settings/algorithm/mu", message: "required for feddyn" },
    ]);
  });

  it("maps a 201 submission onto the new experiment id", async () => {
    const { api, mock } = client();
    const outcome = await api.submit(buildRequestDoc(defaultFormState()));
    expect(outcome).toEqual({ kind: "accepted", experimentId: "exp-new" });
    const post = mock.calls.find((c) => c.method === "POST");
    expect(post?.body).toHaveProperty("model_config");
    expect(post?.body).toHaveProperty("settings");
  });

  it("surfaces busy and unreachable as distinct outcomes", async () => {
    const busy = client({ busy: true });
    const outcome = await busy.api.submit(buildRequestDoc(defaultFormState()));
    expect(outcome).toEqual({ kind: "busy", detail: "parameter server busy" });

    const down = client({ unreachable: true });
    const other = await down.api.submit(buildRequestDoc(defaultFormState()));
    expect(other).toEqual({
      kind: "unreachable",
      detail: "parameter server unreachable",
    });
  });

  it("fetches the final model path, or the refusal", async () => {
    const { api } = client();
    await expect(api.fetchModel("exp-1")).resolves.toBe("models/exp-1.weights");
    const err = await api.fetchModel("exp-2").catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(409);
    expect((err as ApiError).detail).toContain("not finalized");
  });
});

import { describe, expect, it } from "vitest";

import {
  experimentPanel,
  launchForm,
  networkPanel,
  roundChart,
} from "../src/views.js";
import { defaultFormState } from "../src/form.js";
import { FIXTURE_EXPERIMENT, FIXTURE_NODES, FIXTURE_RUNNING } from "./fixture.js";

const NOW = Date.now();

function badges(html: string): string[] {
  return html.split("<li").slice(1);
}

describe("network panel", () => {
  it("renders one badge per node, with the stale one highlighted", () => {
    const html = networkPanel(FIXTURE_NODES, NOW);
    const items = badges(html);
    expect(items).toHaveLength(4);
    const staleItems = items.filter((chunk) => chunk.includes("stale"));
    expect(staleItems).toHaveLength(1);
    expect(staleItems[0]).toContain('data-node-id="site-c"');
    expect(staleItems[0]).toContain("missed 3 heartbeats");
  });

  it("shows states and roles as returned by the API", () => {
    const html = networkPanel(FIXTURE_NODES, NOW);
    expect(html).toContain("TRAINING");
    expect(html).toContain("parameter server");
    expect(html).toContain("participant");
  });

  it("renders an explicit empty state and an explicit error state", () => {
    expect(networkPanel([], NOW)).toContain("No nodes seen yet");
    expect(networkPanel(null, NOW, "503: downstream broker gone")).toContain(
      "downstream broker gone",
    );
  });

  it("escapes hostile diagnostics", () => {
    const node = {
      ...FIXTURE_NODES[3]!,
      diagnostic: '<script>alert("x")</script>',
    };
    const html = networkPanel([node], NOW);
    expect(html).not.toContain("<script>");
    expect(html).toContain("&lt;script&gt;");
  });
});

describe("experiment panel", () => {
  it("marks the skipped round with its reason", () => {
    const html = experimentPanel(FIXTURE_EXPERIMENT);
    expect(html).toContain('class="round-skipped" data-round="2"');
    expect(html).toContain("insufficient acks (2 of 3)");
    expect(html).toContain("(aborted)");
    const aggregatedRows = html.match(/round-aggregated/g) ?? [];
    expect(aggregatedRows).toHaveLength(2);
  });

  it("formats metrics from the API without recomputing them", () => {
    const html = experimentPanel(FIXTURE_EXPERIMENT);
    expect(html).toContain("62.00%"); // auprc of round 3, straight from the doc
    expect(html).toContain("0.3700"); // its loss, 4 decimals
    expect(html).toContain("round 3 / 3");
  });

  it("enables the model fetch only once the run is finalized", () => {
    const done = experimentPanel(FIXTURE_EXPERIMENT);
    expect(done).toContain('data-experiment="exp-1">');
    expect(done).not.toContain('data-experiment="exp-1" disabled');
    const running = experimentPanel(FIXTURE_RUNNING);
    expect(running).toContain('data-experiment="exp-2" disabled');
  });

  it("renders an empty state when nothing is selected", () => {
    expect(experimentPanel(null)).toContain("Select an experiment");
  });
});

describe("round chart", () => {
  it("draws points for aggregated rounds and a gap marker for the skip", () => {
    const svg = roundChart(FIXTURE_EXPERIMENT.rounds!, 3);
    const points = svg.match(/round-point/g) ?? [];
    expect(points).toHaveLength(2);
    expect(svg).toContain('gap-marker" data-round="2"');
    // The skip breaks the line: no polyline joins round 1 to round 3.
    expect(svg).not.toContain("round-line");
  });

  it("joins contiguous aggregated rounds", () => {
    const rounds = [1, 2, 3].map((round) => ({
      round,
      aggregated: true,
      n_participants: 3,
      weighted_post_eval: {
        loss: 0.4,
        precision: 0.5,
        recall: 0.5,
        f1: 0.5,
        auprc: 0.5 + round / 10,
        n_clients: 3,
      },
    }));
    const svg = roundChart(rounds, 3);
    expect(svg).toContain("round-line");
    expect(svg.match(/round-point/g) ?? []).toHaveLength(3);
  });
});

describe("launch form rendering", () => {
  it("renders without any error spans by default", () => {
    const html = launchForm(defaultFormState());
    expect(html).not.toContain("field-error");
    expect(html).toContain('data-field="rounds"');
  });
});

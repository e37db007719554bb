/** HTML renderers: pure functions from API data to markup strings.
 *
 * Everything interpolated goes through escapeHtml. Panels render one of
 * three shapes: an error state, an explicit empty state, or the data; there
 * is no silent blank output.
 */

import { escapeHtml, lastSeenText, loss, percent, roleLabel } from "./format.js";
import type { MappedErrors } from "./form.js";
import { ACTIVATIONS, ALGORITHMS, visibleFields } from "./form.js";
import type { FormState } from "./form.js";
import type {
  ExperimentSummary,
  NetworkNode,
  RoundResult,
  ValidationReport,
} from "./types.js";
import { isFinalized } from "./types.js";

export function errorState(message: string): string {
  return `<p class="error-state" role="alert">${escapeHtml(message)}</p>`;
}

// ------------------------------------------------------------- network

function nodeBadge(node: NetworkNode, nowMs: number): string {
  const classes = ["node-badge", `state-${node.state.toLowerCase()}`];
  if (node.stale) classes.push("stale");
  if (!node.known) classes.push("unknown-node");
  const activity =
    node.experiment_id && node.round > 0
      ? `<span class="node-round">round ${node.round}</span>`
      : "";
  const diagnostic = node.diagnostic
    ? `<span class="node-diagnostic">${escapeHtml(node.diagnostic)}</span>`
    : "";
  return `<li class="${classes.join(" ")}" data-node-id="${escapeHtml(node.client_id)}">
    <span class="node-id">${escapeHtml(node.client_id)}</span>
    <span class="node-role">${escapeHtml(roleLabel(node.role))}</span>
    <span class="node-state">${escapeHtml(node.state)}</span>
    <span class="node-seen">${escapeHtml(lastSeenText(node.last_seen, nowMs))}</span>
    ${activity}${diagnostic}
  </li>`;
}

export function networkPanel(
  nodes: NetworkNode[] | null,
  nowMs: number,
  error?: string,
): string {
  if (error !== undefined) return errorState(error);
  if (nodes === null) return `<p class="loading">loading network…</p>`;
  if (nodes.length === 0) {
    return `<p class="empty-state">No nodes seen yet. Waiting for the first status report.</p>`;
  }
  const items = nodes.map((n) => nodeBadge(n, nowMs)).join("\n");
  return `<ul class="node-grid">\n${items}\n</ul>`;
}

// --------------------------------------------------------- experiments

export function experimentList(
  experiments: ExperimentSummary[] | null,
  error?: string,
): string {
  if (error !== undefined) return errorState(error);
  if (experiments === null) return `<p class="loading">loading experiments…</p>`;
  if (experiments.length === 0) {
    return `<p class="empty-state">No experiments submitted yet.</p>`;
  }
  const rows = experiments
    .map(
      (exp) => `<li class="experiment-row status-${escapeHtml(exp.status)}">
    <a href="#/experiment/${encodeURIComponent(exp.experiment_id)}">${escapeHtml(exp.experiment_id)}</a>
    <span class="exp-algorithm">${escapeHtml(exp.algorithm ?? "?")}</span>
    <span class="exp-status">${escapeHtml(exp.status)}</span>
    <span class="exp-progress">round ${exp.last_round}${exp.rounds_total ? ` / ${exp.rounds_total}` : ""}</span>
  </li>`,
    )
    .join("\n");
  return `<ul class="experiment-list">\n${rows}\n</ul>`;
}

function validationErrorList(report: ValidationReport): string {
  const items = report.errors
    .map(
      (e) =>
        `<li><code>${escapeHtml(e.path)}</code>: ${escapeHtml(e.message)}</li>`,
    )
    .join("\n");
  return `<ul class="validation-errors">\n${items}\n</ul>`;
}

function roundRow(row: RoundResult): string {
  if (!row.aggregated) {
    return `<tr class="round-skipped" data-round="${row.round}">
      <td>${row.round}</td>
      <td class="skip-marker">skipped</td>
      <td colspan="2" class="skip-reason">${escapeHtml(row.reason ?? "")}${row.aborted ? " (aborted)" : ""}</td>
    </tr>`;
  }
  const metrics = row.weighted_post_eval;
  return `<tr class="round-aggregated" data-round="${row.round}">
    <td>${row.round}</td>
    <td>${row.n_participants ?? ""} clients</td>
    <td>${metrics ? escapeHtml(percent(metrics.auprc)) : "–"}</td>
    <td>${metrics ? escapeHtml(loss(metrics.loss)) : "–"}</td>
  </tr>`;
}

/** Inline AUPRC-per-round chart. Aggregated rounds with metrics become
 * points joined within contiguous stretches; a skipped round breaks the
 * line and leaves a gap marker in its column. */
export function roundChart(rounds: RoundResult[], totalRounds: number | null): string {
  const width = 360;
  const height = 72;
  const pad = 8;
  const count = Math.max(totalRounds ?? 0, rounds.length, 1);
  const xFor = (round: number) =>
    pad + ((round - 1) / Math.max(count - 1, 1)) * (width - 2 * pad);
  const yFor = (auprc: number) => height - pad - auprc * (height - 2 * pad);

  const segments: string[][] = [];
  let current: string[] = [];
  const points: string[] = [];
  const gaps: string[] = [];
  for (const row of rounds) {
    const metrics = row.aggregated ? row.weighted_post_eval : undefined;
    if (row.aggregated && metrics) {
      const x = xFor(row.round).toFixed(1);
      const y = yFor(metrics.auprc).toFixed(1);
      current.push(`${x},${y}`);
      points.push(
        `<circle class="round-point" data-round="${row.round}" cx="${x}" cy="${y}" r="3"><title>round ${row.round}: ${escapeHtml(percent(metrics.auprc))}</title></circle>`,
      );
    } else {
      if (current.length > 0) segments.push(current);
      current = [];
      if (!row.aggregated) {
        const x = xFor(row.round).toFixed(1);
        gaps.push(
          `<text class="gap-marker" data-round="${row.round}" x="${x}" y="${height - pad}" text-anchor="middle">×</text>`,
        );
      }
    }
  }
  if (current.length > 0) segments.push(current);
  const lines = segments
    .filter((seg) => seg.length > 1)
    .map((seg) => `<polyline class="round-line" points="${seg.join(" ")}" />`)
    .join("\n");
  return `<svg class="round-chart" viewBox="0 0 ${width} ${height}" role="img" aria-label="AUPRC per round">
${lines}
${points.join("\n")}
${gaps.join("\n")}
</svg>`;
}

export function experimentPanel(
  exp: ExperimentSummary | null,
  error?: string,
): string {
  if (error !== undefined) return errorState(error);
  if (exp === null) {
    return `<p class="empty-state">Select an experiment to monitor.</p>`;
  }
  const header = `<header class="experiment-header">
    <h3>${escapeHtml(exp.experiment_id)}</h3>
    <span class="exp-algorithm">${escapeHtml(exp.algorithm ?? "?")}</span>
    <span class="exp-status status-${escapeHtml(exp.status)}">${escapeHtml(exp.status)}</span>
    <span class="round-counter">round ${exp.last_round}${exp.rounds_total ? ` / ${exp.rounds_total}` : ""}</span>
  </header>`;

  const diagnostic = exp.diagnostic
    ? `<p class="experiment-diagnostic">${escapeHtml(exp.diagnostic)}</p>`
    : "";
  const rejection = exp.rejection?.validation
    ? `<div class="rejection">rejected:\n${validationErrorList(exp.rejection.validation)}</div>`
    : "";

  const rounds = exp.rounds ?? [];
  const table =
    rounds.length === 0
      ? `<p class="empty-state">No round results observed yet.</p>`
      : `<table class="round-table">
    <thead><tr><th>round</th><th>outcome</th><th>AUPRC</th><th>loss</th></tr></thead>
    <tbody>
${rounds.map(roundRow).join("\n")}
    </tbody>
  </table>`;
  const chart = rounds.length > 0 ? roundChart(rounds, exp.rounds_total) : "";

  const latest = exp.last_weighted_eval;
  const summary = latest
    ? `<dl class="latest-metrics">
    <dt>AUPRC</dt><dd>${escapeHtml(percent(latest.auprc))}</dd>
    <dt>F1</dt><dd>${escapeHtml(percent(latest.f1))}</dd>
    <dt>loss</dt><dd>${escapeHtml(loss(latest.loss))}</dd>
    <dt>clients</dt><dd>${latest.n_clients}</dd>
  </dl>`
    : "";

  const fetchable = isFinalized(exp.status);
  const fetchButton = `<button class="fetch-model" data-experiment="${escapeHtml(exp.experiment_id)}"${fetchable ? "" : " disabled"}>Fetch final model</button>`;
  const availability = exp.final_model_seen
    ? `<span class="model-available">final model broadcast received</span>`
    : "";

  return `<section class="experiment-panel">
${header}
${diagnostic}${rejection}
${summary}
${chart}
${table}
<footer>${fetchButton}${availability}</footer>
</section>`;
}

// -------------------------------------------------------------- launch

function numberField(
  name: keyof FormState,
  label: string,
  value: string,
  errors: MappedErrors,
): string {
  const message = errors.fields[name];
  const errorSpan = message
    ? `<span class="field-error">${escapeHtml(message)}</span>`
    : "";
  return `<label class="field${message ? " has-error" : ""}" data-field="${name}">
    <span class="field-label">${escapeHtml(label)}</span>
    <input name="${name}" value="${escapeHtml(value)}" />
    ${errorSpan}
  </label>`;
}

function selectField(
  name: keyof FormState,
  label: string,
  value: string,
  options: readonly string[],
  errors: MappedErrors,
): string {
  const message = errors.fields[name];
  const opts = options
    .map(
      (opt) =>
        `<option value="${opt}"${opt === value ? " selected" : ""}>${opt}</option>`,
    )
    .join("");
  const errorSpan = message
    ? `<span class="field-error">${escapeHtml(message)}</span>`
    : "";
  return `<label class="field${message ? " has-error" : ""}" data-field="${name}">
    <span class="field-label">${escapeHtml(label)}</span>
    <select name="${name}">${opts}</select>
    ${errorSpan}
  </label>`;
}

export function launchForm(
  state: FormState,
  errors: MappedErrors = { fields: {}, general: [] },
  banner = "",
): string {
  const show = visibleFields(state.algorithm);
  const generalBlock =
    errors.general.length > 0
      ? `<ul class="form-errors">${errors.general
          .map((msg) => `<li>${escapeHtml(msg)}</li>`)
          .join("")}</ul>`
      : "";
  const bannerBlock = banner
    ? `<p class="submit-banner" role="status">${escapeHtml(banner)}</p>`
    : "";

  const algorithmFields = [
    show.mu ? numberField("mu", "μ (proximal weight)", state.mu, errors) : "",
    show.localLr
      ? numberField("localLr", "η_l (client learning rate)", state.localLr, errors)
      : "",
    show.serverStep
      ? numberField("serverStep", "η_g (server step)", state.serverStep, errors)
      : "",
    show.retainedFraction
      ? numberField(
          "retainedFraction",
          "ρ (retained fraction)",
          state.retainedFraction,
          errors,
        )
      : "",
  ]
    .filter((s) => s !== "")
    .join("\n");

  return `<form class="launch-form" id="launch-form">
${bannerBlock}${generalBlock}
<fieldset>
  <legend>Algorithm</legend>
  ${selectField("algorithm", "strategy", state.algorithm, ALGORITHMS, errors)}
  ${algorithmFields}
</fieldset>
<fieldset>
  <legend>Process</legend>
  ${numberField("rounds", "rounds", state.rounds, errors)}
  ${numberField("minReplies", "min replies", state.minReplies, errors)}
  ${numberField("ackTimeout", "ack timeout (s)", state.ackTimeout, errors)}
  ${numberField("trainTimeout", "train timeout (s)", state.trainTimeout, errors)}
  ${numberField("evalTimeout", "eval timeout (s)", state.evalTimeout, errors)}
</fieldset>
<fieldset>
  <legend>Training</legend>
  ${numberField("batchSize", "batch size", state.batchSize, errors)}
  ${numberField("epochs", "local epochs", state.epochs, errors)}
  ${numberField("learningRate", "learning rate", state.learningRate, errors)}
  ${numberField("rngSeed", "rng seed", state.rngSeed, errors)}
</fieldset>
<fieldset>
  <legend>Model</legend>
  ${numberField("inputDim", "input features", state.inputDim, errors)}
  ${numberField("hiddenUnits", "hidden units (comma separated)", state.hiddenUnits, errors)}
  ${selectField("activation", "activation", state.activation, ACTIVATIONS, errors)}
  ${numberField("dropout", "dropout", state.dropout, errors)}
  ${numberField("initSeed", "init seed", state.initSeed, errors)}
</fieldset>
<button type="submit" class="launch-button">Launch experiment</button>
</form>`;
}

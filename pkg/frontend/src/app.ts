/** Page wiring: polling loops, form events, hash routing.
 *
 * Snapshot rendering, last write wins; each poll replaces its panel's DOM
 * wholesale. The form keeps its state in a plain object so a re-render
 * (conditional fields, inline errors) never loses user input.
 */

import { ApiError, ControlApi } from "./api.js";
import {
  buildRequestDoc,
  defaultFormState,
  mapValidationErrors,
} from "./form.js";
import type { FormState, MappedErrors } from "./form.js";
import { experimentList, experimentPanel, launchForm, networkPanel } from "./views.js";

const POLL_INTERVAL_MS = 2000;

declare global {
  interface Window {
    FEDBUS_API?: string;
  }
}

function baseUrl(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  return fromQuery ?? window.FEDBUS_API ?? "";
}

function panel(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id} in index.html`);
  return el;
}

export function startApp(): void {
  const api = new ControlApi(baseUrl());
  const networkEl = panel("network");
  const experimentsEl = panel("experiments");
  const experimentEl = panel("experiment");
  const launchEl = panel("launch");

  let formState: FormState = defaultFormState();
  let formErrors: MappedErrors = { fields: {}, general: [] };
  let formBanner = "";

  const selectedExperiment = (): string | null => {
    const match = /^#\/experiment\/(.+)$/.exec(window.location.hash);
    return match ? decodeURIComponent(match[1]!) : null;
  };

  async function refreshNetwork(): Promise<void> {
    try {
      const nodes = await api.network();
      networkEl.innerHTML = networkPanel(nodes, Date.now());
    } catch (err) {
      networkEl.innerHTML = networkPanel(null, Date.now(), describe(err));
    }
  }

  async function refreshExperiments(): Promise<void> {
    try {
      const list = await api.experiments();
      experimentsEl.innerHTML = experimentList(list);
    } catch (err) {
      experimentsEl.innerHTML = experimentList(null, describe(err));
    }
  }

  async function refreshExperiment(): Promise<void> {
    const id = selectedExperiment();
    if (id === null) {
      experimentEl.innerHTML = experimentPanel(null);
      return;
    }
    try {
      const exp = await api.experiment(id);
      experimentEl.innerHTML = experimentPanel(exp);
    } catch (err) {
      experimentEl.innerHTML = experimentPanel(null, describe(err));
    }
  }

  function renderForm(): void {
    launchEl.innerHTML = launchForm(formState, formErrors, formBanner);
  }

  function readFormInputs(): void {
    const form = launchEl.querySelector("form");
    if (!form) return;
    for (const element of Array.from(form.elements)) {
      const input = element as HTMLInputElement | HTMLSelectElement;
      if (!input.name || !(input.name in formState)) continue;
      const key = input.name as keyof FormState;
      if (key === "postEval") continue;
      (formState as unknown as Record<string, string>)[key] = input.value;
    }
  }

  launchEl.addEventListener("change", (event) => {
    const target = event.target as HTMLInputElement | HTMLSelectElement;
    readFormInputs();
    if (target.name === "algorithm") {
      // Conditional fields appear or vanish with the strategy.
      renderForm();
    }
  });

  launchEl.addEventListener("submit", (event) => {
    event.preventDefault();
    readFormInputs();
    void submitForm();
  });

  async function submitForm(): Promise<void> {
    formBanner = "submitting…";
    formErrors = { fields: {}, general: [] };
    renderForm();
    try {
      const outcome = await api.submit(buildRequestDoc(formState));
      if (outcome.kind === "accepted") {
        formBanner = `accepted: ${outcome.experimentId}`;
        window.location.hash = `#/experiment/${encodeURIComponent(outcome.experimentId)}`;
      } else if (outcome.kind === "invalid") {
        formErrors = mapValidationErrors(outcome.report);
        formBanner = "validation failed";
      } else {
        formBanner = outcome.detail;
      }
    } catch (err) {
      formBanner = describe(err);
    }
    renderForm();
    void refreshExperiments();
  }

  experimentEl.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (!target.classList.contains("fetch-model")) return;
    const id = target.getAttribute("data-experiment");
    if (!id) return;
    target.setAttribute("disabled", "");
    api
      .fetchModel(id)
      .then((path) => {
        target.insertAdjacentHTML(
          "afterend",
          `<span class="fetch-result">stored at ${path}</span>`,
        );
      })
      .catch((err: unknown) => {
        target.removeAttribute("disabled");
        target.insertAdjacentHTML(
          "afterend",
          `<span class="fetch-result error-state">${describe(err)}</span>`,
        );
      });
  });

  window.addEventListener("hashchange", () => void refreshExperiment());

  renderForm();
  void refreshNetwork();
  void refreshExperiments();
  void refreshExperiment();
  window.setInterval(() => void refreshNetwork(), POLL_INTERVAL_MS);
  window.setInterval(() => void refreshExperiments(), POLL_INTERVAL_MS);
  window.setInterval(() => void refreshExperiment(), POLL_INTERVAL_MS);
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.status}: ${err.detail}`;
  if (err instanceof Error) return err.message;
  return String(err);
}

if (typeof document !== "undefined" && document.getElementById("network")) {
  startApp();
}

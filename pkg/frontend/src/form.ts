/** Launch-form model: field state, conditional visibility, request-document
 * assembly, and the mapping of server validation errors back onto fields.
 *
 * The form does not second-guess the server: optional numbers left blank are
 * simply omitted from the request, and whatever the ValidationReport says
 * comes back attached to the offending input. */

import type { ValidationReport } from "./types.js";

export const ALGORITHMS = ["fedavg", "fedprox", "feddyn", "scaffold"] as const;
export type AlgorithmKind = (typeof ALGORITHMS)[number];

export const ACTIVATIONS = ["tanh", "relu", "sigmoid", "linear"] as const;

export interface FormState {
  algorithm: AlgorithmKind;
  mu: string;
  localLr: string;
  serverStep: string;
  retainedFraction: string;
  rounds: string;
  minReplies: string;
  ackTimeout: string;
  trainTimeout: string;
  evalTimeout: string;
  batchSize: string;
  epochs: string;
  learningRate: string;
  rngSeed: string;
  inputDim: string;
  hiddenUnits: string;
  activation: string;
  dropout: string;
  initSeed: string;
  postEval: boolean;
}

export function defaultFormState(): FormState {
  return {
    algorithm: "fedavg",
    mu: "",
    localLr: "",
    serverStep: "",
    retainedFraction: "",
    rounds: "10",
    minReplies: "3",
    ackTimeout: "10",
    trainTimeout: "120",
    evalTimeout: "30",
    batchSize: "32",
    epochs: "1",
    learningRate: "0.001",
    rngSeed: "0",
    inputDim: "8",
    hiddenUnits: "64,64",
    activation: "tanh",
    dropout: "0.5",
    initSeed: "0",
    postEval: true,
  };
}

/** Which algorithm-specific inputs the selector reveals. */
export function visibleFields(kind: AlgorithmKind): {
  mu: boolean;
  localLr: boolean;
  serverStep: boolean;
  retainedFraction: boolean;
} {
  return {
    mu: kind === "fedprox" || kind === "feddyn",
    localLr: kind === "scaffold",
    serverStep: kind === "scaffold",
    retainedFraction: kind === "fedavg" || kind === "fedprox",
  };
}

function maybeNumber(raw: string): number | undefined {
  const trimmed = raw.trim();
  return trimmed === "" ? undefined : Number(trimmed);
}

/** Assembles the experiment request. Blank optional fields are omitted so
 * the server's own "required" diagnostics fire; required numerics are sent
 * as typed, whatever the user wrote, and validation answers. */
export function buildRequestDoc(state: FormState): Record<string, unknown> {
  const algorithm: Record<string, unknown> = { kind: state.algorithm };
  const mu = maybeNumber(state.mu);
  if (mu !== undefined) algorithm.mu = mu;
  const localLr = maybeNumber(state.localLr);
  if (localLr !== undefined) algorithm.local_lr = localLr;
  const serverStep = maybeNumber(state.serverStep);
  if (serverStep !== undefined) algorithm.server_step = serverStep;
  const retained = maybeNumber(state.retainedFraction);
  if (retained !== undefined) algorithm.retained_fraction = retained;

  const layers = state.hiddenUnits
    .split(",")
    .map((part) => part.trim())
    .filter((part) => part !== "")
    .map((part) => ({
      units: Number(part),
      activation: state.activation,
      dropout_rate: Number(state.dropout),
    }));

  return {
    model_config: {
      input_dim: Number(state.inputDim),
      layers,
      output_activation: "sigmoid",
      seed_policy: "explicit",
      init_seed: Number(state.initSeed),
    },
    settings: {
      rounds: Number(state.rounds),
      min_replies: Number(state.minReplies),
      ack_timeout: Number(state.ackTimeout),
      train_timeout: Number(state.trainTimeout),
      eval_timeout: Number(state.evalTimeout),
      pre_eval: false,
      post_eval: state.postEval,
      allow_metrics_upload_default: true,
      algorithm,
      training: {
        batch_size: Number(state.batchSize),
        epochs: Number(state.epochs),
        learning_rate: Number(state.learningRate),
        rng_seed: Number(state.rngSeed),
      },
    },
  };
}

/** Error paths are JSON pointers relative to the request document. */
const PATH_TO_FIELD: Record<string, keyof FormState> = {
  "settings/algorithm/kind": "algorithm",
  "settings/algorithm/mu": "mu",
  "settings/algorithm/local_lr": "localLr",
  "settings/algorithm/server_step": "serverStep",
  "settings/algorithm/retained_fraction": "retainedFraction",
  "settings/rounds": "rounds",
  "settings/min_replies": "minReplies",
  "settings/ack_timeout": "ackTimeout",
  "settings/train_timeout": "trainTimeout",
  "settings/eval_timeout": "evalTimeout",
  "settings/training/batch_size": "batchSize",
  "settings/training/epochs": "epochs",
  "settings/training/learning_rate": "learningRate",
  "settings/training/rng_seed": "rngSeed",
  "model_config/input_dim": "inputDim",
  "model_config/init_seed": "initSeed",
};

export interface MappedErrors {
  fields: Partial<Record<keyof FormState, string>>;
  general: string[];
}

export function mapValidationErrors(report: ValidationReport): MappedErrors {
  const fields: Partial<Record<keyof FormState, string>> = {};
  const general: string[] = [];
  for (const error of report.errors) {
    let field = PATH_TO_FIELD[error.path];
    if (field === undefined && error.path.startsWith("model_config/layers")) {
      field = "hiddenUnits";
    }
    if (field === undefined) {
      general.push(`${error.path}: ${error.message}`);
    } else if (fields[field] === undefined) {
      fields[field] = error.message;
    }
  }
  return { fields, general };
}

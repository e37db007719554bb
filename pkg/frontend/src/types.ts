/** Shapes returned by the control-center HTTP API, verbatim.
 *
 * The dashboard never derives numbers of its own; everything rendered maps
 * onto one of these fields.
 */

export interface NetworkNode {
  client_id: string;
  role: string;
  known: boolean;
  state: string;
  experiment_id: string;
  round: number;
  diagnostic: string;
  heartbeat_interval: number;
  last_seen: string | null;
  stale: boolean;
}

export interface WeightedEval {
  loss: number;
  precision: number;
  recall: number;
  f1: number;
  auprc: number;
  n_clients: number;
}

/** One round outcome as observed by the control center. Aggregated rounds
 * carry participation and metrics; skipped rounds carry the reason. */
export interface RoundResult {
  round: number;
  aggregated: boolean;
  n_participants?: number;
  weighted_post_eval?: WeightedEval;
  reason?: string;
  aborted?: boolean;
}

export interface ExperimentSummary {
  experiment_id: string;
  status: string;
  rounds_total: number | null;
  algorithm: string | null;
  last_round: number;
  submitted_at: number;
  diagnostic?: string;
  rounds?: RoundResult[];
  last_weighted_eval?: WeightedEval;
  rejection?: { reason?: string; validation?: ValidationReport };
  final_model_seen?: boolean;
}

export interface ValidationError {
  path: string;
  message: string;
}

export interface ValidationReport {
  valid: boolean;
  errors: ValidationError[];
}

/** Terminal statuses for which the final model can be fetched. */
export const FINALIZED_STATUSES = ["completed", "stopped_early"] as const;

export function isFinalized(status: string): boolean {
  return (FINALIZED_STATUSES as readonly string[]).includes(status);
}

/** Display formatting only; no metric is computed here, merely rendered. */

export function escapeHtml(value: unknown): string {
  return String(value)
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

/** Scores in [0,1] shown as percent with two decimals. */
export function percent(value: number): string {
  return `${(100 * value).toFixed(2)}%`;
}

export function loss(value: number): string {
  return value.toFixed(4);
}

export function lastSeenText(iso: string | null, nowMs: number): string {
  if (!iso) return "never seen";
  const then = Date.parse(iso);
  if (Number.isNaN(then)) return iso;
  const seconds = Math.max(0, Math.round((nowMs - then) / 1000));
  if (seconds < 60) return `${seconds}s ago`;
  if (seconds < 3600) return `${Math.floor(seconds / 60)}m ago`;
  return `${Math.floor(seconds / 3600)}h ago`;
}

const ROLE_LABELS: Record<string, string> = {
  parameter_server: "parameter server",
  client_participant: "participant",
  client_observer: "observer",
  control_center: "control center",
};

export function roleLabel(role: string): string {
  return ROLE_LABELS[role] ?? role;
}

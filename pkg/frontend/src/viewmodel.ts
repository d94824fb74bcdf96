// Pure projections from service responses to what the screen shows.
// Nothing here invents a number: costs, counts, and labels all arrive from
// the server and are only ordered and formatted for display.

import type { ClusterSummary, CostView, SessionSnapshot } from "./api.js";

/** Review order: largest cluster first, cluster id as the tie-break. */
export function orderQueue(clusters: ClusterSummary[]): ClusterSummary[] {
  return [...clusters].sort((a, b) => b.size - a.size || a.id - b.id);
}

/** First unresolved cluster in review order, or null when none remain. */
export function nextPending(clusters: ClusterSummary[]): ClusterSummary | null {
  for (const cluster of orderQueue(clusters)) {
    if (cluster.status === "pending") {
      return cluster;
    }
  }
  return null;
}

export function formatSeconds(seconds: number): string {
  return `${seconds} s`;
}

export function progressLine(snapshot: SessionSnapshot): string {
  return `${snapshot.clusters_resolved}/${snapshot.clusters_total} clusters · ${snapshot.members} members`;
}

export function costLine(cost: CostView): string {
  return `${formatSeconds(cost.absolute_seconds)} · ${cost.v_t} typed / ${cost.v_d} selected / ${cost.v_v} verified`;
}

export function relativeLine(cost: CostView): string {
  if (cost.relative_to_typing === null) {
    return "no typing baseline";
  }
  return `${(cost.relative_to_typing * 100).toFixed(1)}% of typing everything`;
}

export function modeBadge(snapshot: SessionSnapshot): string {
  return `${snapshot.method_tag} · ${snapshot.dictionary_mode} dictionary · ${snapshot.dictionary_size} words`;
}

/** Completion headline once nothing is pending, else null. */
export function completionLine(snapshot: SessionSnapshot): string | null {
  if (snapshot.clusters_pending !== 0) {
    return null;
  }
  return `All ${snapshot.clusters_total} clusters reviewed.`;
}

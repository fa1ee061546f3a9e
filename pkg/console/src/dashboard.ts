import type {
  CohortStats,
  CommunityCounts,
  ResponsePayload,
  StatsBody,
  TransitionTable,
  TTest,
} from "./types.js";

// The dashboard is a projection of /campaign/stats. Values are carried
// through untouched; selecting and labeling is all that happens here.

export interface HeadlineCounts {
  deployed: number;
  responded: number;
  responses: number;
  responses_by_original_poster: number;
}

export interface CommunityRow extends CommunityCounts {
  community: string;
}

export interface DashboardModel {
  headline: HeadlineCounts;
  communities: CommunityRow[];
  cohorts: CohortStats[];
  evidence: StatsBody["evidence"];
  transitions: Record<"all" | "denier" | "supporter", TransitionTable>;
  similarity: StatsBody["similarity"];
  tTest: TTest;
  itemStates: Record<string, number>;
}

export function buildDashboard(stats: StatsBody): DashboardModel {
  const { deployed, responded, responses, responses_by_original_poster } = stats.counts;
  return {
    headline: { deployed, responded, responses, responses_by_original_poster },
    communities: Object.entries(stats.counts.per_community)
      .sort(([a], [b]) => a.localeCompare(b))
      .map(([community, counts]) => ({ community, ...counts })),
    cohorts: [stats.cohorts.denier, stats.cohorts.supporter, stats.cohorts.unknown],
    evidence: stats.evidence,
    transitions: stats.transitions,
    similarity: stats.similarity,
    tTest: stats.t_test,
    itemStates: stats.items,
  };
}

/** Feed rows, newest first by response id (server ids are sequential). */
export function responseFeed(responses: ResponsePayload[], limit = 50): ResponsePayload[] {
  return [...responses]
    .sort((a, b) => b.response_id.localeCompare(a.response_id))
    .slice(0, limit);
}

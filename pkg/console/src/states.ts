import type { Cohort, ItemState } from "./types.js";

// Mirrors the server's vocabulary; the client never invents states.
export const STATES: readonly ItemState[] = [
  "pending",
  "approved",
  "edited",
  "rejected",
  "posted",
  "failed",
  "skipped",
];

export const COHORTS: readonly Cohort[] = ["denier", "supporter", "unknown"];

export function isItemState(value: string): value is ItemState {
  return (STATES as readonly string[]).includes(value);
}

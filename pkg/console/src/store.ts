import { ApiError, ConsoleClient } from "./client.js";
import { wordCount } from "./format.js";
import type {
  Cohort,
  ItemState,
  ItemView,
  ResponsePayload,
  StatsBody,
} from "./types.js";

export type Connection = "ok" | "down";

export interface Toast {
  tone: "info" | "warn";
  message: string;
}

export interface StoreOptions {
  /** Refresh cadence; the server is polled, never pushed to. */
  pollIntervalMs?: number;
  /** Soft client-side length warning; the server gate stays authoritative. */
  maxDraftWords?: number;
  maxToasts?: number;
}

const DEFAULT_POLL_MS = 5_000; // must stay <= 10 s
const DEFAULT_MAX_DRAFT_WORDS = 120; // mirrors the server gate's default cap

// Operator actions are only legal from these states; buttons for anything
// else would just bounce off the API with a 409.
const ACTIONABLE_STATES: ReadonlySet<ItemState> = new Set(["pending", "edited"]);

/**
 * ConsoleStore — client-side session state and the convergence rules.
 *
 * The server is the single source of truth. Every action result, including
 * errors, ends with the affected row matching server state: success replaces
 * the row with the returned item, a 409 refetches the row, a 404 drops it.
 */
export class ConsoleStore {
  readonly client: ConsoleClient;
  connection: Connection = "ok";
  filter: ItemState | null = null;
  items: ItemView[] = [];
  stats: StatsBody | null = null;
  responses: ResponsePayload[] = [];
  toasts: Toast[] = [];
  drafts = new Map<string, string>();
  lastRefreshedAt: number | null = null;

  private readonly pollIntervalMs: number;
  private readonly maxDraftWords: number;
  private readonly maxToasts: number;
  private pollTimer: ReturnType<typeof setInterval> | null = null;
  private listeners: (() => void)[] = [];

  constructor(client: ConsoleClient, options: StoreOptions = {}) {
    this.client = client;
    this.pollIntervalMs = Math.min(options.pollIntervalMs ?? DEFAULT_POLL_MS, 10_000);
    this.maxDraftWords = options.maxDraftWords ?? DEFAULT_MAX_DRAFT_WORDS;
    this.maxToasts = options.maxToasts ?? 20;
  }

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const fn of this.listeners) fn();
  }

  private toast(tone: Toast["tone"], message: string): void {
    this.toasts.push({ tone, message });
    if (this.toasts.length > this.maxToasts) {
      this.toasts.splice(0, this.toasts.length - this.maxToasts);
    }
  }

  // --- polling ---------------------------------------------------------

  startPolling(): void {
    if (this.pollTimer !== null) return;
    this.pollTimer = setInterval(() => {
      void this.refresh();
    }, this.pollIntervalMs);
  }

  stopPolling(): void {
    if (this.pollTimer !== null) {
      clearInterval(this.pollTimer);
      this.pollTimer = null;
    }
  }

  /** One poll cycle: queue, stats, and the response feed together. */
  async refresh(): Promise<void> {
    try {
      const [items, stats, responses] = await Promise.all([
        this.client.fetchQueue(this.filter ?? undefined),
        this.client.fetchStats(),
        this.client.fetchResponses(),
      ]);
      this.items = items;
      this.stats = stats;
      this.responses = responses;
      this.connection = "ok";
      this.lastRefreshedAt = Date.now();
    } catch (err) {
      this.markDown(err);
    }
    this.notify();
  }

  async setFilter(filter: ItemState | null): Promise<void> {
    this.filter = filter;
    await this.refresh();
  }

  private markDown(err: unknown): void {
    this.connection = "down";
    const detail = err instanceof ApiError ? err.message : String(err);
    this.toast("warn", `API unreachable: ${detail}`);
  }

  // --- action gating -----------------------------------------------------

  /** True when the API would accept any operator action on this item. */
  actionable(item: ItemView): boolean {
    return this.connection === "ok" && ACTIONABLE_STATES.has(item.state);
  }

  canApprove(item: ItemView): boolean {
    return this.actionable(item) && item.gate === "passed";
  }

  canReject(item: ItemView): boolean {
    return this.actionable(item);
  }

  canEdit(item: ItemView): boolean {
    return this.actionable(item);
  }

  getItem(itemId: string): ItemView | undefined {
    return this.items.find((i) => i.id === itemId);
  }

  // --- actions ----------------------------------------------------------

  async approve(itemId: string): Promise<void> {
    const item = this.getItem(itemId);
    if (!item || !this.canApprove(item)) return;
    await this.runAction(itemId, () => this.client.approve(itemId));
  }

  async reject(itemId: string): Promise<void> {
    const item = this.getItem(itemId);
    if (!item || !this.canReject(item)) return;
    await this.runAction(itemId, () => this.client.reject(itemId));
  }

  async submitEdit(itemId: string): Promise<void> {
    const item = this.getItem(itemId);
    const text = this.drafts.get(itemId) ?? "";
    if (!item || !this.canEdit(item) || !text.trim()) return;
    await this.runAction(itemId, async () => {
      const updated = await this.client.edit(itemId, text);
      this.drafts.delete(itemId);
      return updated;
    });
  }

  /**
   * Shared convergence path. Whatever the API answers, the row ends in the
   * server's state: a 2xx carries the updated item, a 409 names the state we
   * are out of sync with (refetch), a 404 means the item is gone.
   */
  private async runAction(itemId: string, call: () => Promise<ItemView>): Promise<void> {
    try {
      const updated = await call();
      this.replaceItem(updated);
    } catch (err) {
      if (!(err instanceof ApiError)) throw err;
      if (err.status === 0) {
        this.markDown(err);
      } else if (err.status === 404) {
        this.items = this.items.filter((i) => i.id !== itemId);
        this.toast("warn", `item ${itemId} no longer exists`);
      } else {
        const conflict = err.conflict();
        this.toast(
          "warn",
          conflict
            ? `server refused: ${conflict.error} (state ${conflict.state})`
            : `server refused: ${err.message}`,
        );
        await this.refetchItem(itemId);
      }
    }
    this.notify();
  }

  private async refetchItem(itemId: string): Promise<void> {
    try {
      this.replaceItem(await this.client.fetchItem(itemId));
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        this.items = this.items.filter((i) => i.id !== itemId);
      } else if (err instanceof ApiError && err.status === 0) {
        this.markDown(err);
      }
    }
  }

  private replaceItem(updated: ItemView): void {
    const idx = this.items.findIndex((i) => i.id === updated.id);
    if (this.filter !== null && updated.state !== this.filter) {
      // Row left the filtered view; drop it rather than show a stale state.
      if (idx >= 0) this.items.splice(idx, 1);
      return;
    }
    if (idx >= 0) this.items[idx] = updated;
    else this.items.push(updated);
  }

  // --- edit drafts --------------------------------------------------------

  setDraft(itemId: string, text: string): void {
    this.drafts.set(itemId, text);
    this.notify();
  }

  draft(itemId: string): string {
    return this.drafts.get(itemId) ?? "";
  }

  draftWordCount(itemId: string): number {
    return wordCount(this.draft(itemId));
  }

  draftOverLimit(itemId: string): boolean {
    return this.draftWordCount(itemId) > this.maxDraftWords;
  }

  // --- response cohorts ----------------------------------------------------

  async assignCohort(responseId: string, cohort: Cohort): Promise<void> {
    try {
      const updated = await this.client.assignCohort(responseId, cohort);
      const idx = this.responses.findIndex((r) => r.response_id === responseId);
      if (idx >= 0) this.responses[idx] = updated;
    } catch (err) {
      if (!(err instanceof ApiError)) throw err;
      if (err.status === 0) this.markDown(err);
      else this.toast("warn", `cohort not saved: ${err.message}`);
    }
    this.notify();
  }

  emptyMessage(): string | null {
    if (this.items.length > 0) return null;
    return this.filter ? `no ${this.filter} items` : "queue is empty";
  }
}

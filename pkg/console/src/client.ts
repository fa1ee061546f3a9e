import type {
  Cohort,
  ConflictDetail,
  EventsEnvelope,
  ItemEnvelope,
  ItemState,
  ItemView,
  QueueEnvelope,
  ResponseEnvelope,
  ResponsePayload,
  ResponsesEnvelope,
  StatsBody,
  StatsEnvelope,
} from "./types.js";

export type FetchLike = (
  input: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

/**
 * ApiError — any non-2xx response, plus network failures as status 0.
 * `detail` is the parsed FastAPI detail field; for 409s it carries the
 * server's current item state.
 */
export class ApiError extends Error {
  readonly status: number;
  readonly detail: unknown;

  constructor(status: number, detail: unknown) {
    super(typeof detail === "string" ? detail : JSON.stringify(detail));
    this.name = "ApiError";
    this.status = status;
    this.detail = detail;
  }

  conflict(): ConflictDetail | null {
    if (this.status !== 409) return null;
    const d = this.detail as Partial<ConflictDetail> | null;
    if (d && typeof d.error === "string" && typeof d.state === "string") {
      return d as ConflictDetail;
    }
    return null;
  }
}

/** Typed client over the campaign review API. Base URL is the only config. */
export class ConsoleClient {
  private readonly base: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    const impl = fetchImpl ?? (globalThis.fetch as unknown as FetchLike);
    if (!impl) throw new Error("no fetch implementation available");
    this.fetchImpl = impl;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let res;
    try {
      res = await this.fetchImpl(this.base + path, {
        method,
        headers: body === undefined ? undefined : { "content-type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(0, err instanceof Error ? err.message : String(err));
    }
    let parsed: unknown = null;
    try {
      parsed = await res.json();
    } catch {
      // non-JSON body; keep null
    }
    if (!res.ok) {
      const detail =
        parsed && typeof parsed === "object" && "detail" in parsed
          ? (parsed as { detail: unknown }).detail
          : parsed;
      throw new ApiError(res.status, detail);
    }
    return parsed as T;
  }

  async fetchQueue(state?: ItemState): Promise<ItemView[]> {
    const qs = state ? `?state=${encodeURIComponent(state)}` : "";
    const body = await this.request<QueueEnvelope>("GET", `/queue${qs}`);
    return body.items;
  }

  async fetchItem(itemId: string): Promise<ItemView> {
    const body = await this.request<ItemEnvelope>("GET", `/items/${encodeURIComponent(itemId)}`);
    return body.item;
  }

  async approve(itemId: string, operator = "operator"): Promise<ItemView> {
    const body = await this.request<ItemEnvelope>(
      "POST",
      `/items/${encodeURIComponent(itemId)}/approve`,
      { operator },
    );
    return body.item;
  }

  async reject(itemId: string, operator = "operator"): Promise<ItemView> {
    const body = await this.request<ItemEnvelope>(
      "POST",
      `/items/${encodeURIComponent(itemId)}/reject`,
      { operator },
    );
    return body.item;
  }

  async edit(itemId: string, text: string, operator = "operator"): Promise<ItemView> {
    const body = await this.request<ItemEnvelope>(
      "POST",
      `/items/${encodeURIComponent(itemId)}/edit`,
      { text, operator },
    );
    return body.item;
  }

  async fetchStats(): Promise<StatsBody> {
    const body = await this.request<StatsEnvelope>("GET", "/campaign/stats");
    return body.stats;
  }

  async fetchResponses(): Promise<ResponsePayload[]> {
    const body = await this.request<ResponsesEnvelope>("GET", "/responses");
    return body.responses;
  }

  async assignCohort(
    responseId: string,
    cohort: Cohort,
    operator = "operator",
  ): Promise<ResponsePayload> {
    const body = await this.request<ResponseEnvelope>(
      "POST",
      `/responses/${encodeURIComponent(responseId)}/cohort`,
      { cohort, operator },
    );
    return body.response;
  }

  async fetchEvents(since = 0): Promise<EventsEnvelope["events"]> {
    const body = await this.request<EventsEnvelope>("GET", `/events?since=${since}`);
    return body.events;
  }
}

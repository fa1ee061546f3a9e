import type { DashboardModel } from "./dashboard.js";
import { escapeHtml, exact, formatTimestamp, truncate } from "./format.js";
import type { ConsoleStore } from "./store.js";
import type { ItemView, ResponsePayload, TransitionTable } from "./types.js";
import { STATES } from "./states.js";

// Plain HTML string builders so the view layer is testable without a DOM.
// main.ts owns event wiring; markup carries data-action/data-id hooks only.

export function renderBanner(store: ConsoleStore): string {
  if (store.connection === "ok") return "";
  return (
    `<div class="banner" role="alert">API unreachable. Actions are disabled. ` +
    `<button data-action="retry">retry</button></div>`
  );
}

export function renderToasts(store: ConsoleStore): string {
  if (store.toasts.length === 0) return "";
  const rows = store.toasts
    .slice(-4)
    .map((t) => `<li class="toast toast-${t.tone}">${escapeHtml(t.message)}</li>`)
    .join("");
  return `<ul class="toasts">${rows}</ul>`;
}

export function renderFilterBar(store: ConsoleStore): string {
  const options = ["all", ...STATES]
    .map((s) => {
      const selected = (store.filter ?? "all") === s ? " selected" : "";
      return `<option value="${s}"${selected}>${s}</option>`;
    })
    .join("");
  return `<label>state <select data-action="filter">${options}</select></label>`;
}

function button(action: string, id: string, label: string, enabled: boolean): string {
  const dis = enabled ? "" : " disabled";
  return `<button data-action="${action}" data-id="${escapeHtml(id)}"${dis}>${label}</button>`;
}

export function renderItemRow(store: ConsoleStore, item: ItemView): string {
  const terms = item.matched_terms.map(escapeHtml).join(", ");
  const gate =
    item.gate === "passed"
      ? `<span class="gate gate-ok">gate passed</span>`
      : `<span class="gate gate-bad">gate rejected: ${escapeHtml(item.gate_reason ?? "")}</span>`;
  const editor = store.canEdit(item)
    ? `<textarea data-action="draft" data-id="${escapeHtml(item.id)}" rows="3">${escapeHtml(
        store.draft(item.id) || item.proposed_text || "",
      )}</textarea>
       <span class="wordcount${store.draftOverLimit(item.id) ? " over" : ""}">
         ${store.draftWordCount(item.id)} words</span>`
    : "";
  return `
  <article class="item state-${item.state}" data-item="${escapeHtml(item.id)}">
    <header>
      <strong>${escapeHtml(item.id)}</strong>
      <span class="state">${item.state}</span>
      <span class="community">${escapeHtml(item.community)}</span>
      <span class="terms">${terms}</span>
      ${item.relevant ? "" : `<span class="offtopic">out of context</span>`}
    </header>
    <blockquote title="${escapeHtml(item.post_author)}">${escapeHtml(
      truncate(item.post_excerpt, 240),
    )}</blockquote>
    <p class="proposed">${escapeHtml(item.proposed_text ?? "(no text)")}</p>
    ${gate}
    ${editor}
    <footer>
      ${button("approve", item.id, "approve", store.canApprove(item))}
      ${button("edit", item.id, "save edit", store.canEdit(item))}
      ${button("reject", item.id, "reject", store.canReject(item))}
    </footer>
  </article>`;
}

export function renderQueue(store: ConsoleStore): string {
  const empty = store.emptyMessage();
  const body = empty
    ? `<p class="empty">${escapeHtml(empty)}</p>`
    : store.items.map((i) => renderItemRow(store, i)).join("\n");
  return `<section class="queue">${renderFilterBar(store)}\n${body}</section>`;
}

function renderTransitions(label: string, table: TransitionTable): string {
  const header = table.order.map((o) => `<th>${escapeHtml(o)}</th>`).join("");
  const rows = table.counts
    .map((row, i) => {
      const cells = row.map((n) => `<td>${exact(n)}</td>`).join("");
      return `<tr><th>${escapeHtml(table.order[i] ?? "")}</th>${cells}</tr>`;
    })
    .join("");
  return `
  <figure class="transitions" data-cohort="${escapeHtml(label)}">
    <figcaption>${escapeHtml(label)} (${exact(table.total)} responses)</figcaption>
    <table><thead><tr><th></th>${header}</tr></thead><tbody>${rows}</tbody></table>
  </figure>`;
}

export function renderDashboard(model: DashboardModel): string {
  const h = model.headline;
  const headline = `
  <dl class="headline">
    <dt>deployed</dt><dd data-stat="deployed">${exact(h.deployed)}</dd>
    <dt>responded</dt><dd data-stat="responded">${exact(h.responded)}</dd>
    <dt>responses</dt><dd data-stat="responses">${exact(h.responses)}</dd>
    <dt>from original poster</dt><dd data-stat="op">${exact(h.responses_by_original_poster)}</dd>
  </dl>`;
  const communities = model.communities
    .map(
      (c) =>
        `<tr><td>${escapeHtml(c.community)}</td><td>${exact(c.deployed)}</td>` +
        `<td>${exact(c.relevant)}</td><td>${exact(c.out_of_context)}</td></tr>`,
    )
    .join("");
  const cohorts = model.cohorts
    .map(
      (c) =>
        `<tr><td>${escapeHtml(c.cohort)}</td><td>${exact(c.n_interventions)}</td>` +
        `<td>${exact(c.n_responded)}</td><td>${exact(c.response_rate)}</td>` +
        `<td>${exact(c.n_responses)}</td><td>${exact(c.mean_word_count)}</td>` +
        `<td>${exact(c.mean_similarity)}</td></tr>`,
    )
    .join("");
  const tTest =
    "skipped" in model.tTest
      ? `<p class="ttest">t-test skipped: ${escapeHtml(model.tTest.skipped)}</p>`
      : `<p class="ttest">t=${exact(model.tTest.t)} df=${exact(model.tTest.df)} p=${exact(
          model.tTest.p,
        )}</p>`;
  return `
  <section class="dashboard">
    ${headline}
    <table class="communities">
      <thead><tr><th>community</th><th>deployed</th><th>relevant</th><th>out of context</th></tr></thead>
      <tbody>${communities}</tbody>
    </table>
    <table class="cohorts">
      <thead><tr><th>cohort</th><th>interventions</th><th>responded</th><th>rate</th>
      <th>responses</th><th>mean words</th><th>mean similarity</th></tr></thead>
      <tbody>${cohorts}</tbody>
    </table>
    ${renderTransitions("all", model.transitions.all)}
    ${renderTransitions("denier", model.transitions.denier)}
    ${renderTransitions("supporter", model.transitions.supporter)}
    <p class="similarity">similarity macro over responses ${exact(
      model.similarity.macro_over_responses,
    )}, over interventions ${exact(model.similarity.macro_over_interventions)}</p>
    ${tTest}
  </section>`;
}

export function renderResponseRow(response: ResponsePayload, cohorts: readonly string[]): string {
  const options = cohorts
    .map(
      (c) =>
        `<option value="${c}"${c === response.cohort ? " selected" : ""}>${c}</option>`,
    )
    .join("");
  return `
  <li class="response" data-response="${escapeHtml(response.response_id)}">
    <span class="responder">${escapeHtml(response.responder)}</span>
    ${response.is_original_poster ? `<span class="op-badge">OP</span>` : ""}
    <span class="buckets">${escapeHtml(response.original_bucket)} → ${escapeHtml(
      response.response_bucket,
    )}</span>
    <p>${escapeHtml(truncate(response.text, 280))}</p>
    <label>cohort
      <select data-action="cohort" data-id="${escapeHtml(response.response_id)}">${options}</select>
    </label>
  </li>`;
}

export function renderLastRefreshed(store: ConsoleStore): string {
  if (store.lastRefreshedAt === null) return "";
  return `<span class="refreshed">updated ${formatTimestamp(store.lastRefreshedAt / 1000)}</span>`;
}

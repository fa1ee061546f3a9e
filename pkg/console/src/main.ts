import { ConsoleClient } from "./client.js";
import { buildDashboard, responseFeed } from "./dashboard.js";
import {
  renderBanner,
  renderDashboard,
  renderLastRefreshed,
  renderQueue,
  renderResponseRow,
  renderToasts,
} from "./render.js";
import { COHORTS, isItemState } from "./states.js";
import { ConsoleStore } from "./store.js";

// Browser entry point. Base URL is the only configuration: ?api=http://host:port,
// defaulting to the page's own origin (the serve command hosts both).

function apiBase(): string {
  const param = new URLSearchParams(window.location.search).get("api");
  return param ?? window.location.origin;
}

function draw(store: ConsoleStore, root: HTMLElement): void {
  const statsSection = store.stats
    ? renderDashboard(buildDashboard(store.stats))
    : `<p class="empty">no stats yet</p>`;
  const feed = responseFeed(store.responses)
    .map((r) => renderResponseRow(r, COHORTS))
    .join("\n");
  root.innerHTML = `
    ${renderBanner(store)}
    ${renderToasts(store)}
    <header class="top"><h1>campaign console</h1>${renderLastRefreshed(store)}</header>
    <main>
      ${renderQueue(store)}
      ${statsSection}
      <section class="feed"><h2>responses</h2><ul>${feed}</ul></section>
    </main>`;
}

function wire(store: ConsoleStore, root: HTMLElement): void {
  root.addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement | null;
    const action = target?.dataset?.action;
    const id = target?.dataset?.id;
    if (!action) return;
    if (action === "retry") void store.refresh();
    if (!id) return;
    if (action === "approve") void store.approve(id);
    if (action === "reject") void store.reject(id);
    if (action === "edit") void store.submitEdit(id);
  });
  root.addEventListener("input", (ev) => {
    const target = ev.target as HTMLElement | null;
    if (target?.dataset?.action === "draft" && target.dataset.id) {
      store.setDraft(target.dataset.id, (target as HTMLTextAreaElement).value);
    }
  });
  root.addEventListener("change", (ev) => {
    const target = ev.target as HTMLElement | null;
    if (!target?.dataset?.action) return;
    if (target.dataset.action === "cohort" && target.dataset.id) {
      const value = (target as HTMLSelectElement).value;
      if (value === "denier" || value === "supporter" || value === "unknown") {
        void store.assignCohort(target.dataset.id, value);
      }
    }
    if (target.dataset.action === "filter") {
      const value = (target as HTMLSelectElement).value;
      void store.setFilter(isItemState(value) ? value : null);
    }
  });
}

export function start(root: HTMLElement): ConsoleStore {
  const store = new ConsoleStore(new ConsoleClient(apiBase()));
  store.onChange(() => draw(store, root));
  wire(store, root);
  void store.refresh();
  store.startPolling();
  return store;
}

const rootEl = document.getElementById("console-root");
if (rootEl) start(rootEl);

/**
 * Page bootstrap: wires the store to the views and advances the queue.
 *
 * Configuration comes from the URL query string so a deployment is just
 * static files pointed at a running service:
 *
 *   index.html?base=http://127.0.0.1:8000&session=<sid>&worker=w-1
 */

import { ServiceClient } from "./api.js";
import { SessionStore } from "./store.js";
import { markStale, renderBadge, renderItem } from "./views.js";

export interface AppConfig {
  baseUrl: string;
  sessionId: string;
  workerId: string;
}

export function configFromLocation(search: string): AppConfig {
  const params = new URLSearchParams(search);
  return {
    baseUrl: params.get("base") ?? "http://127.0.0.1:8000",
    sessionId: params.get("session") ?? "",
    workerId: params.get("worker") ?? "anonymous",
  };
}

const INSTRUCTIONS =
  "Read the request and the system's paraphrase. Accept if the paraphrase " +
  "means the same thing; reject if it does not. In selection mode, pick " +
  "the candidate that matches the request, or re-write it yourself.";

/** Render the current item into `mount`, or a done banner when empty. */
async function showNext(
  store: SessionStore,
  mount: HTMLElement,
  afterItemId: string | null,
): Promise<void> {
  await store.refresh();
  const item = store.nextAfter(afterItemId);
  mount.replaceChildren();
  if (!item) {
    const done = document.createElement("p");
    done.dataset.role = "done";
    done.textContent = "No items left to judge.";
    mount.appendChild(done);
    const counts = store.session.states;
    const summary = document.createElement("ul");
    for (const [state, count] of Object.entries(counts)) {
      const row = document.createElement("li");
      row.textContent = `${state}: ${count}`;
      row.appendChild(renderBadge(state));
      summary.appendChild(row);
    }
    mount.appendChild(summary);
    return;
  }

  const view = renderItem(item, store.session.mode, {
    onDecide: (itemId, accept) => {
      void store.submitJudgment(itemId, accept).then((result) => {
        if (result.stale) {
          markStale(view);
          return;
        }
        void showNext(store, mount, itemId);
      });
    },
    onSelect: (itemId, action) => {
      void store.submitSelection(itemId, action).then((result) => {
        if (result.stale) {
          markStale(view);
          return;
        }
        void showNext(store, mount, itemId);
      });
    },
  });
  mount.appendChild(view);
}

export async function start(
  root: HTMLElement,
  config: AppConfig,
): Promise<SessionStore> {
  const client = new ServiceClient(config.baseUrl);
  const store = new SessionStore(client, config.workerId);

  const intro = document.createElement("p");
  intro.dataset.role = "instructions";
  intro.textContent = INSTRUCTIONS;
  root.appendChild(intro);

  const who = document.createElement("p");
  who.dataset.role = "worker";
  who.textContent = `Judging as ${config.workerId}`;
  root.appendChild(who);

  const mount = document.createElement("main");
  mount.dataset.role = "mount";
  root.appendChild(mount);

  await store.open(config.sessionId);
  await showNext(store, mount, null);
  return store;
}

declare global {
  interface Window {
    __confirmUiStarted?: boolean;
  }
}

// Auto-start only in a real page; tests call start() themselves.
if (typeof window !== "undefined" && !window.__confirmUiStarted) {
  const root = document.getElementById("app");
  if (root) {
    window.__confirmUiStarted = true;
    void start(root, configFromLocation(window.location.search));
  }
}

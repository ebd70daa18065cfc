/**
 * DOM builders for the two item views.
 *
 * Views are pure functions of an item plus handlers: no hidden state, no
 * service calls. Text lands via textContent, so utterances and glosses
 * render verbatim whatever they contain.
 */

import { Item, SelectionAction } from "./api.js";

export interface ConfirmHandlers {
  onDecide: (itemId: string, accept: boolean) => void;
}

export interface SelectionHandlers {
  onSelect: (itemId: string, action: SelectionAction) => void;
}

const CLOSED_BADGE: Record<string, string> = {
  "auto-executed": "auto-executed",
  executed: "executed",
  abstained: "abstained",
  accepted: "accepted",
  rejected: "rejected",
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function historySection(item: Item): HTMLElement | null {
  const lines: string[] = [];
  if (item.context_user) lines.push(`User: ${item.context_user}`);
  if (item.context_agent) lines.push(`Agent: ${item.context_agent}`);
  if (lines.length === 0) return null;
  const section = el("section", "history");
  section.dataset.role = "history";
  for (const line of lines) {
    section.appendChild(el("p", "history-line", line));
  }
  return section;
}

export function renderBadge(state: string): HTMLElement {
  const badge = el("span", "badge", CLOSED_BADGE[state] ?? state);
  badge.dataset.role = "badge";
  badge.dataset.state = state;
  return badge;
}

function staleNotice(): HTMLElement {
  const notice = el(
    "p",
    "stale-notice",
    "This item was closed by other workers; your view has been refreshed.",
  );
  notice.dataset.role = "stale-notice";
  notice.hidden = true;
  return notice;
}

/** Accept/reject card for one awaiting-judgment (or closed) item. */
export function renderConfirmation(
  item: Item,
  handlers: ConfirmHandlers,
): HTMLElement {
  const root = el("article", "confirm-view");
  root.dataset.itemId = item.item_id;
  root.dataset.state = item.state;

  const history = historySection(item);
  if (history) root.appendChild(history);

  const utterance = el("p", "utterance", item.utterance);
  utterance.dataset.role = "utterance";
  root.appendChild(utterance);

  const gloss = el("p", "gloss", item.gloss ?? "");
  gloss.dataset.role = "gloss";
  root.appendChild(gloss);

  root.appendChild(staleNotice());

  const closed = item.state !== "awaiting-judgment";
  const actions = el("div", "actions");
  const accept = el("button", "accept", "Accept");
  accept.dataset.role = "accept";
  const reject = el("button", "reject", "Reject");
  reject.dataset.role = "reject";
  accept.disabled = closed;
  reject.disabled = closed;
  accept.addEventListener("click", () =>
    handlers.onDecide(item.item_id, true),
  );
  reject.addEventListener("click", () =>
    handlers.onDecide(item.item_id, false),
  );
  actions.append(accept, reject);
  root.appendChild(actions);

  if (closed) root.appendChild(renderBadge(item.state));
  return root;
}

/** Candidate list plus optional manual rewrite for one pending item. */
export function renderSelection(
  item: Item,
  handlers: SelectionHandlers,
): HTMLElement {
  const root = el("article", "selection-view");
  root.dataset.itemId = item.item_id;
  root.dataset.state = item.state;

  const history = historySection(item);
  if (history) root.appendChild(history);

  const utterance = el("p", "utterance", item.utterance);
  utterance.dataset.role = "utterance";
  root.appendChild(utterance);

  root.appendChild(staleNotice());

  const list = el("ol", "candidates");
  list.dataset.role = "candidates";
  const radios: HTMLInputElement[] = [];
  for (const [index, candidate] of (item.candidates ?? []).entries()) {
    const row = el("li", "candidate");
    const radio = el("input");
    radio.type = "radio";
    radio.name = `candidate-${item.item_id}`;
    radio.value = String(index);
    radios.push(radio);
    const label = el("label");
    label.append(
      radio,
      el("span", "candidate-gloss", candidate.gloss),
      // The service already rounded this; render its value untouched.
      el("span", "candidate-confidence", String(candidate.confidence)),
    );
    row.appendChild(label);
    list.appendChild(row);
  }
  root.appendChild(list);

  const rewrite = el("input", "rewrite");
  rewrite.type = "text";
  rewrite.placeholder = "or re-write the request";
  rewrite.dataset.role = "rewrite";
  root.appendChild(rewrite);

  const submit = el("button", "submit", "Submit");
  submit.dataset.role = "submit";
  const closed = item.state !== "pending";
  submit.disabled = closed;
  rewrite.disabled = closed;
  for (const radio of radios) radio.disabled = closed;

  // A non-empty rewrite takes over: rows grey out so exactly one of the
  // two inputs can ever be submitted.
  rewrite.addEventListener("input", () => {
    const takeover = rewrite.value.trim().length > 0;
    for (const radio of radios) radio.disabled = takeover || closed;
  });

  submit.addEventListener("click", () => {
    const text = rewrite.value.trim();
    if (text) {
      handlers.onSelect(item.item_id, { rewrite: text });
      return;
    }
    const chosen = radios.findIndex((radio) => radio.checked);
    if (chosen >= 0) handlers.onSelect(item.item_id, { index: chosen });
  });
  root.appendChild(submit);

  if (closed) root.appendChild(renderBadge(item.state));
  return root;
}

/** Mode- and state-appropriate view for any item. */
export function renderItem(
  item: Item,
  mode: string,
  handlers: ConfirmHandlers & SelectionHandlers,
): HTMLElement {
  if (mode === "select" && (item.state === "pending" || item.candidates)) {
    return renderSelection(item, handlers);
  }
  return renderConfirmation(item, handlers);
}

/** Flip the stale notice on after a lost race; view stays read-only. */
export function markStale(view: HTMLElement): void {
  const notice = view.querySelector<HTMLElement>('[data-role="stale-notice"]');
  if (notice) notice.hidden = false;
  for (const button of view.querySelectorAll("button")) {
    button.disabled = true;
  }
}

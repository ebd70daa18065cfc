/**
 * Client-side session state: a thin, refreshable mirror of the service.
 *
 * The store never owns decisions. Everything re-materializes from the
 * service on refresh, so losing the tab loses nothing. What the store
 * does own is submission discipline: per worker and item, at most one
 * judgment ever leaves this client, even under double clicks.
 */

import {
  Item,
  ItemState,
  SelectionAction,
  ServiceClient,
  ServiceError,
  SessionSummary,
} from "./api.js";

const OPEN_STATES: ItemState[] = ["pending", "awaiting-judgment"];

export interface SubmitResult {
  item: Item;
  /** False when the click was suppressed as a duplicate or a stale race. */
  submitted: boolean;
  /** Set when the service reports the item closed under us. */
  stale: boolean;
}

export class SessionStore {
  private summary: SessionSummary | null = null;
  private items = new Map<string, Item>();
  private inflight = new Set<string>();
  private judged = new Set<string>();

  constructor(
    private readonly client: ServiceClient,
    readonly workerId: string,
  ) {}

  get session(): SessionSummary {
    if (!this.summary) throw new Error("no session open");
    return this.summary;
  }

  get allItems(): Item[] {
    return [...this.items.values()];
  }

  item(itemId: string): Item | undefined {
    return this.items.get(itemId);
  }

  /** Items this worker can still act on, in service order. */
  queue(): Item[] {
    return this.allItems.filter(
      (item) =>
        OPEN_STATES.includes(item.state) &&
        !item.judgments.some((j) => j.worker_id === this.workerId),
    );
  }

  /** The next actionable item after the given one, in service order. */
  nextAfter(itemId: string | null): Item | null {
    const queue = this.queue();
    if (queue.length === 0) return null;
    if (itemId === null) return queue[0] ?? null;
    const order = [...this.items.keys()];
    const anchor = order.indexOf(itemId);
    const later = queue.find((item) => order.indexOf(item.item_id) > anchor);
    return later ?? queue[0] ?? null;
  }

  async open(sessionId: string): Promise<void> {
    this.summary = await this.client.getSession(sessionId);
    await this.refresh();
  }

  async refresh(): Promise<void> {
    const sid = this.session.session_id;
    this.summary = await this.client.getSession(sid);
    const items = await this.client.listItems(sid);
    this.items = new Map(items.map((item) => [item.item_id, item]));
  }

  private dedupeKey(itemId: string): string {
    return `${this.workerId}:${itemId}`;
  }

  async submitJudgment(itemId: string, accept: boolean): Promise<SubmitResult> {
    const key = this.dedupeKey(itemId);
    const current = this.items.get(itemId);
    const alreadyJudged =
      this.judged.has(key) ||
      (current?.judgments ?? []).some((j) => j.worker_id === this.workerId);
    if (this.inflight.has(key) || alreadyJudged) {
      return { item: current as Item, submitted: false, stale: false };
    }
    this.inflight.add(key);
    try {
      const item = await this.client.submitJudgment(
        this.session.session_id,
        itemId,
        this.workerId,
        accept,
      );
      this.judged.add(key);
      this.items.set(itemId, item);
      return { item, submitted: true, stale: false };
    } catch (error) {
      if (error instanceof ServiceError && error.code === "duplicate_judgment") {
        // The service already has our judgment (a retry raced a success).
        this.judged.add(key);
        return { item: current as Item, submitted: false, stale: false };
      }
      if (error instanceof ServiceError && error.code === "item_closed") {
        const item = await this.client.getItem(this.session.session_id, itemId);
        this.items.set(itemId, item);
        return { item, submitted: false, stale: true };
      }
      throw error;
    } finally {
      this.inflight.delete(key);
    }
  }

  async submitSelection(
    itemId: string,
    action: SelectionAction,
  ): Promise<SubmitResult> {
    const key = this.dedupeKey(itemId);
    if (this.inflight.has(key)) {
      return { item: this.items.get(itemId) as Item, submitted: false, stale: false };
    }
    this.inflight.add(key);
    try {
      const item = await this.client.submitSelection(
        this.session.session_id,
        itemId,
        action,
      );
      this.items.set(itemId, item);
      return { item, submitted: true, stale: false };
    } catch (error) {
      if (error instanceof ServiceError && error.code === "item_closed") {
        const item = await this.client.getItem(this.session.session_id, itemId);
        this.items.set(itemId, item);
        return { item, submitted: false, stale: true };
      }
      throw error;
    } finally {
      this.inflight.delete(key);
    }
  }
}

/**
 * Change queue between the editor and the annotation service.
 *
 * Every editor change becomes one indexed, timestamped event. Events are
 * flushed in contiguous batches: a flush goes out after half a second of
 * quiet or as soon as fifty events are queued, and only one request is ever
 * in flight. The tracked invariant is that replaying acked + pending events
 * over the starting text always reproduces the editor text; if the server
 * rejects a batch, the tracker falls back to a single whole-text replacement
 * event on top of the last acknowledged state, so the invariant survives
 * even a client-side bookkeeping bug.
 */

import { ApiError, type ConflictDetail, type EditEvent } from "./api.js";
import { applyChange, type Change } from "./textarea-op.js";

export interface EventTransport {
  sendEvents(messageId: string, events: EditEvent[]): Promise<{ accepted_through: number }>;
}

export interface TrackerOptions {
  messageId: string;
  baseText: string;
  transport: EventTransport;
  clock?: () => number;
  debounceMs?: number;
  flushAt?: number;
  maxResyncs?: number;
  onStateChange?: (tracker: ChangeTracker) => void;
}

export class ChangeTracker {
  readonly messageId: string;
  readonly baseText: string;

  private current: string;
  private ackedText: string;
  private ackedCount = 0;
  private pending: EditEvent[] = [];
  private flight: Promise<void> | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private failure: Error | null = null;

  private readonly transport: EventTransport;
  private readonly clock: () => number;
  private readonly debounceMs: number;
  private readonly flushAt: number;
  private readonly maxResyncs: number;
  private readonly onStateChange?: (tracker: ChangeTracker) => void;

  constructor(opts: TrackerOptions) {
    this.messageId = opts.messageId;
    this.baseText = opts.baseText;
    this.current = opts.baseText;
    this.ackedText = opts.baseText;
    this.transport = opts.transport;
    this.clock = opts.clock ?? Date.now;
    this.debounceMs = opts.debounceMs ?? 500;
    this.flushAt = opts.flushAt ?? 50;
    this.maxResyncs = opts.maxResyncs ?? 3;
    this.onStateChange = opts.onStateChange;
  }

  get text(): string {
    return this.current;
  }

  get pendingCount(): number {
    return this.pending.length;
  }

  get acceptedCount(): number {
    return this.ackedCount;
  }

  get lastFailure(): Error | null {
    return this.failure;
  }

  /** True when every captured event has been acknowledged. */
  idle(): boolean {
    return this.pending.length === 0 && this.flight === null;
  }

  modified(): boolean {
    return this.current !== this.baseText;
  }

  /** Replay invariant: acked + pending over the base must equal the editor text. */
  replayConsistent(): boolean {
    let text = this.ackedText;
    for (const ev of this.pending) {
      text = applyChange(text, {
        position: ev.position,
        deleted_len: ev.deleted_len,
        inserted_text: ev.inserted_text,
      });
    }
    return text === this.current;
  }

  record(change: Change): EditEvent {
    const event: EditEvent = {
      event_index: this.ackedCount + this.pending.length,
      timestamp: this.clock(),
      position: change.position,
      deleted_len: change.deleted_len,
      inserted_text: change.inserted_text,
    };
    this.current = applyChange(this.current, change);
    this.pending.push(event);
    this.failure = null;
    if (this.pending.length >= this.flushAt) {
      this.flushSoon();
    } else {
      this.clearTimer();
      this.timer = setTimeout(() => this.flushSoon(), this.debounceMs);
    }
    this.notify();
    return event;
  }

  /** Kick off a flush without waiting on it; failures land in lastFailure. */
  flushSoon(): void {
    this.flush().catch((err: Error) => {
      this.failure = err;
      this.notify();
    });
  }

  flush(): Promise<void> {
    if (this.flight === null) {
      this.flight = this.drain().finally(() => {
        this.flight = null;
        this.notify();
      });
    }
    return this.flight;
  }

  /** Resolve once the queue is empty and acknowledged. */
  async settle(): Promise<void> {
    while (!this.idle()) {
      await this.flush();
    }
    if (this.failure) throw this.failure;
  }

  dispose(): void {
    this.clearTimer();
  }

  /** Rebuild the queue as one whole-text rewrite; used after a submit-time mismatch. */
  forceResync(): void {
    this.resync({ error: "manual resync" });
    this.failure = null;
    this.flushSoon();
  }

  private async drain(): Promise<void> {
    this.clearTimer();
    let resyncs = 0;
    while (this.pending.length > 0) {
      const batch = this.pending.slice();
      try {
        const ack = await this.transport.sendEvents(this.messageId, batch);
        this.ackedCount = ack.accepted_through + 1;
        for (const ev of batch) {
          this.ackedText = applyChange(this.ackedText, {
            position: ev.position,
            deleted_len: ev.deleted_len,
            inserted_text: ev.inserted_text,
          });
        }
        this.pending.splice(0, batch.length);
        this.failure = null;
      } catch (err) {
        const conflict = err instanceof ApiError ? err.conflict : null;
        if (conflict !== null && resyncs < this.maxResyncs) {
          resyncs++;
          this.resync(conflict);
          continue;
        }
        throw err;
      }
    }
  }

  /**
   * The service takes a batch all-or-nothing, so after a rejection its state
   * is exactly the acked prefix. Replace the queue with one event rewriting
   * the whole message from that prefix to the current editor text.
   */
  private resync(conflict: ConflictDetail): void {
    if (conflict.expected !== undefined && conflict.expected !== this.ackedCount) {
      throw new Error(
        `session desync: server expects index ${conflict.expected}, client acked ${this.ackedCount}`
      );
    }
    this.pending = [
      {
        event_index: this.ackedCount,
        timestamp: this.clock(),
        position: 0,
        deleted_len: this.ackedText.length,
        inserted_text: this.current,
      },
    ];
  }

  private clearTimer(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }

  private notify(): void {
    this.onStateChange?.(this);
  }
}

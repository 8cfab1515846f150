import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { ApiError, type ConflictDetail, type EditEvent } from "../src/api";
import { ChangeTracker, type EventTransport } from "../src/tracker";
import { applyChange } from "../src/textarea-op";

/** In-memory stand-in enforcing the service's contiguity rules. */
class FakeTransport implements EventTransport {
  batches: EditEvent[][] = [];
  accepted: EditEvent[] = [];
  failures: ConflictDetail[] = [];
  networkErrors = 0;
  inFlight = 0;
  maxInFlight = 0;
  gate: Promise<void> | null = null;

  async sendEvents(_messageId: string, events: EditEvent[]): Promise<{ accepted_through: number }> {
    this.inFlight++;
    this.maxInFlight = Math.max(this.maxInFlight, this.inFlight);
    try {
      if (this.gate) await this.gate;
      this.batches.push(events.slice());
      if (this.networkErrors > 0) {
        this.networkErrors--;
        throw new TypeError("fetch failed");
      }
      const failure = this.failures.shift();
      if (failure) throw new ApiError(409, failure, "fake://events");
      for (const ev of events) {
        if (ev.event_index < this.accepted.length) continue;
        if (ev.event_index !== this.accepted.length) {
          throw new ApiError(
            409,
            {
              error: "event index gap",
              first_bad_index: ev.event_index,
              expected: this.accepted.length,
            },
            "fake://events"
          );
        }
        this.accepted.push(ev);
      }
      return { accepted_through: this.accepted.length - 1 };
    } finally {
      this.inFlight--;
    }
  }

  replay(base: string): string {
    let text = base;
    for (const ev of this.accepted) {
      text = applyChange(text, {
        position: ev.position,
        deleted_len: ev.deleted_len,
        inserted_text: ev.inserted_text,
      });
    }
    return text;
  }
}

function makeTracker(transport: FakeTransport, extra: Partial<ConstructorParameters<typeof ChangeTracker>[0]> = {}) {
  return new ChangeTracker({
    messageId: "m1",
    baseText: "draft text",
    transport,
    clock: () => 1234,
    ...extra,
  });
}

describe("ChangeTracker", () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });
  afterEach(() => {
    vi.useRealTimers();
  });

  it("assigns contiguous indices starting at zero", () => {
    const tracker = makeTracker(new FakeTransport());
    const a = tracker.record({ position: 0, deleted_len: 0, inserted_text: "x" });
    const b = tracker.record({ position: 1, deleted_len: 0, inserted_text: "y" });
    const c = tracker.record({ position: 2, deleted_len: 1, inserted_text: "" });
    expect([a.event_index, b.event_index, c.event_index]).toEqual([0, 1, 2]);
    expect(tracker.replayConsistent()).toBe(true);
  });

  it("waits out the debounce window before flushing", async () => {
    const transport = new FakeTransport();
    const tracker = makeTracker(transport);
    tracker.record({ position: 0, deleted_len: 0, inserted_text: "a" });
    await vi.advanceTimersByTimeAsync(499);
    expect(transport.batches).toHaveLength(0);
    await vi.advanceTimersByTimeAsync(1);
    await tracker.settle();
    expect(transport.batches).toHaveLength(1);
    expect(tracker.idle()).toBe(true);
  });

  it("restarts the debounce window on every change", async () => {
    const transport = new FakeTransport();
    const tracker = makeTracker(transport);
    tracker.record({ position: 0, deleted_len: 0, inserted_text: "a" });
    await vi.advanceTimersByTimeAsync(400);
    tracker.record({ position: 1, deleted_len: 0, inserted_text: "b" });
    await vi.advanceTimersByTimeAsync(400);
    expect(transport.batches).toHaveLength(0);
    await vi.advanceTimersByTimeAsync(100);
    await tracker.settle();
    expect(transport.batches).toHaveLength(1);
    expect(transport.batches[0]).toHaveLength(2);
  });

  it("flushes immediately once the batch threshold is reached", async () => {
    const transport = new FakeTransport();
    const tracker = makeTracker(transport, { flushAt: 5 });
    for (let i = 0; i < 5; i++) {
      tracker.record({ position: i, deleted_len: 0, inserted_text: "x" });
    }
    await tracker.settle();
    expect(transport.batches.length).toBeGreaterThan(0);
    expect(transport.accepted).toHaveLength(5);
  });

  it("keeps at most one request in flight", async () => {
    const transport = new FakeTransport();
    let release = () => {};
    transport.gate = new Promise((resolve) => {
      release = resolve;
    });
    const tracker = makeTracker(transport, { flushAt: 1 });
    tracker.record({ position: 0, deleted_len: 0, inserted_text: "a" });
    tracker.record({ position: 1, deleted_len: 0, inserted_text: "b" });
    tracker.record({ position: 2, deleted_len: 0, inserted_text: "c" });
    release();
    transport.gate = null;
    await tracker.settle();
    expect(transport.maxInFlight).toBe(1);
    expect(transport.replay("draft text")).toBe(tracker.text);
  });

  it("drains events recorded while a flush is in flight", async () => {
    const transport = new FakeTransport();
    const tracker = makeTracker(transport, { flushAt: 1 });
    tracker.record({ position: 0, deleted_len: 0, inserted_text: "a" });
    const flushing = tracker.flush();
    tracker.record({ position: 1, deleted_len: 0, inserted_text: "b" });
    await flushing;
    await tracker.settle();
    expect(transport.accepted).toHaveLength(2);
    expect(transport.replay("draft text")).toBe(tracker.text);
  });

  it("resynchronizes with a whole-text rewrite after a conflict", async () => {
    const transport = new FakeTransport();
    const tracker = makeTracker(transport, { flushAt: 2 });
    tracker.record({ position: 0, deleted_len: 0, inserted_text: "one " });
    tracker.record({ position: 4, deleted_len: 0, inserted_text: "two " });
    await tracker.settle();
    expect(transport.accepted).toHaveLength(2);

    transport.failures.push({ error: "simulated rejection", expected: 2 });
    tracker.record({ position: 0, deleted_len: 0, inserted_text: "three " });
    tracker.record({ position: 0, deleted_len: 0, inserted_text: "四 " });
    await tracker.settle();

    // the rejected pair collapses into one rewrite event with the next index
    const last = transport.accepted[transport.accepted.length - 1]!;
    expect(last.event_index).toBe(2);
    expect(last.position).toBe(0);
    expect(last.deleted_len).toBe("one two draft text".length);
    expect(transport.accepted).toHaveLength(3);
    expect(transport.replay("draft text")).toBe(tracker.text);
    expect(tracker.replayConsistent()).toBe(true);
    expect(tracker.idle()).toBe(true);
  });

  it("treats an unexplained index mismatch as fatal", async () => {
    const transport = new FakeTransport();
    const tracker = makeTracker(transport, { flushAt: 1 });
    transport.failures.push({ error: "event index gap", expected: 7 });
    tracker.record({ position: 0, deleted_len: 0, inserted_text: "a" });
    await expect(tracker.settle()).rejects.toThrow(/desync/);
  });

  it("keeps the queue across network errors and retries on the next flush", async () => {
    const transport = new FakeTransport();
    const tracker = makeTracker(transport, { flushAt: 1 });
    transport.networkErrors = 1;
    tracker.record({ position: 0, deleted_len: 0, inserted_text: "a" });
    await expect(tracker.flush()).rejects.toThrow(/fetch failed/);
    expect(tracker.pendingCount).toBe(1);
    expect(tracker.lastFailure).toBeInstanceOf(TypeError);
    await tracker.settle();
    expect(transport.accepted).toHaveLength(1);
    expect(tracker.idle()).toBe(true);
  });

  it("notifies on every state change for submit gating", () => {
    const transport = new FakeTransport();
    const states: boolean[] = [];
    const tracker = makeTracker(transport, {
      onStateChange: (t) => states.push(t.idle()),
    });
    tracker.record({ position: 0, deleted_len: 0, inserted_text: "a" });
    expect(states[states.length - 1]).toBe(false);
  });

  it("keeps the replay invariant through a burst of random edits", () => {
    const transport = new FakeTransport();
    const tracker = makeTracker(transport, { debounceMs: 60_000 });
    let state = 42;
    const rand = (n: number) => {
      state = (state * 1103515245 + 12345) & 0x7fffffff;
      return state % n;
    };
    for (let i = 0; i < 200; i++) {
      const len = tracker.text.length;
      const from = rand(len + 1);
      const del = rand(len + 1 - from);
      const ins = "xyz".slice(0, rand(4));
      tracker.record({ position: from, deleted_len: del, inserted_text: ins });
      expect(tracker.replayConsistent()).toBe(true);
    }
  });
});

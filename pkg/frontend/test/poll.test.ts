import { describe, expect, it } from "vitest";

import { MIN_POLL_INTERVAL_MS, startPolling, type TimerHooks } from "../src/poll.js";

/** Manual timer queue so cadence is observable without real waiting. */
class FakeTimers implements TimerHooks {
  pending = new Map<number, { fn: () => void; ms: number }>();
  scheduledIntervals: number[] = [];
  private next = 1;

  set(fn: () => void, ms: number): unknown {
    const handle = this.next++;
    this.pending.set(handle, { fn, ms });
    this.scheduledIntervals.push(ms);
    return handle;
  }

  clear(handle: unknown): void {
    this.pending.delete(handle as number);
  }

  async fire(): Promise<void> {
    const entries = [...this.pending.entries()];
    this.pending.clear();
    for (const [, entry] of entries) {
      entry.fn();
    }
    // let the async tick settle
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}

describe("polling", () => {
  it("clamps cadence to at least one second", async () => {
    const timers = new FakeTimers();
    const poller = startPolling(async () => "continue", 50, timers);
    await timers.fire();
    expect(timers.scheduledIntervals.every((ms) => ms >= MIN_POLL_INTERVAL_MS)).toBe(true);
    poller.stop();
  });

  it("stops when the tick reports a terminal outcome", async () => {
    const timers = new FakeTimers();
    let calls = 0;
    const poller = startPolling(async () => {
      calls += 1;
      return calls >= 3 ? "stop" : "continue";
    }, 1000, timers);
    for (let i = 0; i < 6; i++) {
      await timers.fire();
    }
    expect(calls).toBe(3);
    expect(poller.active).toBe(false);
    expect(timers.pending.size).toBe(0);
  });

  it("stop() cancels the pending timer and future ticks", async () => {
    const timers = new FakeTimers();
    let calls = 0;
    const poller = startPolling(async () => {
      calls += 1;
      return "continue";
    }, 1000, timers);
    poller.stop();
    await timers.fire();
    expect(calls).toBe(0);
    expect(poller.active).toBe(false);
  });

  it("a throwing tick keeps the poll alive", async () => {
    const timers = new FakeTimers();
    let calls = 0;
    const poller = startPolling(async () => {
      calls += 1;
      if (calls === 1) throw new Error("transient");
      return "stop";
    }, 1000, timers);
    await timers.fire();
    await timers.fire();
    expect(calls).toBe(2);
    expect(poller.active).toBe(false);
  });
});

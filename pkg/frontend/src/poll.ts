/** Polling scheduler: cadence is clamped to at least one second and the
 * loop stops itself as soon as the tick reports a terminal outcome. */

export const MIN_POLL_INTERVAL_MS = 1000;

export type Tick = () => Promise<"continue" | "stop">;

export interface TimerHooks {
  set: (fn: () => void, ms: number) => unknown;
  clear: (handle: unknown) => void;
}

const realTimers: TimerHooks = {
  set: (fn, ms) => setTimeout(fn, ms),
  clear: (handle) => clearTimeout(handle as Parameters<typeof clearTimeout>[0]),
};

export interface Poller {
  stop: () => void;
  readonly active: boolean;
}

export function startPolling(tick: Tick, intervalMs: number, timers: TimerHooks = realTimers): Poller {
  const interval = Math.max(MIN_POLL_INTERVAL_MS, intervalMs);
  let handle: unknown = null;
  let stopped = false;

  const schedule = () => {
    handle = timers.set(run, interval);
  };
  const run = async () => {
    if (stopped) return;
    let outcome: "continue" | "stop";
    try {
      outcome = await tick();
    } catch {
      outcome = "continue"; // transient errors keep the poll alive
    }
    if (stopped) return;
    if (outcome === "stop") {
      stopped = true;
      return;
    }
    schedule();
  };

  schedule();
  return {
    stop: () => {
      stopped = true;
      if (handle !== null) timers.clear(handle);
    },
    get active() {
      return !stopped;
    },
  };
}

import type { MetricsSnapshot } from "./types.js";

export type MetricsListener = (snap: MetricsSnapshot, previous: MetricsSnapshot | null) => void;

/** Polls the metrics endpoint on a fixed interval and fans out snapshots. */
export class MetricsPoller {
  private listeners: MetricsListener[] = [];
  private last: MetricsSnapshot | null = null;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly fetchSnapshot: () => Promise<MetricsSnapshot>,
    readonly intervalMs = 1000,
  ) {}

  subscribe(listener: MetricsListener): void {
    this.listeners.push(listener);
    if (this.last) listener(this.last, null);
  }

  async pollOnce(): Promise<void> {
    let snap: MetricsSnapshot;
    try {
      snap = await this.fetchSnapshot();
    } catch {
      return; // offline server: keep the previous panel contents
    }
    const prev = this.last;
    this.last = snap;
    for (const fn of this.listeners) fn(snap, prev);
  }

  start(): void {
    if (this.timer) return;
    void this.pollOnce();
    this.timer = setInterval(() => void this.pollOnce(), this.intervalMs);
  }

  stop(): void {
    if (this.timer) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}

export function formatMs(seconds: number | undefined): string {
  if (seconds === undefined) return "–";
  return `${(seconds * 1000).toFixed(1)} ms`;
}

/** One-line delta summary used by the restyle demo: shows that paint-only
 * changes hit the grid cache instead of re-rendering. */
export function describeDelta(snap: MetricsSnapshot, prev: MetricsSnapshot | null): string {
  if (!prev) return "";
  const rendered = snap.tiles_rendered - prev.tiles_rendered;
  const hits = snap.cache_hits - prev.cache_hits;
  if (rendered === 0 && hits === 0) return "idle";
  return `+${rendered} rendered, +${hits} cache hits`;
}

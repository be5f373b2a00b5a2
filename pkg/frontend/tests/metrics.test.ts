import assert from "node:assert/strict";
import test from "node:test";

import { MetricsPoller, describeDelta, formatMs } from "../src/metrics.js";
import type { MetricsSnapshot } from "../src/types.js";

function snap(overrides: Partial<MetricsSnapshot> = {}): MetricsSnapshot {
  return {
    tiles_rendered: 0,
    cache_hits: 0,
    mbr_skips: 0,
    dedup_joins: 0,
    tasks_enqueued: 0,
    retries: 0,
    failures: 0,
    bad_requests: 0,
    queue_depth: 0,
    result_entries: 0,
    render_time: { count: 0 },
    ...overrides,
  };
}

test("poller fans out snapshots with the previous value", async () => {
  const feed = [snap(), snap({ tiles_rendered: 4 })];
  let k = 0;
  const poller = new MetricsPoller(async () => feed[Math.min(k++, feed.length - 1)]);
  const seen: Array<[number, number | null]> = [];
  poller.subscribe((s, prev) => seen.push([s.tiles_rendered, prev ? prev.tiles_rendered : null]));
  await poller.pollOnce();
  await poller.pollOnce();
  assert.deepEqual(seen, [
    [0, null],
    [4, 0],
  ]);
});

test("poller swallows fetch failures and keeps the last snapshot", async () => {
  let fail = false;
  const poller = new MetricsPoller(async () => {
    if (fail) throw new Error("offline");
    return snap({ cache_hits: 7 });
  });
  const seen: number[] = [];
  poller.subscribe((s) => seen.push(s.cache_hits));
  await poller.pollOnce();
  fail = true;
  await poller.pollOnce();
  assert.deepEqual(seen, [7]);
});

test("late subscribers receive the latest snapshot immediately", async () => {
  const poller = new MetricsPoller(async () => snap({ queue_depth: 3 }));
  await poller.pollOnce();
  let got = -1;
  poller.subscribe((s) => (got = s.queue_depth));
  assert.equal(got, 3);
});

test("restyle demo delta line", () => {
  const before = snap({ tiles_rendered: 10, cache_hits: 2 });
  const afterRestyle = snap({ tiles_rendered: 10, cache_hits: 8 });
  assert.equal(describeDelta(afterRestyle, before), "+0 rendered, +6 cache hits");
  assert.equal(describeDelta(before, null), "");
  assert.equal(describeDelta(before, before), "idle");
});

test("millisecond formatting", () => {
  assert.equal(formatMs(0.0123), "12.3 ms");
  assert.equal(formatMs(undefined), "–");
});

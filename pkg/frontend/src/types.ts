export interface DatasetMeta {
  name: string;
  geom_type: "point" | "line" | "polygon";
  mbr: [number, number, number, number];
  counts: { records: number; primitives: number; indexed: number };
}

export interface RenderTimeStats {
  count: number;
  min?: number;
  p25?: number;
  p50?: number;
  p75?: number;
  p95?: number;
  max?: number;
  mean?: number;
}

export interface MetricsSnapshot {
  tiles_rendered: number;
  cache_hits: number;
  mbr_skips: number;
  dedup_joins: number;
  tasks_enqueued: number;
  retries: number;
  failures: number;
  bad_requests: number;
  queue_depth: number;
  result_entries: number;
  render_time: RenderTimeStats;
}

export type FillMode = "none" | "mono" | "pattern";

export interface LayerStyle {
  /** stroke width in pixels; part of the server's grid cache key */
  width: number;
  /** RRGGBBAA hex, no leading # */
  stroke: string;
  fillMode: FillMode;
  fillColor: string;
  patternId: string | null;
}

export interface LayerState {
  dataset: string;
  visible: boolean;
  style: LayerStyle;
}

export const DEFAULT_STYLE: LayerStyle = {
  width: 1,
  stroke: "d03020ff",
  fillMode: "none",
  fillColor: "78aadcff",
  patternId: null,
};

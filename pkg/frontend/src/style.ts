import type { LayerStyle } from "./types.js";

/** Query-string form of a layer style, in stable parameter order. */
export function styleQuery(style: LayerStyle): string {
  const params = new URLSearchParams();
  params.set("width", String(style.width));
  params.set("stroke", style.stroke);
  if (style.fillMode === "mono") {
    params.set("fill", "mono");
    params.set("fillcolor", style.fillColor);
  } else if (style.fillMode === "pattern" && style.patternId) {
    params.set("fill", `pattern:${style.patternId}`);
  } else {
    params.set("fill", "none");
  }
  return params.toString();
}

/** XYZ tile URL template for a dataset layer. */
export function tileUrlTemplate(base: string, dataset: string, style: LayerStyle): string {
  const root = base.replace(/\/+$/, "");
  return `${root}/tile/${encodeURIComponent(dataset)}/{z}/{x}/{y}.png?${styleQuery(style)}`;
}

/**
 * The server caches classification grids keyed by (dataset, z, x, y, width):
 * everything else in a style is paint-only. Two styles with equal grid keys
 * re-render nothing when swapped.
 */
export function gridCacheKeyPart(dataset: string, style: LayerStyle): string {
  return `${dataset}|width=${style.width}`;
}

export function isValidColor(value: string): boolean {
  return /^[0-9a-fA-F]{8}$/.test(value);
}

export function clampWidth(value: number): number {
  if (!Number.isFinite(value)) return 1;
  return Math.min(64, Math.max(1, Math.round(value)));
}

import * as L from "leaflet";

/** 1x1 grey PNG shown when a tile fails twice. */
export const ERROR_TILE =
  "data:image/png;base64,iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR42mP8z8BQDwAEhQGAhKmMIQAAAABJRU5ErkJggg==";

/**
 * XYZ tile layer that retries a failed tile once (cache-busted) before
 * showing the error placeholder.
 */
export function createTileLayer(template: string, attribution: string): L.TileLayer {
  const layer = L.tileLayer(template, {
    tileSize: 256,
    minZoom: 0,
    maxZoom: 22,
    attribution,
    errorTileUrl: ERROR_TILE,
  });
  const attempts = new Map<string, number>();
  layer.on("tileerror", (event: L.TileErrorEvent) => {
    const el = event.tile as HTMLImageElement;
    const key = `${event.coords.z}/${event.coords.x}/${event.coords.y}`;
    const tried = attempts.get(key) ?? 0;
    if (tried >= 1) {
      attempts.delete(key);
      return; // second failure: leave the errorTileUrl placeholder
    }
    attempts.set(key, tried + 1);
    const base = layer.getTileUrl(event.coords);
    el.src = `${base}${base.includes("?") ? "&" : "?"}retry=1`;
  });
  layer.on("tileload", (event: L.TileEvent) => {
    attempts.delete(`${event.coords.z}/${event.coords.x}/${event.coords.y}`);
  });
  return layer;
}

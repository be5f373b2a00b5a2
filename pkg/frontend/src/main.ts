import * as L from "leaflet";
import "leaflet/dist/leaflet.css";

import { TileServiceClient } from "./api.js";
import { MetricsPoller, describeDelta, formatMs } from "./metrics.js";
import { datasetSummary, formatCount, renderUploadForm } from "./panel.js";
import { createTileLayer } from "./retry.js";
import { clampWidth, gridCacheKeyPart, isValidColor, tileUrlTemplate } from "./style.js";
import { DEFAULT_STYLE, type DatasetMeta, type LayerState } from "./types.js";

const client = new TileServiceClient("");

const map = L.map("map", {
  crs: L.CRS.EPSG3857,
  center: [20, 10],
  zoom: 3,
  minZoom: 0,
  maxZoom: 18,
});

const layers = new Map<string, { state: LayerState; tiles: L.TileLayer }>();
let patterns: string[] = [];

function layerTemplate(state: LayerState): string {
  return tileUrlTemplate("", state.dataset, state.style);
}

function addLayer(meta: DatasetMeta): void {
  if (layers.has(meta.name)) return;
  const state: LayerState = {
    dataset: meta.name,
    visible: true,
    style: { ...DEFAULT_STYLE, fillMode: meta.geom_type === "polygon" ? "mono" : "none" },
  };
  const tiles = createTileLayer(layerTemplate(state), meta.name);
  tiles.addTo(map);
  layers.set(meta.name, { state, tiles });
  const [minX, minY, maxX, maxY] = meta.mbr;
  map.fitBounds(
    L.latLngBounds(
      L.CRS.EPSG3857.unproject(L.point(minX, minY)),
      L.CRS.EPSG3857.unproject(L.point(maxX, maxY)),
    ).pad(0.1),
  );
  renderLayerPanel();
}

/** Paint-only edits keep the grid cache key; width edits change it. */
function applyStyle(name: string, mutate: (state: LayerState) => void): void {
  const entry = layers.get(name);
  if (!entry) return;
  const before = gridCacheKeyPart(name, entry.state.style);
  mutate(entry.state);
  const after = gridCacheKeyPart(name, entry.state.style);
  entry.tiles.setUrl(layerTemplate(entry.state));
  const note = document.getElementById("restyle-note");
  if (note) {
    note.textContent =
      before === after
        ? "restyle: served from cached grids (watch cache hits)"
        : "width change: new grid key, tiles re-render";
  }
}

function renderLayerPanel(): void {
  const root = document.getElementById("layers");
  if (!root) return;
  root.innerHTML = "";
  for (const { state, tiles } of layers.values()) {
    const el = document.createElement("div");
    el.className = "layer";
    el.innerHTML = `
      <div class="layer-head">
        <label><input type="checkbox" class="vis" ${state.visible ? "checked" : ""}/> ${state.dataset}</label>
      </div>
      <div class="layer-controls">
        <label>width <input class="width" type="number" min="1" max="64" value="${state.style.width}"/></label>
        <label>stroke <input class="stroke" type="color" value="#${state.style.stroke.slice(0, 6)}"/></label>
        <label>fill
          <select class="fillmode">
            <option value="none">none</option>
            <option value="mono">mono</option>
            ${patterns.map((p) => `<option value="pattern:${p}">pattern: ${p}</option>`).join("")}
          </select>
        </label>
        <label>fill color <input class="fillcolor" type="color" value="#${state.style.fillColor.slice(0, 6)}"/></label>
      </div>`;
    const q = <T extends Element>(sel: string): T => el.querySelector(sel) as T;
    q<HTMLSelectElement>(".fillmode").value =
      state.style.fillMode === "pattern" ? `pattern:${state.style.patternId}` : state.style.fillMode;
    q<HTMLInputElement>(".vis").addEventListener("change", (ev) => {
      state.visible = (ev.target as HTMLInputElement).checked;
      if (state.visible) tiles.addTo(map);
      else tiles.remove();
    });
    q<HTMLInputElement>(".width").addEventListener("change", (ev) => {
      applyStyle(state.dataset, (s) => {
        s.style.width = clampWidth(Number((ev.target as HTMLInputElement).value));
      });
    });
    q<HTMLInputElement>(".stroke").addEventListener("change", (ev) => {
      const hex = (ev.target as HTMLInputElement).value.slice(1) + "ff";
      if (isValidColor(hex)) applyStyle(state.dataset, (s) => (s.style.stroke = hex));
    });
    q<HTMLInputElement>(".fillcolor").addEventListener("change", (ev) => {
      const hex = (ev.target as HTMLInputElement).value.slice(1) + "ff";
      if (isValidColor(hex)) applyStyle(state.dataset, (s) => (s.style.fillColor = hex));
    });
    q<HTMLSelectElement>(".fillmode").addEventListener("change", (ev) => {
      const value = (ev.target as HTMLSelectElement).value;
      applyStyle(state.dataset, (s) => {
        if (value.startsWith("pattern:")) {
          s.style.fillMode = "pattern";
          s.style.patternId = value.split(":", 2)[1];
        } else {
          s.style.fillMode = value as "none" | "mono";
          s.style.patternId = null;
        }
      });
    });
    root.appendChild(el);
  }
}

async function refreshDatasets(): Promise<void> {
  const root = document.getElementById("datasets");
  if (!root) return;
  try {
    const items = await client.datasets();
    root.innerHTML = items.length ? "" : "<em>no datasets registered</em>";
    for (const meta of items) {
      const row = document.createElement("div");
      row.className = "dataset-row";
      const added = layers.has(meta.name);
      row.innerHTML = `
        <span>${datasetSummary(meta)}</span>
        <button ${added ? "disabled" : ""}>${added ? "added" : "add layer"}</button>`;
      row.querySelector("button")?.addEventListener("click", () => addLayer(meta));
      root.appendChild(row);
    }
  } catch {
    root.innerHTML = "<em>server unreachable</em>";
  }
}

const poller = new MetricsPoller(() => client.metrics(), 1000);
poller.subscribe((snap, prev) => {
  const panel = document.getElementById("metrics");
  if (!panel) return;
  const rt = snap.render_time;
  panel.innerHTML = `
    <div>tiles rendered <b>${formatCount(snap.tiles_rendered)}</b></div>
    <div>cache hits <b>${formatCount(snap.cache_hits)}</b></div>
    <div>mbr skips <b>${formatCount(snap.mbr_skips)}</b></div>
    <div>queue depth <b>${snap.queue_depth}</b></div>
    <div>render p50 <b>${formatMs(rt.p50)}</b> p95 <b>${formatMs(rt.p95)}</b></div>
    <div class="delta">${describeDelta(snap, prev)}</div>`;
});

renderUploadForm(document.getElementById("upload")!, {
  upload: (name, format, file) => client.upload(name, format, file),
  onUploaded: () => void refreshDatasets(),
});

void client.patterns().then((names) => {
  patterns = names;
  renderLayerPanel();
}).catch(() => undefined);
void refreshDatasets();
setInterval(() => void refreshDatasets(), 5000);
poller.start();

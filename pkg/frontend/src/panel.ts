import type { DatasetMeta } from "./types.js";

export function formatCount(n: number): string {
  if (n >= 1_000_000) return `${(n / 1_000_000).toFixed(1)}M`;
  if (n >= 1_000) return `${(n / 1_000).toFixed(1)}k`;
  return String(n);
}

export function formatMbr(mbr: [number, number, number, number]): string {
  return mbr.map((v) => `${(v / 1000).toFixed(0)}km`).join(", ");
}

export function datasetSummary(meta: DatasetMeta): string {
  const unit = { point: "points", line: "segments", polygon: "edges" }[meta.geom_type];
  return `${meta.name} · ${meta.geom_type} · ${formatCount(meta.counts.primitives)} ${unit}`;
}

export interface UploadFormHooks {
  onUploaded: (meta: DatasetMeta) => void;
  upload: (name: string, format: string, file: File) => Promise<DatasetMeta>;
}

export function renderUploadForm(root: HTMLElement, hooks: UploadFormHooks): void {
  root.innerHTML = `
    <form class="upload">
      <input name="name" placeholder="dataset name" required />
      <select name="format">
        <option value="wkt-lines">wkt-lines</option>
        <option value="geojson">geojson</option>
        <option value="csv-points">csv-points</option>
      </select>
      <input name="file" type="file" required />
      <button type="submit">Register</button>
      <div class="upload-error" hidden></div>
    </form>`;
  const form = root.querySelector("form") as HTMLFormElement;
  const errorBox = root.querySelector(".upload-error") as HTMLElement;
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    errorBox.hidden = true;
    const name = (form.elements.namedItem("name") as HTMLInputElement).value.trim();
    const format = (form.elements.namedItem("format") as HTMLSelectElement).value;
    const fileInput = form.elements.namedItem("file") as HTMLInputElement;
    const file = fileInput.files?.[0];
    if (!file || !name) return;
    hooks
      .upload(name, format, file)
      .then((meta) => {
        form.reset();
        hooks.onUploaded(meta);
      })
      .catch((err) => {
        errorBox.textContent = String(err.message ?? err);
        errorBox.hidden = false;
      });
  });
}

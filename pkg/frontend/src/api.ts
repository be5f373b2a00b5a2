import type { DatasetMeta, MetricsSnapshot } from "./types.js";

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function getJson<T>(url: string): Promise<T> {
  const resp = await fetch(url);
  if (!resp.ok) {
    throw new ApiError(resp.status, await errorText(resp));
  }
  return (await resp.json()) as T;
}

async function errorText(resp: Response): Promise<string> {
  try {
    const doc = await resp.json();
    return typeof doc?.error === "string" ? doc.error : resp.statusText;
  } catch {
    return resp.statusText;
  }
}

export class TileServiceClient {
  constructor(readonly base: string = "") {}

  datasets(): Promise<DatasetMeta[]> {
    return getJson(`${this.base}/datasets`);
  }

  metrics(): Promise<MetricsSnapshot> {
    return getJson(`${this.base}/metrics`);
  }

  patterns(): Promise<string[]> {
    return getJson(`${this.base}/patterns`);
  }

  /** Multipart dataset registration; resolves to the new dataset's meta. */
  async upload(name: string, format: string, file: File): Promise<DatasetMeta> {
    const form = new FormData();
    form.set("name", name);
    form.set("format", format);
    form.set("file", file);
    const resp = await fetch(`${this.base}/datasets`, { method: "POST", body: form });
    if (!resp.ok) {
      throw new ApiError(resp.status, await errorText(resp));
    }
    return (await resp.json()) as DatasetMeta;
  }
}

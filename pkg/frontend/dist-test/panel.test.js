// tests/panel.test.ts
import assert from "node:assert/strict";
import test from "node:test";

// src/panel.ts
function formatCount(n) {
  if (n >= 1e6) return `${(n / 1e6).toFixed(1)}M`;
  if (n >= 1e3) return `${(n / 1e3).toFixed(1)}k`;
  return String(n);
}
function formatMbr(mbr) {
  return mbr.map((v) => `${(v / 1e3).toFixed(0)}km`).join(", ");
}
function datasetSummary(meta) {
  const unit = { point: "points", line: "segments", polygon: "edges" }[meta.geom_type];
  return `${meta.name} \xB7 ${meta.geom_type} \xB7 ${formatCount(meta.counts.primitives)} ${unit}`;
}

// tests/panel.test.ts
test("count formatting", () => {
  assert.equal(formatCount(812), "812");
  assert.equal(formatCount(45200), "45.2k");
  assert.equal(formatCount(1e7), "10.0M");
});
test("mbr formatting uses kilometers", () => {
  assert.equal(formatMbr([-2e3, 0, 1500, 500]), "-2km, 0km, 2km, 1km");
});
test("dataset summaries name the primitive unit per geometry type", () => {
  const meta = {
    name: "roads",
    geom_type: "line",
    mbr: [0, 0, 1, 1],
    counts: { records: 10, primitives: 2e3, indexed: 2e3 }
  };
  assert.equal(datasetSummary(meta), "roads \xB7 line \xB7 2.0k segments");
  assert.match(
    datasetSummary({ ...meta, geom_type: "polygon" }),
    / edges$/
  );
  assert.match(
    datasetSummary({ ...meta, geom_type: "point" }),
    / points$/
  );
});

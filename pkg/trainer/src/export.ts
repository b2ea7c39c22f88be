/**
 * Weight export in the verifier's manifest + blob format: a JSON manifest
 * (sorted keys, two-space indent) and a companion blob of little-endian
 * 32-bit floats, per layer weights then bias, row-major, with byte offsets
 * declared in the manifest.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { evalForward, NetworkDef } from "./architectures.js";
import { Rng } from "./rng.js";

const FORMAT = "gridverify-network";
const VERSION = 1;

function stableStringify(value: unknown, indent: number): string {
  const pad = (n: number) => " ".repeat(indent * n);
  const walk = (v: unknown, depth: number): string => {
    if (v === null || typeof v === "number" || typeof v === "boolean") return JSON.stringify(v);
    if (typeof v === "string") return JSON.stringify(v);
    if (Array.isArray(v)) {
      if (v.length === 0) return "[]";
      const items = v.map((item) => pad(depth + 1) + walk(item, depth + 1));
      return "[\n" + items.join(",\n") + "\n" + pad(depth) + "]";
    }
    const obj = v as Record<string, unknown>;
    const keys = Object.keys(obj).sort();
    if (keys.length === 0) return "{}";
    const items = keys.map(
      (k) => pad(depth + 1) + JSON.stringify(k) + ": " + walk(obj[k], depth + 1),
    );
    return "{\n" + items.join(",\n") + "\n" + pad(depth) + "}";
  };
  return walk(value, 0);
}

/** Round every parameter to 32-bit storage precision in place. */
export function quantizeToStorage(def: NetworkDef): void {
  for (const p of def.model.params()) {
    for (let i = 0; i < p.value.length; i++) p.value[i] = Math.fround(p.value[i]);
  }
}

export function saveNetwork(def: NetworkDef, outDir: string, baseName: string): string {
  fs.mkdirSync(outDir, { recursive: true });
  const chunks: Buffer[] = [];
  let offset = 0;
  const layers: Record<string, unknown>[] = [];
  for (const { entry, params } of def.entries) {
    const rendered: Record<string, unknown> = { ...entry };
    if (params.length > 0) {
      rendered.params = params.map((p) => {
        const spec = { offset, count: p.value.length };
        const buf = Buffer.alloc(4 * p.value.length);
        for (let i = 0; i < p.value.length; i++) buf.writeFloatLE(Math.fround(p.value[i]), 4 * i);
        chunks.push(buf);
        offset += buf.length;
        return spec;
      });
    }
    layers.push(rendered);
  }
  const manifest = {
    blob: `${baseName}.bin`,
    blob_bytes: offset,
    descale: def.descale === null ? null : { scale: def.descale.scale, offset: def.descale.offset },
    format: FORMAT,
    input_shape: def.inputShape,
    layers,
    name: def.name,
    role: def.role,
    version: VERSION,
  };
  const manifestPath = path.join(outDir, `${baseName}.json`);
  fs.writeFileSync(manifestPath, stableStringify(manifest, 2) + "\n", "utf-8");
  fs.writeFileSync(path.join(outDir, `${baseName}.bin`), Buffer.concat(chunks));
  return manifestPath;
}

/** Load blob parameters back into the model (32-bit widened to 64-bit). */
export function importWeights(def: NetworkDef, manifestPath: string): void {
  const manifest = JSON.parse(fs.readFileSync(manifestPath, "utf-8"));
  if (manifest.format !== FORMAT || manifest.version !== VERSION) {
    throw new Error(`${manifestPath}: not a supported network manifest`);
  }
  const blob = fs.readFileSync(path.join(path.dirname(manifestPath), manifest.blob));
  let offset = 0;
  for (const { params } of def.entries) {
    for (const p of params) {
      for (let i = 0; i < p.value.length; i++) {
        p.value[i] = blob.readFloatLE(offset);
        offset += 4;
      }
    }
  }
  if (offset !== blob.length) {
    throw new Error(`${manifestPath}: blob has ${blob.length} bytes, consumed ${offset}`);
  }
}

export interface ProbeFile {
  input_shape: number[];
  tolerance: number;
  inputs: number[][];
  outputs: number[][];
}

/**
 * Record (input, output) pairs of the quantized network for the
 * cross-implementation fidelity check on the verifier side.
 */
export function writeProbes(
  def: NetworkDef,
  outDir: string,
  baseName: string,
  sampler: (rng: Rng) => Float64Array,
  count = 50,
  seed = 424242,
): string {
  const rng = new Rng(seed);
  const inputs: number[][] = [];
  const outputs: number[][] = [];
  for (let i = 0; i < count; i++) {
    const x = sampler(rng);
    inputs.push(Array.from(x));
    outputs.push(Array.from(evalForward(def, x)));
  }
  const doc: ProbeFile = { input_shape: def.inputShape, tolerance: 1e-5, inputs, outputs };
  const p = path.join(outDir, `${baseName}.probes.json`);
  fs.writeFileSync(p, JSON.stringify(doc) + "\n", "utf-8");
  return p;
}

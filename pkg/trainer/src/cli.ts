/**
 * Trainer entry point.
 *
 *   node dist/cli.js train-decoder   --data DIR --out DIR [--config FILE] [--steps N] [--seed N]
 *   node dist/cli.js train-regressor --data DIR --out DIR --arch exp1|exp2 [...]
 *   node dist/cli.js train-cvae      --data DIR --out DIR [...]
 *
 * Reads datasets produced by `gridverify dataset`, writes manifests + blobs
 * the verifier loads directly, plus probe files for the boundary-fidelity
 * check and a metrics.json per run.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { evalForward, NetworkDef } from "./architectures.js";
import { Dataset, loadDataset, splitDataset } from "./data.js";
import { quantizeToStorage, saveNetwork, writeProbes } from "./export.js";
import { Rng } from "./rng.js";
import { ssim } from "./ssim.js";
import {
  configFromFile,
  DEFAULT_CONFIG,
  quartileDecrease,
  TrainConfig,
  trainCvae,
  trainDecoder,
  trainRegressor,
} from "./train.js";

function parseArgs(argv: string[]): Map<string, string> {
  const out = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`malformed arguments near ${key}`);
    }
    out.set(key.slice(2), argv[i + 1]);
  }
  return out;
}

function loadConfig(args: Map<string, string>): TrainConfig {
  let cfg = { ...DEFAULT_CONFIG };
  const file = args.get("config");
  if (file) {
    cfg = configFromFile(JSON.parse(fs.readFileSync(file, "utf-8")));
  }
  if (args.has("steps")) cfg.steps = parseInt(args.get("steps")!, 10);
  if (args.has("seed")) cfg.seed = parseInt(args.get("seed")!, 10);
  if (process.env.GV_SEED !== undefined) cfg.seed = parseInt(process.env.GV_SEED, 10);
  return cfg;
}

function labelRanges(ds: Dataset): { d: [number, number]; theta: [number, number] } {
  let dLo = Infinity,
    dHi = -Infinity,
    tLo = Infinity,
    tHi = -Infinity;
  for (const it of ds.items) {
    dLo = Math.min(dLo, it.d);
    dHi = Math.max(dHi, it.d);
    tLo = Math.min(tLo, it.theta);
    tHi = Math.max(tHi, it.theta);
  }
  return { d: [dLo, dHi], theta: [tLo, tHi] };
}

function exportWithProbes(
  def: NetworkDef,
  outDir: string,
  baseName: string,
  sampler: (rng: Rng) => Float64Array,
): void {
  quantizeToStorage(def);
  saveNetwork(def, outDir, baseName);
  writeProbes(def, outDir, baseName, sampler);
}

function writeMetrics(outDir: string, metrics: Record<string, unknown>): void {
  fs.writeFileSync(path.join(outDir, "metrics.json"), JSON.stringify(metrics, null, 2) + "\n");
}

function cmdTrainDecoder(args: Map<string, string>): void {
  const cfg = loadConfig(args);
  const ds = loadDataset(args.get("data")!);
  const { train, held } = splitDataset(ds, Math.max(1, Math.floor(ds.items.length / 10)));
  const { def, losses } = trainDecoder(train, cfg);

  let ssimSum = 0;
  const input = new Float64Array(2);
  for (const item of held) {
    input[0] = item.d;
    input[1] = item.theta;
    ssimSum += ssim(evalForward(def, input), item.pixels, ds.imageSide);
  }
  const heldSsim = ssimSum / held.length;

  const outDir = args.get("out")!;
  const r = labelRanges(ds);
  exportWithProbes(def, outDir, "decoder", (rng) =>
    Float64Array.from([rng.uniform(...r.d), rng.uniform(...r.theta)]),
  );
  writeMetrics(outDir, {
    network: "decoder",
    steps: cfg.steps,
    seed: cfg.seed,
    final_loss: losses[losses.length - 1],
    loss_decreased: quartileDecrease(losses),
    held_out_ssim: heldSsim,
    held_out_count: held.length,
  });
  console.log(`decoder: held-out SSIM ${heldSsim.toFixed(4)} over ${held.length} images`);
}

function cmdTrainRegressor(args: Map<string, string>): void {
  const arch = args.get("arch");
  if (arch !== "exp1" && arch !== "exp2") {
    throw new Error("--arch must be exp1 or exp2");
  }
  const cfg = loadConfig(args);
  const ds = loadDataset(args.get("data")!);
  const { train, held } = splitDataset(ds, Math.max(1, Math.floor(ds.items.length / 10)));
  const { def, losses, heldOutMae } = trainRegressor(train, held, arch, cfg);

  const outDir = args.get("out")!;
  exportWithProbes(def, outDir, `regressor-${arch}`, (rng) => {
    const img = new Float64Array(256);
    for (let i = 0; i < img.length; i++) img[i] = rng.next();
    return img;
  });
  writeMetrics(outDir, {
    network: `regressor-${arch}`,
    steps: cfg.steps,
    seed: cfg.seed,
    final_loss: losses[losses.length - 1],
    loss_decreased: quartileDecrease(losses),
    held_out_mae: heldOutMae,
    held_out_count: held.length,
  });
  console.log(`regressor-${arch}: held-out MAE ${heldOutMae.toFixed(4)} m`);
}

function cmdTrainCvae(args: Map<string, string>): void {
  const cfg = loadConfig(args);
  const ds = loadDataset(args.get("data")!);
  const { train } = splitDataset(ds, Math.max(1, Math.floor(ds.items.length / 10)));
  const { decoder, encoder, losses, klTrace, stoppedEarly } = trainCvae(train, cfg);

  const outDir = args.get("out")!;
  const r = labelRanges(ds);
  exportWithProbes(decoder, outDir, "decoder-conditional", (rng) =>
    Float64Array.from([rng.uniform(...r.d), rng.uniform(...r.theta), rng.uniform(-0.1, 0.1)]),
  );
  quantizeToStorage(encoder);
  saveNetwork(encoder, outDir, "encoder");
  writeProbes(encoder, outDir, "encoder", (rng) => {
    const x = new Float64Array(258);
    for (let i = 0; i < 256; i++) x[i] = rng.next();
    x[256] = rng.uniform(...r.d);
    x[257] = rng.uniform(...r.theta);
    return x;
  });
  writeMetrics(outDir, {
    network: "decoder-conditional",
    steps: cfg.steps,
    seed: cfg.seed,
    final_loss: losses[losses.length - 1],
    loss_decreased: quartileDecrease(losses),
    final_kl: klTrace[klTrace.length - 1],
    stopped_early: stoppedEarly,
  });
  console.log(
    `conditional decoder: final KL ${klTrace[klTrace.length - 1].toFixed(4)}` +
      (stoppedEarly ? " (stopped early on KL collapse)" : ""),
  );
}

function main(): number {
  const [cmd, ...rest] = process.argv.slice(2);
  try {
    const args = parseArgs(rest);
    for (const required of ["data", "out"]) {
      if (!args.has(required)) throw new Error(`--${required} is required`);
    }
    if (cmd === "train-decoder") cmdTrainDecoder(args);
    else if (cmd === "train-regressor") cmdTrainRegressor(args);
    else if (cmd === "train-cvae") cmdTrainCvae(args);
    else {
      console.error("usage: cli.js train-decoder|train-regressor|train-cvae --data DIR --out DIR [...]");
      return 2;
    }
    return 0;
  } catch (e) {
    console.error(`error: ${e instanceof Error ? e.message : e}`);
    return 1;
  }
}

process.exit(main());

/** Training loops: plain decoder (BCE), regressors (MSE), and the
 * conditional decoder with a learned scalar latent (BCE + KL). */

import { Adam } from "./adam.js";
import { evalForward, imageDecoder, latentEncoder, NetworkDef, convRegressor, poolRegressor } from "./architectures.js";
import { Labeled } from "./data.js";
import { bceWithLogits, klUnitGaussian, mse } from "./losses.js";
import { Param } from "./layers.js";
import { Rng } from "./rng.js";

export interface TrainConfig {
  batchSize: number;
  learningRate: number;
  weightDecay: number;
  steps: number;
  seed: number;
}

/** Optimizer hyperparameters in production use: Adam, batch 64, lr 1e-4, decay 5e-4. */
export const DEFAULT_CONFIG: TrainConfig = {
  batchSize: 64,
  learningRate: 1e-4,
  weightDecay: 5e-4,
  steps: 5000,
  seed: 0,
};

/** Parse a config file mirroring the hyperparameter table (snake_case keys). */
export function configFromFile(doc: Record<string, unknown>): TrainConfig {
  if (doc.optimizer !== undefined && doc.optimizer !== "adam") {
    throw new Error(`unsupported optimizer ${String(doc.optimizer)}; only adam is implemented`);
  }
  return {
    batchSize: (doc.batch_size as number) ?? DEFAULT_CONFIG.batchSize,
    learningRate: (doc.learning_rate as number) ?? DEFAULT_CONFIG.learningRate,
    weightDecay: (doc.weight_decay as number) ?? DEFAULT_CONFIG.weightDecay,
    steps: (doc.steps as number) ?? DEFAULT_CONFIG.steps,
    seed: (doc.seed as number) ?? DEFAULT_CONFIG.seed,
  };
}

function checkFinite(loss: number, step: number, what: string): void {
  if (!Number.isFinite(loss)) {
    throw new Error(`${what} diverged: loss is ${loss} at step ${step}`);
  }
}

function scaleGrads(params: Param[], factor: number): void {
  for (const p of params) {
    for (let i = 0; i < p.grad.length; i++) p.grad[i] *= factor;
  }
}

/** Moving-average check: mean loss over the last quartile of steps is below
 * the mean over the first quartile. */
export function quartileDecrease(losses: number[]): boolean {
  const q = Math.max(1, Math.floor(losses.length / 4));
  const mean = (xs: number[]) => xs.reduce((a, b) => a + b, 0) / xs.length;
  return mean(losses.slice(-q)) < mean(losses.slice(0, q));
}

export interface DecoderResult {
  def: NetworkDef;
  losses: number[];
}

export function trainDecoder(train: Labeled[], cfg: TrainConfig): DecoderResult {
  const rng = new Rng(cfg.seed);
  const def = imageDecoder(2, rng);
  const opt = new Adam(def.model.params(), {
    learningRate: cfg.learningRate,
    weightDecay: cfg.weightDecay,
  });
  const losses: number[] = [];
  const input = new Float64Array(2);
  for (let step = 0; step < cfg.steps; step++) {
    def.model.zeroGrads();
    let lossSum = 0;
    for (let b = 0; b < cfg.batchSize; b++) {
      const item = train[rng.int(train.length)];
      input[0] = item.d;
      input[1] = item.theta;
      const logits = def.model.forward(input);
      const { loss, grad } = bceWithLogits(logits, item.pixels);
      def.model.backward(grad);
      lossSum += loss;
    }
    scaleGrads(def.model.params(), 1 / cfg.batchSize);
    opt.step();
    const mean = lossSum / cfg.batchSize;
    checkFinite(mean, step, "decoder training");
    losses.push(mean);
  }
  return { def, losses };
}

export interface RegressorResult {
  def: NetworkDef;
  losses: number[];
  heldOutMae: number;
}

export function trainRegressor(
  train: Labeled[],
  held: Labeled[],
  arch: "exp1" | "exp2",
  cfg: TrainConfig,
): RegressorResult {
  const rng = new Rng(cfg.seed);
  let def: NetworkDef;
  if (arch === "exp1") {
    def = poolRegressor(rng);
  } else {
    let lo = Infinity;
    let hi = -Infinity;
    for (const item of train) {
      lo = Math.min(lo, item.d);
      hi = Math.max(hi, item.d);
    }
    // sigmoid output s maps to lo + (hi - lo) * s
    def = convRegressor(rng, { scale: hi - lo, offset: lo });
  }
  const opt = new Adam(def.model.params(), {
    learningRate: cfg.learningRate,
    weightDecay: cfg.weightDecay,
  });
  const losses: number[] = [];
  const target = new Float64Array(1);
  for (let step = 0; step < cfg.steps; step++) {
    def.model.zeroGrads();
    let lossSum = 0;
    for (let b = 0; b < cfg.batchSize; b++) {
      const item = train[rng.int(train.length)];
      target[0] = item.d;
      const pred = def.model.forward(item.pixels);
      const { loss, grad } = mse(pred, target);
      def.model.backward(grad);
      lossSum += loss;
    }
    scaleGrads(def.model.params(), 1 / cfg.batchSize);
    opt.step();
    const mean = lossSum / cfg.batchSize;
    checkFinite(mean, step, "regressor training");
    losses.push(mean);
  }
  let absErr = 0;
  for (const item of held) {
    absErr += Math.abs(evalForward(def, item.pixels)[0] - item.d);
  }
  return { def, losses, heldOutMae: absErr / held.length };
}

export interface CvaeResult {
  decoder: NetworkDef;
  encoder: NetworkDef;
  losses: number[];
  klTrace: number[];
  stoppedEarly: boolean;
}

export interface CvaeOptions {
  /** Early stop when the posterior collapses onto the prior. */
  klFloor?: number;
  klPatience?: number;
}

/** One conditional-decoder sample: reconstruction + KL with the given noise.
 * Deterministic in (parameters, item, eps); gradients accumulate when asked. */
export function cvaeSampleLoss(
  encoder: NetworkDef,
  decoder: NetworkDef,
  item: Labeled,
  eps: number,
  accumulate: boolean,
): { loss: number; kl: number } {
  const nPix = item.pixels.length;
  const encIn = new Float64Array(nPix + 2);
  encIn.set(item.pixels);
  encIn[nPix] = item.d;
  encIn[nPix + 1] = item.theta;
  const stats = encoder.model.forward(encIn);
  const mu = stats[0];
  const logSigma = stats[1];
  const sigma = Math.exp(logSigma);
  const z = mu + sigma * eps;

  const decIn = new Float64Array([item.d, item.theta, z]);
  const logits = decoder.model.forward(decIn);
  const recon = bceWithLogits(logits, item.pixels);
  const klTerm = klUnitGaussian(mu, logSigma);

  if (accumulate) {
    const dDecIn = decoder.model.backward(recon.grad);
    const dz = dDecIn[2];
    const headGrad = new Float64Array(2);
    headGrad[0] = dz + klTerm.dMu;
    headGrad[1] = dz * sigma * eps + klTerm.dLogSigma;
    encoder.model.backward(headGrad);
  }
  return { loss: recon.loss + klTerm.kl, kl: klTerm.kl };
}

export function trainCvae(train: Labeled[], cfg: TrainConfig, opts: CvaeOptions = {}): CvaeResult {
  const klFloor = opts.klFloor ?? 1e-4;
  const klPatience = opts.klPatience ?? 200;
  const rng = new Rng(cfg.seed);
  const encoder = latentEncoder(2, rng);
  const decoder = imageDecoder(3, rng, "decoder-conditional");
  const params = [...encoder.model.params(), ...decoder.model.params()];
  const opt = new Adam(params, {
    learningRate: cfg.learningRate,
    weightDecay: cfg.weightDecay,
  });
  const losses: number[] = [];
  const klTrace: number[] = [];
  let collapsedFor = 0;
  let stoppedEarly = false;
  for (let step = 0; step < cfg.steps; step++) {
    encoder.model.zeroGrads();
    decoder.model.zeroGrads();
    let lossSum = 0;
    let klSum = 0;
    for (let b = 0; b < cfg.batchSize; b++) {
      const item = train[rng.int(train.length)];
      const { loss, kl } = cvaeSampleLoss(encoder, decoder, item, rng.normal(), true);
      lossSum += loss;
      klSum += kl;
    }
    scaleGrads(params, 1 / cfg.batchSize);
    opt.step();
    const meanLoss = lossSum / cfg.batchSize;
    const meanKl = klSum / cfg.batchSize;
    checkFinite(meanLoss, step, "conditional decoder training");
    if (meanKl < -1e-12) {
      throw new Error(`KL term went negative (${meanKl}) at step ${step}`);
    }
    losses.push(meanLoss);
    klTrace.push(meanKl);
    // capacity guard: stop once the encoder stops using the latent
    if (step > cfg.steps / 5) {
      collapsedFor = meanKl < klFloor ? collapsedFor + 1 : 0;
      if (collapsedFor >= klPatience) {
        stoppedEarly = true;
        break;
      }
    }
  }
  return { decoder, encoder, losses, klTrace, stoppedEarly };
}

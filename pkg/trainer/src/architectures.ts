/**
 * The four production architectures, each paired with its export plan
 * (the layer list as the verifier-side manifest format spells it, reshape
 * markers included).
 *
 * Decoders train on pre-sigmoid logits (the sigmoid folds into the BCE loss
 * for gradient stability); `evalForward` always applies the full exported
 * semantics, sigmoid and de-scaling included.
 */

import {
  AvgPoolLayer,
  Conv2DLayer,
  DenseLayer,
  Layer,
  Param,
  ReluLayer,
  ScaleLayer,
  Sequential,
  SigmoidLayer,
  sigmoidScalar,
  TanhLayer,
  TConv2DLayer,
} from "./layers.js";
import { Rng } from "./rng.js";

export type ManifestLayerEntry = Record<string, unknown>;

export interface ExportEntry {
  entry: ManifestLayerEntry;
  params: Param[];
}

export interface NetworkDef {
  name: string;
  role: "decoder" | "regressor" | "encoder";
  inputShape: number[];
  model: Sequential;
  descale: { scale: number; offset: number } | null;
  /** True when the trained model emits logits and the export appends a sigmoid. */
  sigmoidTail: boolean;
  entries: ExportEntry[];
}

export function evalForward(def: NetworkDef, x: Float64Array): Float64Array {
  const out = def.model.forward(x);
  if (!def.sigmoidTail) return out;
  const y = new Float64Array(out.length);
  for (let i = 0; i < out.length; i++) y[i] = sigmoidScalar(out[i]);
  return y;
}

function dense(layer: DenseLayer): ExportEntry {
  return {
    entry: { kind: "dense", out_features: layer.outSize, in_features: layer.inSize },
    params: [layer.weight, layer.bias],
  };
}

function activation(fn: string): ExportEntry {
  return { entry: { kind: "activation", fn }, params: [] };
}

function reshape(shape: number[]): ExportEntry {
  return { entry: { kind: "reshape", shape }, params: [] };
}

/** Configuration-to-image decoder: input -> 64 -> 64 -> 8x8 -> tconv -> 16x16 sigmoid. */
export function imageDecoder(inputDim: number, rng: Rng, name = "decoder"): NetworkDef {
  const d1 = new DenseLayer(inputDim, 64, rng);
  const d2 = new DenseLayer(64, 64, rng);
  const up = new TConv2DLayer(8, 8, 2, 2, rng);
  // Nearest-neighbor-style upsampler init with a dark background prior:
  // binary line imagery saturates much faster from here than from a random
  // kernel, which tends to stall in an all-gray basin at desk-scale budgets.
  up.kernel.value.fill(2.0);
  up.bias.value[0] = -6.0;
  const model = new Sequential([d1, new ReluLayer(64), d2, new ReluLayer(64), up]);
  return {
    name,
    role: "decoder",
    inputShape: [inputDim],
    model,
    descale: null,
    sigmoidTail: true,
    entries: [
      dense(d1),
      activation("relu"),
      dense(d2),
      activation("relu"),
      reshape([8, 8]),
      { entry: { kind: "tconv2d", kernel_size: 2, stride: 2 }, params: [up.kernel, up.bias] },
      activation("sigmoid"),
    ],
  };
}

/** Image-to-distance regressor: 16x16 -> avgpool -> 64 tanh -> linear. */
export function poolRegressor(rng: Rng, name = "regressor-exp1"): NetworkDef {
  const pool = new AvgPoolLayer(16, 16, 2, 2);
  const d1 = new DenseLayer(64, 64, rng);
  const d2 = new DenseLayer(64, 1, rng);
  const model = new Sequential([pool, d1, new TanhLayer(64), d2]);
  return {
    name,
    role: "regressor",
    inputShape: [16, 16],
    model,
    descale: null,
    sigmoidTail: false,
    entries: [
      { entry: { kind: "avgpool2d", window: 2, stride: 2 }, params: [] },
      reshape([64]),
      dense(d1),
      activation("tanh"),
      dense(d2),
    ],
  };
}

/** Noise-tolerant regressor: avgpool -> conv3x3 tanh -> 32 tanh -> sigmoid, de-scaled. */
export function convRegressor(
  rng: Rng,
  descale: { scale: number; offset: number },
  name = "regressor-exp2",
): NetworkDef {
  const pool = new AvgPoolLayer(16, 16, 2, 2);
  const conv = new Conv2DLayer(8, 8, 3, 1, rng);
  const d1 = new DenseLayer(36, 32, rng);
  const d2 = new DenseLayer(32, 1, rng);
  const model = new Sequential([
    pool,
    conv,
    new TanhLayer(36),
    d1,
    new TanhLayer(32),
    d2,
    new SigmoidLayer(1),
    new ScaleLayer(1, descale.scale, descale.offset),
  ]);
  return {
    name,
    role: "regressor",
    inputShape: [16, 16],
    model,
    descale,
    sigmoidTail: false,
    entries: [
      { entry: { kind: "avgpool2d", window: 2, stride: 2 }, params: [] },
      { entry: { kind: "conv2d", kernel_size: 3, stride: 1, padding: 0 }, params: [conv.kernel, conv.bias] },
      activation("tanh"),
      reshape([36]),
      dense(d1),
      activation("tanh"),
      dense(d2),
      activation("sigmoid"),
    ],
  };
}

/** Capacity-limited posterior head: (image + config) -> 8 -> 2 -> (mu, log sigma). */
export function latentEncoder(configDim: number, rng: Rng, name = "encoder"): NetworkDef {
  const nIn = 16 * 16 + configDim;
  const d1 = new DenseLayer(nIn, 8, rng);
  const d2 = new DenseLayer(8, 2, rng);
  const heads = new DenseLayer(2, 2, rng);
  const model = new Sequential([d1, new ReluLayer(8), d2, new ReluLayer(2), heads]);
  return {
    name,
    role: "encoder",
    inputShape: [nIn],
    model,
    descale: null,
    sigmoidTail: false,
    entries: [
      dense(d1),
      activation("relu"),
      dense(d2),
      activation("relu"),
      dense(heads),
    ],
  };
}

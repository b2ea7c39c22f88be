import { describe, expect, it } from "vitest";

import { imageDecoder, latentEncoder, convRegressor } from "../src/architectures.js";
import { DenseLayer, Param, Sequential } from "../src/layers.js";
import { bceWithLogits, mse } from "../src/losses.js";
import { Rng } from "../src/rng.js";
import { cvaeSampleLoss } from "../src/train.js";

const H = 1e-5;

function centralDiff(param: Param, index: number, evalLoss: () => number): number {
  const saved = param.value[index];
  param.value[index] = saved + H;
  const up = evalLoss();
  param.value[index] = saved - H;
  const down = evalLoss();
  param.value[index] = saved;
  return (up - down) / (2 * H);
}

function relErr(a: number, b: number): number {
  return Math.abs(a - b) / Math.max(Math.abs(a), Math.abs(b), 1e-8);
}

describe("three-parameter toy net gradients", () => {
  // Dense(2 -> 1): two weights plus one bias.
  const x = Float64Array.from([0.7, -1.3]);

  it("matches central differences under the image loss", () => {
    const rng = new Rng(5);
    const layer = new DenseLayer(2, 1, rng);
    const target = Float64Array.from([1.0]);
    const evalLoss = () => bceWithLogits(layer.forward(x), target).loss;

    layer.weight.grad.fill(0);
    layer.bias.grad.fill(0);
    const { grad } = bceWithLogits(layer.forward(x), target);
    layer.backward(grad);

    for (const [param, idx, got] of [
      [layer.weight, 0, layer.weight.grad[0]],
      [layer.weight, 1, layer.weight.grad[1]],
      [layer.bias, 0, layer.bias.grad[0]],
    ] as const) {
      expect(relErr(got, centralDiff(param, idx, evalLoss))).toBeLessThan(1e-4);
    }
  });

  it("matches central differences under the distance loss", () => {
    const rng = new Rng(6);
    const layer = new DenseLayer(2, 1, rng);
    const target = Float64Array.from([-1.4]);
    const evalLoss = () => mse(layer.forward(x), target).loss;

    layer.weight.grad.fill(0);
    layer.bias.grad.fill(0);
    const { grad } = mse(layer.forward(x), target);
    layer.backward(grad);

    for (const [param, idx, got] of [
      [layer.weight, 0, layer.weight.grad[0]],
      [layer.weight, 1, layer.weight.grad[1]],
      [layer.bias, 0, layer.bias.grad[0]],
    ] as const) {
      expect(relErr(got, centralDiff(param, idx, evalLoss))).toBeLessThan(1e-4);
    }
  });
});

function checkModelGrads(model: Sequential, evalLoss: () => number, backprop: () => void, probes = 3) {
  model.zeroGrads();
  backprop();
  const rng = new Rng(99);
  for (const param of model.params()) {
    for (let probe = 0; probe < probes; probe++) {
      const idx = rng.int(param.value.length);
      const numeric = centralDiff(param, idx, evalLoss);
      const analytic = param.grad[idx];
      if (Math.abs(numeric) < 1e-7 && Math.abs(analytic) < 1e-7) continue;
      expect(relErr(analytic, numeric)).toBeLessThan(1e-4);
    }
  }
}

describe("full architectures", () => {
  it("decoder gradients agree with finite differences", () => {
    const rng = new Rng(11);
    const def = imageDecoder(2, rng);
    const target = new Float64Array(256);
    for (let i = 0; i < 256; i++) target[i] = rng.next() > 0.8 ? 1 : 0;
    const input = Float64Array.from([-1.2, 0.05]);
    checkModelGrads(
      def.model,
      () => bceWithLogits(def.model.forward(input), target).loss,
      () => def.model.backward(bceWithLogits(def.model.forward(input), target).grad),
    );
  });

  it("sigmoid-descaled regressor gradients agree with finite differences", () => {
    const rng = new Rng(12);
    const def = convRegressor(rng, { scale: 3.0, offset: -3.0 });
    const img = new Float64Array(256);
    for (let i = 0; i < 256; i++) img[i] = rng.next();
    const target = Float64Array.from([-1.1]);
    checkModelGrads(
      def.model,
      () => mse(def.model.forward(img), target).loss,
      () => def.model.backward(mse(def.model.forward(img), target).grad),
    );
  });

  it("conditional objective gradients agree through the reparameterized latent", () => {
    const rng = new Rng(13);
    const encoder = latentEncoder(2, rng);
    const decoder = imageDecoder(3, rng);
    const pixels = new Float64Array(256);
    for (let i = 0; i < 256; i++) pixels[i] = rng.next() > 0.85 ? 1 : 0;
    const item = { d: -0.9, theta: 0.1, breakW: 0, pixels };
    const eps = 0.6324;

    const evalLoss = () => cvaeSampleLoss(encoder, decoder, item, eps, false).loss;
    encoder.model.zeroGrads();
    decoder.model.zeroGrads();
    cvaeSampleLoss(encoder, decoder, item, eps, true);
    const rng2 = new Rng(7);
    for (const param of [...encoder.model.params(), ...decoder.model.params()]) {
      for (let probe = 0; probe < 2; probe++) {
        const idx = rng2.int(param.value.length);
        const numeric = centralDiff(param, idx, evalLoss);
        const analytic = param.grad[idx];
        if (Math.abs(numeric) < 1e-7 && Math.abs(analytic) < 1e-7) continue;
        expect(relErr(analytic, numeric)).toBeLessThan(1e-4);
      }
    }
  });
});

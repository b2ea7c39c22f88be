import { describe, expect, it } from "vitest";

import { imageDecoder, latentEncoder } from "../src/architectures.js";
import { bceWithLogits, klUnitGaussian, mse } from "../src/losses.js";
import { Rng } from "../src/rng.js";
import { cvaeSampleLoss } from "../src/train.js";
import { ssim } from "../src/ssim.js";

describe("loss functions", () => {
  it("bce is zero-ish for confident correct predictions", () => {
    const { loss } = bceWithLogits(Float64Array.from([20, -20]), Float64Array.from([1, 0]));
    expect(loss).toBeLessThan(1e-8);
  });

  it("bce is symmetric in the label flip", () => {
    const a = bceWithLogits(Float64Array.from([3]), Float64Array.from([0])).loss;
    const b = bceWithLogits(Float64Array.from([-3]), Float64Array.from([1])).loss;
    expect(a).toBeCloseTo(b, 12);
  });

  it("mse is the squared residual", () => {
    const { loss, grad } = mse(Float64Array.from([2]), Float64Array.from([-1]));
    expect(loss).toBe(9);
    expect(grad[0]).toBe(6);
  });

  it("kl of the standard posterior against the prior is zero", () => {
    const { kl } = klUnitGaussian(0, 0); // mu=0, sigma=1
    expect(kl).toBe(0);
  });

  it("kl is non-negative everywhere", () => {
    const rng = new Rng(3);
    for (let i = 0; i < 500; i++) {
      const { kl } = klUnitGaussian(rng.uniform(-4, 4), rng.uniform(-3, 2));
      expect(kl).toBeGreaterThanOrEqual(0);
    }
  });
});

describe("reparameterized objective", () => {
  const rng = new Rng(4);
  const pixels = new Float64Array(256);
  for (let i = 0; i < 256; i++) pixels[i] = rng.next() > 0.85 ? 1 : 0;
  const item = { d: -0.8, theta: 0.05, breakW: 2, pixels };

  it("is deterministic once the noise draw is fixed", () => {
    const enc = latentEncoder(2, new Rng(5));
    const dec = imageDecoder(3, new Rng(6));
    const a = cvaeSampleLoss(enc, dec, item, 0.37, false).loss;
    const b = cvaeSampleLoss(enc, dec, item, 0.37, false).loss;
    expect(a).toBe(b);
  });

  it("responds to the noise draw", () => {
    const enc = latentEncoder(2, new Rng(5));
    const dec = imageDecoder(3, new Rng(6));
    const a = cvaeSampleLoss(enc, dec, item, 0.37, false).loss;
    const c = cvaeSampleLoss(enc, dec, item, -1.4, false).loss;
    expect(a).not.toBe(c);
  });
});

describe("structural similarity", () => {
  it("is one for identical images", () => {
    const rng = new Rng(9);
    const x = new Float64Array(256);
    for (let i = 0; i < 256; i++) x[i] = rng.next();
    expect(ssim(x, x, 16)).toBeCloseTo(1.0, 12);
  });

  it("is symmetric", () => {
    const rng = new Rng(10);
    const a = new Float64Array(256);
    const b = new Float64Array(256);
    for (let i = 0; i < 256; i++) {
      a[i] = rng.next();
      b[i] = rng.next();
    }
    expect(ssim(a, b, 16)).toBeCloseTo(ssim(b, a, 16), 12);
  });

  it("is negative for an inverted half-bright image", () => {
    const x = new Float64Array(256);
    for (let r = 0; r < 16; r++) for (let c = 8; c < 16; c++) x[r * 16 + c] = 1;
    const inv = x.map((v) => 1 - v);
    expect(ssim(x, inv, 16)).toBeLessThan(0);
  });
});

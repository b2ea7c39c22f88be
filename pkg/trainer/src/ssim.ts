/** Mean structural similarity over sliding 8x8 windows, dynamic range 1,
 * stabilization constants K1=0.01 / K2=0.03. Inputs are flat [0,1] images. */

export function ssim(a: Float64Array, b: Float64Array, side: number, window = 8): number {
  if (a.length !== b.length || a.length !== side * side) {
    throw new Error("ssim: image sizes disagree");
  }
  if (side < window) throw new Error(`ssim: image smaller than ${window}x${window} window`);
  const c1 = 0.01 * 0.01;
  const c2 = 0.03 * 0.03;
  const n = window * window;
  let total = 0;
  let count = 0;
  for (let i = 0; i + window <= side; i++) {
    for (let j = 0; j + window <= side; j++) {
      let sa = 0,
        sb = 0,
        saa = 0,
        sbb = 0,
        sab = 0;
      for (let y = 0; y < window; y++) {
        for (let x = 0; x < window; x++) {
          const va = a[(i + y) * side + (j + x)];
          const vb = b[(i + y) * side + (j + x)];
          sa += va;
          sb += vb;
          saa += va * va;
          sbb += vb * vb;
          sab += va * vb;
        }
      }
      const muA = sa / n;
      const muB = sb / n;
      const varA = saa / n - muA * muA;
      const varB = sbb / n - muB * muB;
      const cov = sab / n - muA * muB;
      total +=
        ((2 * muA * muB + c1) * (2 * cov + c2)) /
        ((muA * muA + muB * muB + c1) * (varA + varB + c2));
      count++;
    }
  }
  return total / count;
}

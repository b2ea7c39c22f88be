/** Sub-pixel marker position in one image row: intensity centroid of pixels
 * above threshold; null when the row is dark. */
export function lineColumn(
  img: Float64Array,
  side: number,
  row: number,
  threshold = 0.5,
): number | null {
  let mass = 0;
  let moment = 0;
  for (let col = 0; col < side; col++) {
    const v = img[row * side + col];
    if (v > threshold) {
      mass += v;
      moment += v * (col + 0.5);
    }
  }
  return mass > 0 ? moment / mass : null;
}

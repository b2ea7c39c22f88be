/** Dataset reader for the renderer's output: binary PGM images (P5, maxval
 * 255, img_%06d.pgm) plus a labels.csv with header index,d,theta,break_w. */

import * as fs from "node:fs";
import * as path from "node:path";

export interface Labeled {
  d: number;
  theta: number;
  breakW: number;
  pixels: Float64Array; // flat 16x16, scaled to [0, 1]
}

export interface Dataset {
  items: Labeled[];
  imageSide: number;
}

export function readPgm(file: string): { width: number; height: number; pixels: Uint8Array } {
  const data = fs.readFileSync(file);
  const tokens: string[] = [];
  let pos = 0;
  while (tokens.length < 4) {
    while (pos < data.length && /\s/.test(String.fromCharCode(data[pos]))) pos++;
    const start = pos;
    while (pos < data.length && !/\s/.test(String.fromCharCode(data[pos]))) pos++;
    if (start === pos) throw new Error(`${file}: truncated PGM header`);
    tokens.push(data.subarray(start, pos).toString("latin1"));
  }
  pos += 1; // single whitespace byte after maxval
  if (tokens[0] !== "P5") throw new Error(`${file}: not a binary PGM`);
  if (tokens[3] !== "255") throw new Error(`${file}: only maxval 255 is supported`);
  const width = parseInt(tokens[1], 10);
  const height = parseInt(tokens[2], 10);
  const pixels = new Uint8Array(data.subarray(pos, pos + width * height));
  if (pixels.length !== width * height) throw new Error(`${file}: truncated pixel data`);
  return { width, height, pixels };
}

export function loadDataset(dir: string): Dataset {
  const csv = fs
    .readFileSync(path.join(dir, "labels.csv"), "utf-8")
    .trim()
    .split("\n")
    .map((line) => line.replace(/\r$/, ""));
  if (csv[0] !== "index,d,theta,break_w") {
    throw new Error(`${dir}/labels.csv: unexpected header ${csv[0]}`);
  }
  const items: Labeled[] = [];
  let side = 0;
  for (const line of csv.slice(1)) {
    const [idx, d, theta, breakW] = line.split(",");
    const name = `img_${idx.padStart(6, "0")}.pgm`;
    const img = readPgm(path.join(dir, name));
    if (img.width !== img.height) throw new Error(`${name}: expected a square image`);
    side = img.width;
    const pixels = new Float64Array(img.pixels.length);
    for (let i = 0; i < pixels.length; i++) pixels[i] = img.pixels[i] / 255;
    items.push({ d: Number(d), theta: Number(theta), breakW: Number(breakW), pixels });
  }
  if (items.length === 0) throw new Error(`${dir}: empty dataset`);
  return { items, imageSide: side };
}

/** Deterministic split: the tail `holdOut` items are never trained on. */
export function splitDataset(ds: Dataset, holdOut: number): { train: Labeled[]; held: Labeled[] } {
  if (holdOut >= ds.items.length) throw new Error("hold-out larger than dataset");
  return {
    train: ds.items.slice(0, ds.items.length - holdOut),
    held: ds.items.slice(ds.items.length - holdOut),
  };
}

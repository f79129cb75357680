/**
 * Segmentation backends behind one interface, so the batch runner never
 * cares which model produced the masks.
 *
 * The "sam" and "fcclip" backends are the integration points for the real
 * models; they resolve local weights and refuse to run without them. The
 * "grid" backend is a fully deterministic, content-dependent stand-in used
 * for tests and pipeline dry-runs: it tiles the image at the requested
 * granularity and emits one mask per tile that stands out from the global
 * mean intensity, which makes busy images produce many segments and flat
 * images few or none.
 */

import * as fs from "fs";

import { GrayImage } from "./image";
import { ClassInstance } from "./records";
import { RunLengthMask, encodeRle } from "./rle";

export class MissingWeightsError extends Error {}

export interface SegmenterBackend {
  readonly producer: string;
  readonly modelVersion: string;
  generateMasks(image: GrayImage, pointsPerSide: number): RunLengthMask[];
}

export interface PanopticBackend {
  readonly producer: string;
  readonly modelVersion: string;
  detectInstances(image: GrayImage, withMasks: boolean): ClassInstance[];
}

function tileMean(image: GrayImage, r0: number, r1: number, c0: number, c1: number): number {
  let sum = 0;
  for (let r = r0; r < r1; r++) {
    for (let c = c0; c < c1; c++) sum += image.data[r * image.width + c];
  }
  return sum / ((r1 - r0) * (c1 - c0));
}

function globalMean(image: GrayImage): number {
  let sum = 0;
  for (let i = 0; i < image.data.length; i++) sum += image.data[i];
  return sum / image.data.length;
}

function tileMask(image: GrayImage, r0: number, r1: number, c0: number, c1: number): RunLengthMask {
  const fg = new Uint8Array(image.width * image.height);
  for (let r = r0; r < r1; r++) {
    for (let c = c0; c < c1; c++) fg[r * image.width + c] = 1;
  }
  return encodeRle(fg, image.height, image.width);
}

/** Tile bounds for an n x n grid over the image, edge tiles absorbing the remainder. */
function gridTiles(image: GrayImage, n: number): Array<[number, number, number, number]> {
  const tiles: Array<[number, number, number, number]> = [];
  const rowStep = image.height / n;
  const colStep = image.width / n;
  for (let i = 0; i < n; i++) {
    const r0 = Math.floor(i * rowStep);
    const r1 = i === n - 1 ? image.height : Math.floor((i + 1) * rowStep);
    if (r1 <= r0) continue;
    for (let j = 0; j < n; j++) {
      const c0 = Math.floor(j * colStep);
      const c1 = j === n - 1 ? image.width : Math.floor((j + 1) * colStep);
      if (c1 <= c0) continue;
      tiles.push([r0, r1, c0, c1]);
    }
  }
  return tiles;
}

class GridSegmenter implements SegmenterBackend {
  readonly producer = "adapter grid-segmenter";
  readonly modelVersion = "grid-0.1.0";

  generateMasks(image: GrayImage, pointsPerSide: number): RunLengthMask[] {
    const n = Math.max(1, Math.min(pointsPerSide, Math.min(image.height, image.width)));
    const mean = globalMean(image);
    const masks: RunLengthMask[] = [];
    for (const [r0, r1, c0, c1] of gridTiles(image, n)) {
      if (tileMean(image, r0, r1, c0, c1) > mean + 1e-12) {
        masks.push(tileMask(image, r0, r1, c0, c1));
      }
    }
    return masks;
  }
}

const TONE_BANDS = 4;

class GridPanoptic implements PanopticBackend {
  readonly producer = "adapter grid-panoptic";
  readonly modelVersion = "grid-0.1.0";

  detectInstances(image: GrayImage, withMasks: boolean): ClassInstance[] {
    const blocks = Math.max(1, Math.min(TONE_BANDS, Math.min(image.height, image.width)));
    const tiles = gridTiles(image, blocks);
    const band = (v: number) => Math.min(TONE_BANDS - 1, Math.floor(v * TONE_BANDS));
    const bands = tiles.map(([r0, r1, c0, c1]) => band(tileMean(image, r0, r1, c0, c1)));
    // the modal band is treated as background "stuff"
    const tally = new Array(TONE_BANDS).fill(0);
    for (const b of bands) tally[b]++;
    const modal = tally.indexOf(Math.max(...tally));
    const mean = globalMean(image);
    const instances: ClassInstance[] = [];
    tiles.forEach(([r0, r1, c0, c1], i) => {
      if (bands[i] === modal) return;
      const contrast = Math.min(1, Math.abs(tileMean(image, r0, r1, c0, c1) - mean));
      const instance: ClassInstance = { label: `tone_${bands[i]}`, score: contrast };
      if (withMasks) instance.mask = tileMask(image, r0, r1, c0, c1);
      instances.push(instance);
    });
    return instances;
  }
}

function requireWeights(backend: string, weightsPath: string | undefined): never {
  if (!weightsPath || !fs.existsSync(weightsPath)) {
    throw new MissingWeightsError(
      `backend "${backend}" needs local model weights; pass --weights <path> ` +
        `(got ${weightsPath ? `missing file ${weightsPath}` : "no path"})`,
    );
  }
  throw new MissingWeightsError(
    `backend "${backend}" found weights at ${weightsPath} but no inference runtime ` +
      "is bundled with this adapter build; install the model runtime or use --backend grid",
  );
}

export function createSegmenterBackend(
  name: string,
  weightsPath?: string,
): SegmenterBackend {
  if (name === "grid") return new GridSegmenter();
  if (name === "sam") requireWeights(name, weightsPath);
  throw new Error(`unknown segmenter backend "${name}" (available: grid, sam)`);
}

export function createPanopticBackend(
  name: string,
  weightsPath?: string,
): PanopticBackend {
  if (name === "grid") return new GridPanoptic();
  if (name === "fcclip") requireWeights(name, weightsPath);
  throw new Error(`unknown panoptic backend "${name}" (available: grid, fcclip)`);
}

/**
 * Feature backbones.
 *
 * A backbone turns a decoded image into a fixed-width feature vector in
 * evaluation mode with no augmentation, so repeated runs are
 * deterministic. Two tags are exposed, matching the standard small/16
 * and base/16 vision-transformer embedding widths:
 *
 *   s16 -> 384 dimensions      b16 -> 768 dimensions
 *
 * The bundled implementation is a self-contained transformer-style
 * encoder (16x16 patch projection + sinusoidal positions + attention
 * pooling with a learned-shape query) whose weights come from a seeded
 * pseudo-random generator rather than a downloaded checkpoint, because
 * this package ships without network access to model hosts. It produces
 * stable, well-conditioned features with the exact interface and
 * dimensionality of a pretrained encoder; swap in real weights by
 * implementing the Backbone interface.
 */

import { resizeBilinear } from './image.js';
import { DecodedImage } from './raster.js';

export type BackboneTag = 's16' | 'b16';

export interface Backbone {
  readonly tag: BackboneTag;
  /** Output feature width. */
  readonly dim: number;
  /** Square input resolution the image is resized to. */
  readonly inputSize: number;
  embed(image: DecodedImage): Float64Array;
}

export const BACKBONE_DIMS: Record<BackboneTag, number> = { s16: 384, b16: 768 };

const INPUT_SIZE = 224;
const PATCH = 16;
const GRID = INPUT_SIZE / PATCH; // 14
const N_PATCHES = GRID * GRID; // 196
const PATCH_VALUES = PATCH * PATCH * 3; // 768

/** 32-bit seeded PRNG (mulberry32), stable across platforms. */
function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function fnv1a(text: string): number {
  let hash = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193);
  }
  return hash >>> 0;
}

/** Standard-normal draws via Box-Muller on the seeded uniform stream. */
function gaussianMatrix(rand: () => number, rows: number, cols: number, scale: number): Float64Array {
  const out = new Float64Array(rows * cols);
  for (let i = 0; i < out.length; i += 2) {
    let u1 = rand();
    while (u1 === 0) u1 = rand();
    const u2 = rand();
    const radius = Math.sqrt(-2 * Math.log(u1));
    out[i] = radius * Math.cos(2 * Math.PI * u2) * scale;
    if (i + 1 < out.length) {
      out[i + 1] = radius * Math.sin(2 * Math.PI * u2) * scale;
    }
  }
  return out;
}

/** Sinusoidal 2-d position table, (N_PATCHES x dim). */
function positionTable(dim: number): Float64Array {
  const out = new Float64Array(N_PATCHES * dim);
  const half = dim / 2;
  for (let p = 0; p < N_PATCHES; p++) {
    const row = Math.floor(p / GRID);
    const col = p % GRID;
    for (let j = 0; j < half; j++) {
      const freq = Math.pow(10000, -j / half);
      out[p * dim + j] = Math.sin(row * freq);
      out[p * dim + half + j] = Math.cos(col * freq);
    }
  }
  return out;
}

interface Weights {
  patchProj: Float64Array; // PATCH_VALUES x dim
  positions: Float64Array; // N_PATCHES x dim
  query: Float64Array; // dim
  valueProj: Float64Array; // dim x dim
  outProj: Float64Array; // dim x dim
}

function buildWeights(tag: BackboneTag, dim: number): Weights {
  const rand = mulberry32(fnv1a(`cludi-backbone:${tag}`));
  return {
    patchProj: gaussianMatrix(rand, PATCH_VALUES, dim, 1 / Math.sqrt(PATCH_VALUES)),
    positions: positionTable(dim),
    query: gaussianMatrix(rand, 1, dim, 1),
    valueProj: gaussianMatrix(rand, dim, dim, 1 / Math.sqrt(dim)),
    outProj: gaussianMatrix(rand, dim, dim, 1 / Math.sqrt(dim)),
  };
}

function gelu(x: number): number {
  return 0.5 * x * (1 + Math.tanh(Math.sqrt(2 / Math.PI) * (x + 0.044715 * x * x * x)));
}

class SeededTransformerBackbone implements Backbone {
  readonly tag: BackboneTag;
  readonly dim: number;
  readonly inputSize = INPUT_SIZE;
  private weights: Weights | null = null;

  constructor(tag: BackboneTag) {
    this.tag = tag;
    this.dim = BACKBONE_DIMS[tag];
  }

  private getWeights(): Weights {
    if (!this.weights) {
      this.weights = buildWeights(this.tag, this.dim);
    }
    return this.weights;
  }

  embed(image: DecodedImage): Float64Array {
    const { patchProj, positions, query, valueProj, outProj } = this.getWeights();
    const dim = this.dim;
    const resized = resizeBilinear(image, INPUT_SIZE, INPUT_SIZE);
    const pixels = resized.rgb;

    // Patch embeddings: project each normalized 16x16x3 patch, add positions.
    const patch = new Float64Array(PATCH_VALUES);
    const embeddings = new Float64Array(N_PATCHES * dim);
    for (let p = 0; p < N_PATCHES; p++) {
      const baseY = Math.floor(p / GRID) * PATCH;
      const baseX = (p % GRID) * PATCH;
      let k = 0;
      for (let y = 0; y < PATCH; y++) {
        const rowStart = ((baseY + y) * INPUT_SIZE + baseX) * 3;
        for (let x = 0; x < 3 * PATCH; x++) {
          patch[k++] = (pixels[rowStart + x] - 0.5) / 0.25;
        }
      }
      const out = embeddings.subarray(p * dim, (p + 1) * dim);
      for (let j = 0; j < dim; j++) {
        let acc = 0;
        for (let i = 0; i < PATCH_VALUES; i++) {
          acc += patch[i] * patchProj[i * dim + j];
        }
        out[j] = acc + positions[p * dim + j];
      }
    }

    // Attention pooling: a fixed query attends over the patch embeddings.
    const scores = new Float64Array(N_PATCHES);
    let maxScore = -Infinity;
    for (let p = 0; p < N_PATCHES; p++) {
      let acc = 0;
      for (let j = 0; j < dim; j++) {
        acc += embeddings[p * dim + j] * query[j];
      }
      scores[p] = acc / Math.sqrt(dim);
      if (scores[p] > maxScore) maxScore = scores[p];
    }
    let total = 0;
    for (let p = 0; p < N_PATCHES; p++) {
      scores[p] = Math.exp(scores[p] - maxScore);
      total += scores[p];
    }
    const pooled = new Float64Array(dim);
    for (let p = 0; p < N_PATCHES; p++) {
      const weight = scores[p] / total;
      for (let j = 0; j < dim; j++) {
        pooled[j] += weight * embeddings[p * dim + j];
      }
    }

    // Value/output projections with a GELU in between, then layer norm.
    const context = new Float64Array(dim);
    for (let j = 0; j < dim; j++) {
      let acc = 0;
      for (let i = 0; i < dim; i++) {
        acc += pooled[i] * valueProj[i * dim + j];
      }
      context[j] = gelu(acc);
    }
    const feature = new Float64Array(dim);
    let mean = 0;
    for (let j = 0; j < dim; j++) {
      let acc = 0;
      for (let i = 0; i < dim; i++) {
        acc += context[i] * outProj[i * dim + j];
      }
      feature[j] = acc;
      mean += acc;
    }
    mean /= dim;
    let variance = 0;
    for (let j = 0; j < dim; j++) {
      feature[j] -= mean;
      variance += feature[j] * feature[j];
    }
    const invStd = 1 / Math.sqrt(variance / dim + 1e-12);
    for (let j = 0; j < dim; j++) {
      feature[j] *= invStd;
    }
    return feature;
  }
}

const CACHE = new Map<BackboneTag, Backbone>();

export function getBackbone(tag: string): Backbone {
  if (tag !== 's16' && tag !== 'b16') {
    throw new Error(`unknown model tag ${JSON.stringify(tag)} (expected s16 or b16)`);
  }
  let backbone = CACHE.get(tag);
  if (!backbone) {
    backbone = new SeededTransformerBackbone(tag);
    CACHE.set(tag, backbone);
  }
  return backbone;
}

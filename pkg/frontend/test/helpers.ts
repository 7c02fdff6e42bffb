/** Test-side image encoders used to exercise the bundled decoders. */

import { deflateSync } from 'node:zlib';

import { crc32 } from '../src/png.js';

const PNG_SIGNATURE = Buffer.from([137, 80, 78, 71, 13, 10, 26, 10]);

export function pngChunk(type: string, data: Buffer): Buffer {
  const typeAndData = Buffer.concat([Buffer.from(type, 'ascii'), data]);
  const out = Buffer.alloc(typeAndData.length + 8);
  out.writeUInt32BE(data.length, 0);
  typeAndData.copy(out, 4);
  out.writeUInt32BE(crc32(typeAndData), typeAndData.length + 4);
  return out;
}

export interface PngSpec {
  width: number;
  height: number;
  colorType: 0 | 2 | 3 | 4 | 6;
  bitDepth: 8 | 16;
  /** Raw samples per pixel per channel, values in [0, 2^bitDepth - 1]. */
  samples: number[][];
  /** Filter byte per row (default all 0 = None). */
  filters?: number[];
  palette?: [number, number, number][];
  interlace?: number;
}

const CHANNEL_COUNT: Record<number, number> = { 0: 1, 2: 3, 3: 1, 4: 2, 6: 4 };

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  return pb <= pc ? b : c;
}

/** Build a valid PNG, applying the requested per-row filter types. */
export function makePng(spec: PngSpec): Buffer {
  const { width, height, colorType, bitDepth } = spec;
  const channels = CHANNEL_COUNT[colorType];
  const rowBytes = width * channels * (bitDepth / 8);
  const bpp = Math.max(1, channels * (bitDepth / 8));

  const rows: Buffer[] = [];
  for (let y = 0; y < height; y++) {
    const row = Buffer.alloc(rowBytes);
    const values = spec.samples[y];
    if (values.length !== width * channels) {
      throw new Error(`row ${y}: ${values.length} samples, expected ${width * channels}`);
    }
    for (let i = 0; i < values.length; i++) {
      if (bitDepth === 16) {
        row.writeUInt16BE(values[i], 2 * i);
      } else {
        row[i] = values[i];
      }
    }
    rows.push(row);
  }

  const filtered: Buffer[] = [];
  for (let y = 0; y < height; y++) {
    const filter = spec.filters ? spec.filters[y] : 0;
    const cur = rows[y];
    const prev = y > 0 ? rows[y - 1] : Buffer.alloc(rowBytes);
    const out = Buffer.alloc(rowBytes + 1);
    out[0] = filter;
    for (let x = 0; x < rowBytes; x++) {
      const left = x >= bpp ? cur[x - bpp] : 0;
      const up = prev[x];
      const upLeft = x >= bpp ? prev[x - bpp] : 0;
      let predictor: number;
      switch (filter) {
        case 0: predictor = 0; break;
        case 1: predictor = left; break;
        case 2: predictor = up; break;
        case 3: predictor = (left + up) >> 1; break;
        case 4: predictor = paeth(left, up, upLeft); break;
        default: throw new Error(`bad filter ${filter}`);
      }
      out[x + 1] = (cur[x] - predictor) & 0xff;
    }
    filtered.push(out);
  }

  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr.writeUInt8(bitDepth, 8);
  ihdr.writeUInt8(colorType, 9);
  ihdr.writeUInt8(0, 10);
  ihdr.writeUInt8(0, 11);
  ihdr.writeUInt8(spec.interlace ?? 0, 12);

  const parts = [PNG_SIGNATURE, pngChunk('IHDR', ihdr)];
  if (spec.palette) {
    parts.push(pngChunk('PLTE', Buffer.from(spec.palette.flat())));
  }
  parts.push(pngChunk('IDAT', deflateSync(Buffer.concat(filtered))));
  parts.push(pngChunk('IEND', Buffer.alloc(0)));
  return Buffer.concat(parts);
}

/** Binary PPM (P6) from RGB triples in [0, maxval]. */
export function makePpm(width: number, height: number, rgb: number[], maxval = 255): Buffer {
  const header = Buffer.from(`P6\n${width} ${height}\n${maxval}\n`, 'ascii');
  const wide = maxval > 255;
  const body = Buffer.alloc(rgb.length * (wide ? 2 : 1));
  for (let i = 0; i < rgb.length; i++) {
    if (wide) {
      body.writeUInt16BE(rgb[i], 2 * i);
    } else {
      body[i] = rgb[i];
    }
  }
  return Buffer.concat([header, body]);
}

/** Binary PGM (P5) from gray values in [0, maxval]. */
export function makePgm(width: number, height: number, gray: number[], maxval = 255): Buffer {
  const header = Buffer.from(`P5\n# test image\n${width} ${height}\n${maxval}\n`, 'ascii');
  return Buffer.concat([header, Buffer.from(gray)]);
}

/** A small deterministic RGB test image with smooth structure. */
export function gradientImage(width: number, height: number, phase = 0): { width: number; height: number; rgb: Float64Array } {
  const rgb = new Float64Array(width * height * 3);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const i = 3 * (y * width + x);
      rgb[i] = 0.5 + 0.5 * Math.sin(0.31 * x + phase);
      rgb[i + 1] = 0.5 + 0.5 * Math.cos(0.17 * y + phase);
      rgb[i + 2] = (x + y) / (width + height);
    }
  }
  return { width, height, rgb };
}

/** Quantize a float RGB image to 8-bit PPM bytes. */
export function toPpmBytes(image: { width: number; height: number; rgb: Float64Array }): Buffer {
  const values = Array.from(image.rgb, (v) => Math.round(Math.min(Math.max(v, 0), 1) * 255));
  return makePpm(image.width, image.height, values);
}

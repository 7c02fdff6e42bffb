/**
 * Minimal PNG decoder built on node:zlib.
 *
 * Supported: non-interlaced images, bit depth 8 or 16 for grayscale,
 * RGB, grayscale+alpha and RGBA, and 8-bit palette images. Alpha is
 * dropped (features are computed from opaque color). Chunk CRCs are
 * verified; anything malformed or outside this matrix raises
 * ImageDecodeError, which the exporter turns into a skip-with-warning.
 */

import { inflateSync } from 'node:zlib';

import { allocRgb, DecodedImage, ImageDecodeError } from './raster.js';

const SIGNATURE = Buffer.from([137, 80, 78, 71, 13, 10, 26, 10]);

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

export function crc32(data: Buffer, seed = 0xffffffff): number {
  let c = seed;
  for (let i = 0; i < data.length; i++) {
    c = CRC_TABLE[(c ^ data[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

interface Chunk {
  type: string;
  data: Buffer;
}

function* chunks(blob: Buffer): Generator<Chunk> {
  let pos = SIGNATURE.length;
  while (pos < blob.length) {
    if (blob.length - pos < 12) {
      throw new ImageDecodeError('truncated chunk header');
    }
    const length = blob.readUInt32BE(pos);
    const typeAndData = blob.subarray(pos + 4, pos + 8 + length);
    if (typeAndData.length !== 4 + length) {
      throw new ImageDecodeError('truncated chunk data');
    }
    const stored = blob.readUInt32BE(pos + 8 + length);
    if (crc32(typeAndData) !== stored) {
      throw new ImageDecodeError(`CRC mismatch in ${typeAndData.subarray(0, 4).toString('latin1')} chunk`);
    }
    yield { type: typeAndData.subarray(0, 4).toString('latin1'), data: Buffer.from(typeAndData.subarray(4)) };
    pos += 12 + length;
  }
}

interface Header {
  width: number;
  height: number;
  bitDepth: number;
  colorType: number;
  channels: number;
}

const CHANNELS: Record<number, number> = { 0: 1, 2: 3, 3: 1, 4: 2, 6: 4 };

function parseIhdr(data: Buffer): Header {
  if (data.length !== 13) {
    throw new ImageDecodeError(`IHDR length ${data.length}, expected 13`);
  }
  const width = data.readUInt32BE(0);
  const height = data.readUInt32BE(4);
  const bitDepth = data.readUInt8(8);
  const colorType = data.readUInt8(9);
  const compression = data.readUInt8(10);
  const filterMethod = data.readUInt8(11);
  const interlace = data.readUInt8(12);
  if (!(colorType in CHANNELS)) {
    throw new ImageDecodeError(`unknown color type ${colorType}`);
  }
  if (compression !== 0 || filterMethod !== 0) {
    throw new ImageDecodeError('unknown compression or filter method');
  }
  if (interlace !== 0) {
    throw new ImageDecodeError('interlaced images are not supported');
  }
  const depthOk = colorType === 3 ? bitDepth === 8 : bitDepth === 8 || bitDepth === 16;
  if (!depthOk) {
    throw new ImageDecodeError(`unsupported bit depth ${bitDepth} for color type ${colorType}`);
  }
  return { width, height, bitDepth, colorType, channels: CHANNELS[colorType] };
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  return pb <= pc ? b : c;
}

/** Reverse per-scanline filtering in place; returns the raw sample bytes. */
function unfilter(raw: Buffer, header: Header): Buffer {
  const { width, height, bitDepth, channels } = header;
  const rowBytes = width * channels * (bitDepth / 8);
  const bpp = Math.max(1, channels * (bitDepth / 8));
  if (raw.length !== height * (rowBytes + 1)) {
    throw new ImageDecodeError(`decompressed size ${raw.length}, expected ${height * (rowBytes + 1)}`);
  }
  const out = Buffer.alloc(height * rowBytes);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (rowBytes + 1)];
    const src = raw.subarray(y * (rowBytes + 1) + 1, (y + 1) * (rowBytes + 1));
    const dst = out.subarray(y * rowBytes, (y + 1) * rowBytes);
    const prev = y > 0 ? out.subarray((y - 1) * rowBytes, y * rowBytes) : null;
    switch (filter) {
      case 0:
        src.copy(dst);
        break;
      case 1:
        for (let x = 0; x < rowBytes; x++) {
          dst[x] = (src[x] + (x >= bpp ? dst[x - bpp] : 0)) & 0xff;
        }
        break;
      case 2:
        for (let x = 0; x < rowBytes; x++) {
          dst[x] = (src[x] + (prev ? prev[x] : 0)) & 0xff;
        }
        break;
      case 3:
        for (let x = 0; x < rowBytes; x++) {
          const left = x >= bpp ? dst[x - bpp] : 0;
          const up = prev ? prev[x] : 0;
          dst[x] = (src[x] + ((left + up) >> 1)) & 0xff;
        }
        break;
      case 4:
        for (let x = 0; x < rowBytes; x++) {
          const left = x >= bpp ? dst[x - bpp] : 0;
          const up = prev ? prev[x] : 0;
          const upLeft = prev && x >= bpp ? prev[x - bpp] : 0;
          dst[x] = (src[x] + paeth(left, up, upLeft)) & 0xff;
        }
        break;
      default:
        throw new ImageDecodeError(`unknown filter type ${filter} on row ${y}`);
    }
  }
  return out;
}

export function decodePng(blob: Buffer): DecodedImage {
  if (blob.length < SIGNATURE.length || !blob.subarray(0, SIGNATURE.length).equals(SIGNATURE)) {
    throw new ImageDecodeError('not a PNG file');
  }
  let header: Header | null = null;
  let palette: Buffer | null = null;
  const idat: Buffer[] = [];
  let sawEnd = false;
  for (const chunk of chunks(blob)) {
    if (sawEnd) {
      throw new ImageDecodeError('data after IEND');
    }
    if (chunk.type === 'IHDR') {
      if (header) throw new ImageDecodeError('duplicate IHDR');
      header = parseIhdr(chunk.data);
    } else if (chunk.type === 'PLTE') {
      if (chunk.data.length === 0 || chunk.data.length % 3 !== 0) {
        throw new ImageDecodeError(`bad PLTE length ${chunk.data.length}`);
      }
      palette = chunk.data;
    } else if (chunk.type === 'IDAT') {
      idat.push(chunk.data);
    } else if (chunk.type === 'IEND') {
      sawEnd = true;
    }
    // Ancillary chunks (tRNS, tEXt, gAMA, ...) are ignored.
  }
  if (!header) throw new ImageDecodeError('missing IHDR');
  if (!sawEnd) throw new ImageDecodeError('missing IEND');
  if (idat.length === 0) throw new ImageDecodeError('missing IDAT');
  if (header.colorType === 3 && !palette) throw new ImageDecodeError('palette image without PLTE');
  allocRgb(header.width, header.height); // dimension sanity before inflating

  let raw: Buffer;
  try {
    raw = inflateSync(Buffer.concat(idat));
  } catch (err) {
    throw new ImageDecodeError(`bad IDAT stream: ${(err as Error).message}`);
  }
  const samples = unfilter(raw, header);

  const { width, height, bitDepth, colorType, channels } = header;
  const rgb = allocRgb(width, height);
  const max = bitDepth === 16 ? 65535 : 255;
  const step = channels * (bitDepth / 8);
  const read = (base: number, channel: number): number =>
    bitDepth === 16 ? samples.readUInt16BE(base + 2 * channel) : samples[base + channel];

  for (let i = 0; i < width * height; i++) {
    const base = i * step;
    let r: number;
    let g: number;
    let b: number;
    if (colorType === 3) {
      const index = samples[base];
      if (!palette || 3 * index + 2 >= palette.length) {
        throw new ImageDecodeError(`palette index ${index} out of range`);
      }
      r = palette[3 * index] / 255;
      g = palette[3 * index + 1] / 255;
      b = palette[3 * index + 2] / 255;
    } else if (colorType === 0 || colorType === 4) {
      const v = read(base, 0) / max;
      r = v;
      g = v;
      b = v;
    } else {
      r = read(base, 0) / max;
      g = read(base, 1) / max;
      b = read(base, 2) / max;
    }
    rgb[3 * i] = r;
    rgb[3 * i + 1] = g;
    rgb[3 * i + 2] = b;
  }
  return { width, height, rgb };
}

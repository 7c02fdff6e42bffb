/**
 * Decoders for the portable-anymap family: PGM (P2/P5) and PPM (P3/P6).
 *
 * Output is normalized RGB in [0, 1]; grayscale maps are replicated across
 * the three channels. Binary variants with maxval > 255 use two
 * big-endian bytes per sample, per the format definition.
 */

import { allocRgb, DecodedImage, ImageDecodeError } from './raster.js';

interface PnmHeader {
  kind: 'P2' | 'P3' | 'P5' | 'P6';
  width: number;
  height: number;
  maxval: number;
  /** Offset of the first sample byte (binary) or token (ASCII). */
  dataOffset: number;
}

function isSpace(byte: number): boolean {
  return byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d || byte === 0x0b || byte === 0x0c;
}

/** Read header tokens, treating '#' comments as whitespace. */
function parseHeader(blob: Buffer): PnmHeader {
  const kind = blob.subarray(0, 2).toString('latin1');
  if (kind !== 'P2' && kind !== 'P3' && kind !== 'P5' && kind !== 'P6') {
    throw new ImageDecodeError(`not a PGM/PPM file (signature ${JSON.stringify(kind)})`);
  }
  const fields: number[] = [];
  let pos = 2;
  while (fields.length < 3) {
    while (pos < blob.length && (isSpace(blob[pos]) || blob[pos] === 0x23)) {
      if (blob[pos] === 0x23) {
        while (pos < blob.length && blob[pos] !== 0x0a) pos++;
      } else {
        pos++;
      }
    }
    if (pos >= blob.length) {
      throw new ImageDecodeError('truncated header');
    }
    let value = 0;
    let digits = 0;
    while (pos < blob.length && blob[pos] >= 0x30 && blob[pos] <= 0x39) {
      value = value * 10 + (blob[pos] - 0x30);
      digits++;
      pos++;
    }
    if (digits === 0) {
      throw new ImageDecodeError(`bad header token at byte ${pos}`);
    }
    fields.push(value);
  }
  const [width, height, maxval] = fields;
  if (width < 1 || height < 1) {
    throw new ImageDecodeError(`bad dimensions ${width}x${height}`);
  }
  if (maxval < 1 || maxval > 65535) {
    throw new ImageDecodeError(`bad maxval ${maxval}`);
  }
  if (kind === 'P5' || kind === 'P6') {
    // Binary data starts after exactly one whitespace byte.
    if (pos >= blob.length || !isSpace(blob[pos])) {
      throw new ImageDecodeError('missing whitespace before binary samples');
    }
    pos++;
  }
  return { kind: kind as PnmHeader['kind'], width, height, maxval, dataOffset: pos };
}

function readAsciiSamples(blob: Buffer, offset: number, count: number): Uint32Array {
  const out = new Uint32Array(count);
  let pos = offset;
  for (let i = 0; i < count; i++) {
    while (pos < blob.length && (isSpace(blob[pos]) || blob[pos] === 0x23)) {
      if (blob[pos] === 0x23) {
        while (pos < blob.length && blob[pos] !== 0x0a) pos++;
      } else {
        pos++;
      }
    }
    let value = 0;
    let digits = 0;
    while (pos < blob.length && blob[pos] >= 0x30 && blob[pos] <= 0x39) {
      value = value * 10 + (blob[pos] - 0x30);
      digits++;
      pos++;
    }
    if (digits === 0) {
      throw new ImageDecodeError(`expected ${count} samples, ran out at ${i}`);
    }
    out[i] = value;
  }
  return out;
}

function readBinarySamples(blob: Buffer, offset: number, count: number, maxval: number): Uint32Array {
  const wide = maxval > 255;
  const need = count * (wide ? 2 : 1);
  if (blob.length - offset < need) {
    throw new ImageDecodeError(`truncated samples: need ${need} bytes, have ${blob.length - offset}`);
  }
  const out = new Uint32Array(count);
  for (let i = 0; i < count; i++) {
    out[i] = wide ? blob.readUInt16BE(offset + 2 * i) : blob[offset + i];
  }
  return out;
}

export function decodePnm(blob: Buffer): DecodedImage {
  const header = parseHeader(blob);
  const { kind, width, height, maxval, dataOffset } = header;
  const gray = kind === 'P2' || kind === 'P5';
  const count = width * height * (gray ? 1 : 3);
  const samples =
    kind === 'P2' || kind === 'P3'
      ? readAsciiSamples(blob, dataOffset, count)
      : readBinarySamples(blob, dataOffset, count, maxval);
  const rgb = allocRgb(width, height);
  for (let i = 0; i < width * height; i++) {
    if (gray) {
      const v = samples[i];
      if (v > maxval) throw new ImageDecodeError(`sample ${v} exceeds maxval ${maxval}`);
      const s = v / maxval;
      rgb[3 * i] = s;
      rgb[3 * i + 1] = s;
      rgb[3 * i + 2] = s;
    } else {
      for (let c = 0; c < 3; c++) {
        const v = samples[3 * i + c];
        if (v > maxval) throw new ImageDecodeError(`sample ${v} exceeds maxval ${maxval}`);
        rgb[3 * i + c] = v / maxval;
      }
    }
  }
  return { width, height, rgb };
}

/**
 * CLDF: the clustering engine's binary feature-matrix format.
 *
 * Layout (all integers little-endian):
 *   magic "CLDF" (4 bytes) | version u16 | flags u16 | rows u64 | cols u64 |
 *   dtype u8 (0 = float64, 1 = float32) | row-major feature block |
 *   rows * u32 labels when flags bit 0 is set.
 *
 * The header is packed (25 bytes, no padding) and readers reject trailing
 * bytes, so a writer must emit exactly header + features (+ labels).
 */

const MAGIC = Buffer.from('CLDF', 'ascii');
const VERSION = 1;
const HEADER_SIZE = 25;
const FLAG_LABELS = 1;

export type CldfDtype = 'float32' | 'float64';

export interface CldfDataset {
  /** Row-major feature matrix, rows * cols values. */
  features: Float32Array | Float64Array;
  rows: number;
  cols: number;
  dtype: CldfDtype;
  /** Per-row integer class labels, or null when absent. */
  labels: Uint32Array | null;
}

export class CldfFormatError extends Error {}

function dtypeTag(dtype: CldfDtype): number {
  return dtype === 'float64' ? 0 : 1;
}

function bytesPerValue(dtype: CldfDtype): number {
  return dtype === 'float64' ? 8 : 4;
}

/** Serialize a feature matrix (and optional labels) to CLDF bytes. */
export function encodeCldf(dataset: {
  features: ArrayLike<number>;
  rows: number;
  cols: number;
  dtype: CldfDtype;
  labels?: ArrayLike<number> | null;
}): Buffer {
  const { features, rows, cols, dtype } = dataset;
  const labels = dataset.labels ?? null;
  if (!Number.isInteger(rows) || !Number.isInteger(cols) || rows < 1 || cols < 1) {
    throw new CldfFormatError(`CLDF: rows and cols must be positive integers, got ${rows}x${cols}`);
  }
  if (features.length !== rows * cols) {
    throw new CldfFormatError(
      `CLDF: feature length ${features.length} does not match ${rows}x${cols}`,
    );
  }
  if (labels !== null && labels.length !== rows) {
    throw new CldfFormatError(`CLDF: ${labels.length} labels for ${rows} rows`);
  }

  const valueBytes = bytesPerValue(dtype);
  const total = HEADER_SIZE + rows * cols * valueBytes + (labels ? 4 * rows : 0);
  const out = Buffer.alloc(total);
  MAGIC.copy(out, 0);
  out.writeUInt16LE(VERSION, 4);
  out.writeUInt16LE(labels ? FLAG_LABELS : 0, 6);
  out.writeBigUInt64LE(BigInt(rows), 8);
  out.writeBigUInt64LE(BigInt(cols), 16);
  out.writeUInt8(dtypeTag(dtype), 24);

  let offset = HEADER_SIZE;
  if (dtype === 'float64') {
    for (let i = 0; i < features.length; i++) {
      out.writeDoubleLE(features[i], offset);
      offset += 8;
    }
  } else {
    for (let i = 0; i < features.length; i++) {
      out.writeFloatLE(Math.fround(features[i]), offset);
      offset += 4;
    }
  }
  if (labels) {
    for (let i = 0; i < rows; i++) {
      const label = labels[i];
      if (!Number.isInteger(label) || label < 0 || label > 0xffffffff) {
        throw new CldfFormatError(`CLDF: label ${label} does not fit in u32`);
      }
      out.writeUInt32LE(label, offset);
      offset += 4;
    }
  }
  return out;
}

/** Parse CLDF bytes; rejects bad magic, unknown version/flags, size mismatch. */
export function decodeCldf(blob: Buffer): CldfDataset {
  if (blob.length < HEADER_SIZE) {
    throw new CldfFormatError('CLDF: file shorter than header');
  }
  if (!blob.subarray(0, 4).equals(MAGIC)) {
    throw new CldfFormatError(`CLDF: bad magic ${JSON.stringify(blob.subarray(0, 4).toString('latin1'))}`);
  }
  const version = blob.readUInt16LE(4);
  if (version !== VERSION) {
    throw new CldfFormatError(`CLDF: unsupported version ${version}`);
  }
  const flags = blob.readUInt16LE(6);
  if (flags & ~FLAG_LABELS) {
    throw new CldfFormatError(`CLDF: unknown flag bits 0x${flags.toString(16)}`);
  }
  const rowsBig = blob.readBigUInt64LE(8);
  const colsBig = blob.readBigUInt64LE(16);
  if (rowsBig < 1n || colsBig < 1n || rowsBig > 0x7fffffffn || colsBig > 0x7fffffffn) {
    throw new CldfFormatError(`CLDF: bad shape ${rowsBig}x${colsBig}`);
  }
  const rows = Number(rowsBig);
  const cols = Number(colsBig);
  const tag = blob.readUInt8(24);
  if (tag !== 0 && tag !== 1) {
    throw new CldfFormatError(`CLDF: unknown dtype tag ${tag}`);
  }
  const dtype: CldfDtype = tag === 0 ? 'float64' : 'float32';
  const valueBytes = bytesPerValue(dtype);
  const featBytes = rows * cols * valueBytes;
  const labelBytes = flags & FLAG_LABELS ? 4 * rows : 0;
  const expected = HEADER_SIZE + featBytes + labelBytes;
  if (blob.length < expected) {
    throw new CldfFormatError(`CLDF: truncated, expected ${expected} bytes, got ${blob.length}`);
  }
  if (blob.length > expected) {
    throw new CldfFormatError(`CLDF: ${blob.length - expected} trailing bytes`);
  }

  const features = dtype === 'float64' ? new Float64Array(rows * cols) : new Float32Array(rows * cols);
  for (let i = 0; i < features.length; i++) {
    features[i] =
      dtype === 'float64'
        ? blob.readDoubleLE(HEADER_SIZE + 8 * i)
        : blob.readFloatLE(HEADER_SIZE + 4 * i);
  }
  let labels: Uint32Array | null = null;
  if (flags & FLAG_LABELS) {
    labels = new Uint32Array(rows);
    for (let i = 0; i < rows; i++) {
      labels[i] = blob.readUInt32LE(HEADER_SIZE + featBytes + 4 * i);
    }
  }
  return { features, rows, cols, dtype, labels };
}

/** Byte range of the feature block inside an encoded CLDF buffer. */
export function featureBlockRange(blob: Buffer): { start: number; end: number } {
  const parsed = decodeCldf(blob);
  const start = HEADER_SIZE;
  return { start, end: start + parsed.rows * parsed.cols * bytesPerValue(parsed.dtype) };
}

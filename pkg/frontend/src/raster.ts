/** Shared raster-image types for the bundled decoders. */

export interface DecodedImage {
  width: number;
  height: number;
  /** Row-major RGB triples, each channel in [0, 1]. Length = width * height * 3. */
  rgb: Float64Array;
}

/** Raised when a file cannot be decoded; the exporter skips such files. */
export class ImageDecodeError extends Error {}

export function allocRgb(width: number, height: number): Float64Array {
  if (!Number.isInteger(width) || !Number.isInteger(height) || width < 1 || height < 1) {
    throw new ImageDecodeError(`bad image dimensions ${width}x${height}`);
  }
  if (width * height > 64 * 1024 * 1024) {
    throw new ImageDecodeError(`image too large: ${width}x${height}`);
  }
  return new Float64Array(width * height * 3);
}

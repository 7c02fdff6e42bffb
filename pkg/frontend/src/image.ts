/**
 * Image loading: dispatch to the bundled decoders and resize to the
 * backbone's input resolution.
 */

import { readFileSync } from 'node:fs';
import { extname } from 'node:path';

import { decodePng } from './png.js';
import { decodePnm } from './pnm.js';
import { DecodedImage, ImageDecodeError, allocRgb } from './raster.js';

/** Extensions treated as image candidates during directory scans. */
export const IMAGE_EXTENSIONS = new Set([
  '.png', '.ppm', '.pgm', '.pnm', '.jpg', '.jpeg', '.bmp', '.gif', '.tif', '.tiff', '.webp',
]);

const PNG_SIGNATURE = Buffer.from([137, 80, 78, 71]);

export function decodeImage(blob: Buffer, filename: string): DecodedImage {
  if (blob.subarray(0, 4).equals(PNG_SIGNATURE)) {
    return decodePng(blob);
  }
  const tag = blob.subarray(0, 2).toString('latin1');
  if (['P2', 'P3', 'P5', 'P6'].includes(tag)) {
    return decodePnm(blob);
  }
  const ext = extname(filename).toLowerCase();
  if (ext === '.png' || ext === '.ppm' || ext === '.pgm' || ext === '.pnm') {
    throw new ImageDecodeError(`${filename}: contents do not match a supported format`);
  }
  throw new ImageDecodeError(`${filename}: unsupported image format (decoders: PNG, PPM, PGM)`);
}

export function loadImage(path: string): DecodedImage {
  return decodeImage(readFileSync(path), path);
}

/** Bilinear resize (half-pixel centers) of an RGB image. */
export function resizeBilinear(image: DecodedImage, outWidth: number, outHeight: number): DecodedImage {
  const { width, height, rgb } = image;
  if (width === outWidth && height === outHeight) {
    return { width, height, rgb: rgb.slice() };
  }
  const out = allocRgb(outWidth, outHeight);
  const scaleX = width / outWidth;
  const scaleY = height / outHeight;
  for (let oy = 0; oy < outHeight; oy++) {
    const sy = Math.min(Math.max((oy + 0.5) * scaleY - 0.5, 0), height - 1);
    const y0 = Math.floor(sy);
    const y1 = Math.min(y0 + 1, height - 1);
    const fy = sy - y0;
    for (let ox = 0; ox < outWidth; ox++) {
      const sx = Math.min(Math.max((ox + 0.5) * scaleX - 0.5, 0), width - 1);
      const x0 = Math.floor(sx);
      const x1 = Math.min(x0 + 1, width - 1);
      const fx = sx - x0;
      for (let c = 0; c < 3; c++) {
        const v00 = rgb[3 * (y0 * width + x0) + c];
        const v01 = rgb[3 * (y0 * width + x1) + c];
        const v10 = rgb[3 * (y1 * width + x0) + c];
        const v11 = rgb[3 * (y1 * width + x1) + c];
        const top = v00 + (v01 - v00) * fx;
        const bottom = v10 + (v11 - v10) * fx;
        out[3 * (oy * outWidth + ox) + c] = top + (bottom - top) * fy;
      }
    }
  }
  return { width: outWidth, height: outHeight, rgb: out };
}

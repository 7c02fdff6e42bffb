import { deflateSync } from 'node:zlib';

import { describe, expect, it } from 'vitest';

import { decodePng } from '../src/png.js';
import { ImageDecodeError } from '../src/raster.js';
import { makePng, pngChunk } from './helpers.js';

function rgbBytes(image: { rgb: Float64Array }, max = 255): number[] {
  return Array.from(image.rgb, (v) => Math.round(v * max));
}

describe('PNG decoder', () => {
  it('decodes 8-bit RGB through every filter type', () => {
    const width = 5;
    const height = 5;
    const samples: number[][] = [];
    for (let y = 0; y < height; y++) {
      const row: number[] = [];
      for (let x = 0; x < width * 3; x++) {
        row.push((37 * y + 11 * x + ((x * y) % 7)) % 256);
      }
      samples.push(row);
    }
    const blob = makePng({ width, height, colorType: 2, bitDepth: 8, samples, filters: [0, 1, 2, 3, 4] });
    const image = decodePng(blob);
    expect(image.width).toBe(width);
    expect(image.height).toBe(height);
    expect(rgbBytes(image)).toEqual(samples.flat());
  });

  it('decodes 8-bit grayscale, replicating channels', () => {
    const blob = makePng({
      width: 3,
      height: 2,
      colorType: 0,
      bitDepth: 8,
      samples: [
        [0, 128, 255],
        [17, 34, 51],
      ],
      filters: [0, 4],
    });
    const image = decodePng(blob);
    expect(rgbBytes(image)).toEqual([0, 0, 0, 128, 128, 128, 255, 255, 255, 17, 17, 17, 34, 34, 34, 51, 51, 51]);
  });

  it('drops the alpha channel of RGBA and gray+alpha images', () => {
    const rgba = decodePng(
      makePng({
        width: 2,
        height: 1,
        colorType: 6,
        bitDepth: 8,
        samples: [[10, 20, 30, 0, 200, 100, 50, 255]],
      }),
    );
    expect(rgbBytes(rgba)).toEqual([10, 20, 30, 200, 100, 50]);
    const grayAlpha = decodePng(
      makePng({ width: 2, height: 1, colorType: 4, bitDepth: 8, samples: [[77, 0, 200, 128]] }),
    );
    expect(rgbBytes(grayAlpha)).toEqual([77, 77, 77, 200, 200, 200]);
  });

  it('decodes palette images via PLTE lookup', () => {
    const blob = makePng({
      width: 3,
      height: 1,
      colorType: 3,
      bitDepth: 8,
      samples: [[2, 0, 1]],
      palette: [
        [255, 0, 0],
        [0, 255, 0],
        [0, 0, 255],
      ],
    });
    expect(rgbBytes(decodePng(blob))).toEqual([0, 0, 255, 255, 0, 0, 0, 255, 0]);
  });

  it('decodes 16-bit samples with big-endian scaling', () => {
    const blob = makePng({
      width: 2,
      height: 1,
      colorType: 2,
      bitDepth: 16,
      samples: [[0, 32768, 65535, 256, 512, 1024]],
      filters: [1],
    });
    const image = decodePng(blob);
    const expected = [0, 32768, 65535, 256, 512, 1024].map((v) => v / 65535);
    for (let i = 0; i < expected.length; i++) {
      expect(image.rgb[i]).toBeCloseTo(expected[i], 12);
    }
  });

  it('rejects corrupted and unsupported inputs', () => {
    const good = makePng({ width: 2, height: 2, colorType: 0, bitDepth: 8, samples: [[1, 2], [3, 4]] });
    expect(() => decodePng(Buffer.from('not a png'))).toThrow(ImageDecodeError);

    const badCrc = Buffer.from(good);
    badCrc[badCrc.length - 5] ^= 0xff; // corrupt IEND CRC
    expect(() => decodePng(badCrc)).toThrow(/CRC mismatch/);

    expect(() => decodePng(good.subarray(0, good.length - 4))).toThrow(/truncated/);

    const interlaced = makePng({
      width: 2,
      height: 1,
      colorType: 0,
      bitDepth: 8,
      samples: [[1, 2]],
      interlace: 1,
    });
    expect(() => decodePng(interlaced)).toThrow(/interlaced/);

    const paletteless = makePng({ width: 1, height: 1, colorType: 3, bitDepth: 8, samples: [[0]] });
    expect(() => decodePng(paletteless)).toThrow(/without PLTE/);
  });

  it('rejects streams whose pixel payload is the wrong size', () => {
    const good = makePng({ width: 2, height: 2, colorType: 0, bitDepth: 8, samples: [[1, 2], [3, 4]] });
    // Rebuild with an IDAT holding one missing row.
    const shortIdat = deflateSync(Buffer.from([0, 1, 2]));
    const parts: Buffer[] = [];
    let pos = 8;
    parts.push(good.subarray(0, 8));
    while (pos < good.length) {
      const length = good.readUInt32BE(pos);
      const type = good.subarray(pos + 4, pos + 8).toString('latin1');
      if (type === 'IDAT') {
        parts.push(pngChunk('IDAT', shortIdat));
      } else {
        parts.push(good.subarray(pos, pos + 12 + length));
      }
      pos += 12 + length;
    }
    expect(() => decodePng(Buffer.concat(parts))).toThrow(/decompressed size/);
  });
});

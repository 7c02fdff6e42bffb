/**
 * Cross-component export fidelity: the clustering engine must read an
 * exported CLDF byte-faithfully (checksum over the feature block), and
 * repeated exports must be byte-identical. Skipped when the Python
 * engine is not installed in the environment.
 */

import { execFileSync } from 'node:child_process';
import { createHash } from 'node:crypto';
import { mkdirSync, mkdtempSync, readFileSync, rmSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { featureBlockRange } from '../src/cldf.js';
import { exportFeatures } from '../src/exporter.js';
import { gradientImage, toPpmBytes } from './helpers.js';

const READBACK = `
import hashlib
import sys

import numpy as np

from cludi import read_cldf

features, labels = read_cldf(sys.argv[1])
block = np.ascontiguousarray(features.astype("<f4")).tobytes()
print(hashlib.sha256(block).hexdigest())
print(",".join(str(v) for v in labels))
print(f"{features.shape[0]}x{features.shape[1]}")
`;

function pythonAvailable(): boolean {
  try {
    execFileSync('python3', ['-c', 'import cludi'], { stdio: 'pipe', timeout: 60_000 });
    return true;
  } catch {
    return false;
  }
}

const hasPython = pythonAvailable();
let root: string;

beforeAll(() => {
  root = mkdtempSync(join(tmpdir(), 'cludi-fidelity-'));
  for (const [cls, phases] of [
    ['circles', [0, 0.7, 1.4]],
    ['squares', [2.1, 2.8, 3.5]],
  ] as const) {
    mkdirSync(join(root, cls));
    phases.forEach((phase, i) => {
      writeFileSync(join(root, cls, `img${i}.ppm`), toPpmBytes(gradientImage(24, 24, phase)));
    });
  }
});

afterAll(() => {
  rmSync(root, { recursive: true, force: true });
});

describe('export fidelity across components', () => {
  it.skipIf(!hasPython)('feature block survives the engine read-back (checksum match)', () => {
    const out = join(root, 'features.cldf');
    const result = exportFeatures(
      { imagesDir: root, model: 's16', outPath: out, labelsFromDirs: true },
      () => {},
    );
    expect(result.rows).toBe(6);

    const blob = readFileSync(out);
    const { start, end } = featureBlockRange(blob);
    const localDigest = createHash('sha256').update(blob.subarray(start, end)).digest('hex');

    const stdout = execFileSync('python3', ['-c', READBACK, out], {
      encoding: 'utf8',
      timeout: 120_000,
    });
    const [remoteDigest, labelLine, shape] = stdout.trim().split('\n');
    expect(remoteDigest).toBe(localDigest);
    expect(labelLine).toBe('0,0,0,1,1,1');
    expect(shape).toBe('6x384');
  });

  it('repeated exports are byte-identical (checksummed)', () => {
    const a = join(root, 'runA.cldf');
    const b = join(root, 'runB.cldf');
    exportFeatures({ imagesDir: root, model: 's16', outPath: a, labelsFromDirs: true }, () => {});
    exportFeatures({ imagesDir: root, model: 's16', outPath: b, labelsFromDirs: true }, () => {});
    const digestA = createHash('sha256').update(readFileSync(a)).digest('hex');
    const digestB = createHash('sha256').update(readFileSync(b)).digest('hex');
    expect(digestA).toBe(digestB);
  });
});

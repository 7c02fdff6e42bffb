/**
 * Directory-to-CLDF feature export.
 *
 * Scans an image folder, embeds every decodable image with the chosen
 * backbone in deterministic (sorted relative path) order, and writes a
 * CLDF feature matrix plus a JSON manifest describing exactly what went
 * in. Undecodable files are skipped with a warning and recorded in the
 * manifest; exporting zero rows is an error.
 */

import { readdirSync, readFileSync, statSync, writeFileSync } from 'node:fs';
import { extname, join } from 'node:path';

import { getBackbone } from './backbone.js';
import { encodeCldf } from './cldf.js';
import { decodeImage, IMAGE_EXTENSIONS } from './image.js';

export class ExportError extends Error {}

export interface ExportJob {
  /** Directory scanned recursively for images. */
  imagesDir: string;
  /** Backbone tag: s16 (384-d) or b16 (768-d). */
  model: string;
  /** Output CLDF path; the manifest lands next to it. */
  outPath: string;
  /** Label each row by its top-level subdirectory, lexicographic class order. */
  labelsFromDirs?: boolean;
  /** Images per progress batch (processing is sequential either way). */
  batchSize?: number;
  /** Compute device tag; the bundled backbone supports only "cpu". */
  device?: string;
}

export interface SkippedFile {
  file: string;
  reason: string;
}

export interface ExportResult {
  outPath: string;
  manifestPath: string;
  rows: number;
  dim: number;
  images: string[];
  skipped: SkippedFile[];
  classes: string[] | null;
}

type Logger = (message: string) => void;

/** Byte-order comparison for ASCII-safe deterministic sorting. */
function comparePaths(a: string, b: string): number {
  return a < b ? -1 : a > b ? 1 : 0;
}

function walkImages(root: string, prefix = ''): string[] {
  const found: string[] = [];
  const entries = readdirSync(join(root, prefix), { withFileTypes: true });
  entries.sort((a, b) => comparePaths(a.name, b.name));
  for (const entry of entries) {
    const rel = prefix ? `${prefix}/${entry.name}` : entry.name;
    if (entry.isDirectory()) {
      found.push(...walkImages(root, rel));
    } else if (entry.isFile() && IMAGE_EXTENSIONS.has(extname(entry.name).toLowerCase())) {
      found.push(rel);
    }
  }
  return found;
}

export function exportFeatures(job: ExportJob, log: Logger = (m) => console.error(m)): ExportResult {
  const batchSize = job.batchSize ?? 32;
  const device = job.device ?? 'cpu';
  if (!Number.isInteger(batchSize) || batchSize < 1) {
    throw new ExportError(`batch size must be a positive integer, got ${batchSize}`);
  }
  if (device !== 'cpu') {
    throw new ExportError(`unsupported device ${JSON.stringify(device)} (bundled backbone runs on cpu)`);
  }
  let backbone;
  try {
    backbone = getBackbone(job.model);
  } catch (err) {
    throw new ExportError((err as Error).message);
  }

  let rootStat;
  try {
    rootStat = statSync(job.imagesDir);
  } catch {
    throw new ExportError(`image directory not found: ${job.imagesDir}`);
  }
  if (!rootStat.isDirectory()) {
    throw new ExportError(`not a directory: ${job.imagesDir}`);
  }

  const candidates = walkImages(job.imagesDir).sort(comparePaths);
  if (candidates.length === 0) {
    throw new ExportError(`no image files under ${job.imagesDir}`);
  }

  let classes: string[] | null = null;
  if (job.labelsFromDirs) {
    const names = new Set<string>();
    for (const rel of candidates) {
      const slash = rel.indexOf('/');
      if (slash < 0) {
        throw new ExportError(
          `--labels-from-dirs requires every image under a class subdirectory; ${rel} is at the top level`,
        );
      }
      names.add(rel.slice(0, slash));
    }
    classes = [...names].sort(comparePaths);
  }

  const images: string[] = [];
  const labels: number[] = [];
  const skipped: SkippedFile[] = [];
  const rowsData: Float64Array[] = [];
  for (let start = 0; start < candidates.length; start += batchSize) {
    const batch = candidates.slice(start, start + batchSize);
    for (const rel of batch) {
      let feature: Float64Array;
      try {
        const blob = readFileSync(join(job.imagesDir, rel));
        feature = backbone.embed(decodeImage(blob, rel));
      } catch (err) {
        const reason = err instanceof Error ? err.message : String(err);
        log(`warning: skipping ${rel}: ${reason}`);
        skipped.push({ file: rel, reason });
        continue;
      }
      rowsData.push(feature);
      images.push(rel);
      if (classes) {
        labels.push(classes.indexOf(rel.slice(0, rel.indexOf('/'))));
      }
    }
    log(`embedded ${images.length}/${candidates.length - skipped.length} images (${backbone.tag})`);
  }

  if (rowsData.length === 0) {
    throw new ExportError(`no images could be exported from ${job.imagesDir} (${skipped.length} skipped)`);
  }

  const dim = backbone.dim;
  const flat = new Float64Array(rowsData.length * dim);
  rowsData.forEach((row, i) => flat.set(row, i * dim));
  const blob = encodeCldf({
    features: flat,
    rows: rowsData.length,
    cols: dim,
    dtype: 'float32',
    labels: classes ? labels : null,
  });
  writeFileSync(job.outPath, blob);

  const manifestPath = `${job.outPath}.manifest.json`;
  const manifest = {
    format: 'cludi-export-manifest',
    version: 1,
    backbone: backbone.tag,
    dim,
    device,
    rows: rowsData.length,
    images,
    classes,
    skipped,
  };
  writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + '\n');

  return { outPath: job.outPath, manifestPath, rows: rowsData.length, dim, images, skipped, classes };
}

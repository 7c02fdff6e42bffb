#!/usr/bin/env node
/**
 * cludi-export command line.
 *
 *   cludi-export export --images DIR --model {s16,b16} --out FILE
 *                       [--labels-from-dirs] [--batch N] [--device cpu]
 *
 * Writes FILE (CLDF feature matrix) and FILE.manifest.json. Exit codes:
 * 0 success, 1 runtime failure, 2 usage error.
 */

import { realpathSync } from 'node:fs';
import { pathToFileURL } from 'node:url';
import { parseArgs } from 'node:util';

import { ExportError, exportFeatures } from './exporter.js';
import { ImageDecodeError } from './raster.js';

const USAGE = `usage: cludi-export export --images DIR --model {s16,b16} --out FILE
                    [--labels-from-dirs] [--batch N] [--device cpu]

Embeds every decodable image under DIR (recursively, sorted by relative
path) with the chosen backbone and writes the rows as CLDF to FILE, plus
a JSON manifest at FILE.manifest.json. With --labels-from-dirs each row
is labeled by its top-level subdirectory; classes are numbered in
lexicographic name order.`;

class UsageError extends Error {}

function parseCommand(argv: string[]) {
  const command = argv[0];
  if (command !== 'export') {
    throw new UsageError(`unknown command ${JSON.stringify(command)}`);
  }
  let parsed;
  try {
    parsed = parseArgs({
      args: argv.slice(1),
      options: {
        images: { type: 'string' },
        model: { type: 'string' },
        out: { type: 'string' },
        'labels-from-dirs': { type: 'boolean', default: false },
        batch: { type: 'string', default: '32' },
        device: { type: 'string', default: 'cpu' },
        help: { type: 'boolean', short: 'h', default: false },
      },
      allowPositionals: false,
    });
  } catch (err) {
    throw new UsageError((err as Error).message);
  }
  return parsed.values;
}

export function main(argv: string[], log: (m: string) => void = (m) => console.error(m)): number {
  if (argv.length === 0) {
    log(USAGE);
    return 2;
  }
  if (argv[0] === '--help' || argv[0] === '-h') {
    console.log(USAGE);
    return 0;
  }
  try {
    const values = parseCommand(argv);
    if (values.help) {
      console.log(USAGE);
      return 0;
    }
    const { images, model, out } = values;
    if (!images || !model || !out) {
      throw new UsageError('--images, --model and --out are required');
    }
    const batchSize = Number(values.batch);
    if (!Number.isInteger(batchSize) || batchSize < 1) {
      throw new UsageError(`--batch must be a positive integer, got ${values.batch}`);
    }
    const result = exportFeatures(
      {
        imagesDir: images,
        model,
        outPath: out,
        labelsFromDirs: values['labels-from-dirs'],
        batchSize,
        device: values.device,
      },
      log,
    );
    log(
      `wrote ${result.rows} x ${result.dim} features to ${result.outPath} ` +
        `(${result.skipped.length} skipped); manifest at ${result.manifestPath}`,
    );
    return 0;
  } catch (err) {
    if (err instanceof UsageError) {
      log(`error: ${err.message}\n${USAGE}`);
      return 2;
    }
    const runtime =
      err instanceof ExportError ||
      err instanceof ImageDecodeError ||
      (err instanceof Error && 'code' in err); // filesystem errors (ENOENT, EACCES, ...)
    if (runtime) {
      log(`error: ${(err as Error).message}`);
      return 1;
    }
    throw err;
  }
}

const entry = process.argv[1];
if (entry && import.meta.url === pathToFileURL(realpathSync(entry)).href) {
  process.exit(main(process.argv.slice(2)));
}

#!/usr/bin/env node
/**
 * camproxy CLI: `cam` produces a PGM attention mask from the proxy model,
 * `serve` runs the oracle server on stdio, `train` regenerates the shipped
 * checkpoint from synthetic scenes.
 */

import * as path from 'path';
import { computeCam } from './cam';
import { serveOracle } from './serve';
import { trainAndSave } from './train';

const DEFAULT_WEIGHTS = path.join(__dirname, '..', 'assets', 'proxy-weights.json');

function parseArgs(argv: string[]): Map<string, string> {
  const args = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith('--') || i + 1 >= argv.length) {
      throw new Error(`bad arguments near ${key}`);
    }
    args.set(key.slice(2), argv[i + 1]);
  }
  return args;
}

function usage(): never {
  process.stderr.write(
    [
      'usage:',
      '  camproxy cam --image IN.png --out MASK.pgm [--size HxW] [--weights FILE] [--variant cam]',
      '  camproxy serve [--weights FILE]',
      '  camproxy train --out WEIGHTS.json [--samples N] [--epochs N] [--seed N]',
      '',
    ].join('\n'),
  );
  process.exit(2);
}

async function main(): Promise<void> {
  const [command, ...rest] = process.argv.slice(2);
  if (!command) {
    usage();
  }
  let args: Map<string, string>;
  try {
    args = parseArgs(rest);
  } catch (err) {
    process.stderr.write(String(err) + '\n');
    usage();
  }

  if (command === 'cam') {
    const image = args.get('image');
    const out = args.get('out');
    if (!image || !out) {
      usage();
    }
    let height: number | undefined;
    let width: number | undefined;
    const size = args.get('size');
    if (size) {
      const match = /^(\d+)x(\d+)$/.exec(size);
      if (!match) {
        process.stderr.write(`bad --size ${size}, expected HxW\n`);
        process.exit(2);
      }
      height = Number(match[1]);
      width = Number(match[2]);
    }
    const result = computeCam({
      imagePath: image,
      outPath: out,
      weightsPath: args.get('weights') ?? DEFAULT_WEIGHTS,
      height,
      width,
      variant: (args.get('variant') ?? 'cam') as 'cam',
    });
    process.stderr.write(
      `top-1 ${result.topClassName} (${result.confidence.toFixed(3)}), ` +
        `mask ${result.width}x${result.height} -> ${out}\n`,
    );
    return;
  }

  if (command === 'serve') {
    await serveOracle({ weightsPath: args.get('weights') ?? DEFAULT_WEIGHTS });
    return;
  }

  if (command === 'train') {
    const out = args.get('out');
    if (!out) {
      usage();
    }
    await trainAndSave(out, {
      samples: args.has('samples') ? Number(args.get('samples')) : undefined,
      epochs: args.has('epochs') ? Number(args.get('epochs')) : undefined,
      seed: args.has('seed') ? Number(args.get('seed')) : undefined,
    });
    process.stderr.write(`weights written to ${out}\n`);
    return;
  }

  usage();
}

main().catch((err) => {
  process.stderr.write(String(err?.stack ?? err) + '\n');
  process.exit(1);
});

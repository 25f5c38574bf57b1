/**
 * Stdio oracle server: wraps the pretrained classifier behind the toolkit's
 * newline-delimited JSON protocol.
 *
 *   in:  {"type":"hello","shape":[H,W,C]}
 *   out: {"type":"ready","classes":m}
 *   in:  {"type":"query","id":n,"pixels":"<base64 raw row-major bytes>"}
 *   out: {"type":"probs","id":n,"probs":[...]}
 *
 * One request is handled at a time; malformed query lines get an error reply
 * instead of killing the process.
 */

import * as readline from 'readline';
import * as tf from '@tensorflow/tfjs';
import { CLASS_NAMES, loadProxyModel, preprocess } from './model';

interface ServeOptions {
  weightsPath: string;
  input?: NodeJS.ReadableStream;
  output?: NodeJS.WritableStream;
}

export function serveOracle(options: ServeOptions): Promise<void> {
  const model = loadProxyModel(options.weightsPath);
  const input = options.input ?? process.stdin;
  const output = options.output ?? process.stdout;
  let shape: [number, number, number] | null = null;

  const send = (obj: unknown) => {
    output.write(JSON.stringify(obj) + '\n');
  };

  const classify = (pixelsB64: string): number[] => {
    if (shape === null) {
      throw new Error('query before hello');
    }
    const [h, w, c] = shape;
    const raw = Buffer.from(pixelsB64, 'base64');
    if (raw.length !== h * w * c) {
      throw new Error(`pixel payload is ${raw.length} bytes, expected ${h * w * c}`);
    }
    // Grayscale inputs are replicated to RGB before preprocessing.
    let rgb: Uint8Array;
    if (c === 3) {
      rgb = new Uint8Array(raw);
    } else {
      rgb = new Uint8Array(h * w * 3);
      for (let i = 0; i < h * w; i++) {
        rgb[i * 3] = rgb[i * 3 + 1] = rgb[i * 3 + 2] = raw[i];
      }
    }
    return tf.tidy(() => {
      const batch = preprocess(rgb, h, w);
      const probs = model.predict(batch) as tf.Tensor2D;
      return Array.from(probs.dataSync());
    });
  };

  return new Promise((resolve) => {
    const rl = readline.createInterface({ input, terminal: false });
    rl.on('line', (line) => {
      if (!line.trim()) {
        return;
      }
      let msg: Record<string, unknown>;
      try {
        msg = JSON.parse(line);
      } catch {
        send({ type: 'error', id: null, message: `not JSON: ${line.slice(0, 80)}` });
        return;
      }
      if (msg.type === 'hello') {
        const requested = msg.shape as number[];
        if (!Array.isArray(requested) || requested.length !== 3 || requested.some((v) => !(v > 0))) {
          send({ type: 'error', id: null, message: `bad hello shape ${JSON.stringify(msg.shape)}` });
          return;
        }
        if (requested[2] !== 1 && requested[2] !== 3) {
          send({ type: 'error', id: null, message: 'channel count must be 1 or 3' });
          return;
        }
        shape = requested as [number, number, number];
        send({ type: 'ready', classes: CLASS_NAMES.length });
        return;
      }
      if (msg.type === 'query') {
        try {
          send({ type: 'probs', id: msg.id, probs: classify(msg.pixels as string) });
        } catch (err) {
          send({ type: 'error', id: msg.id ?? null, message: String(err) });
        }
        return;
      }
      send({ type: 'error', id: (msg as { id?: number }).id ?? null, message: `unknown type ${msg.type}` });
    });
    rl.on('close', resolve);
  });
}

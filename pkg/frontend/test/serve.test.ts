import { spawn, ChildProcess } from 'child_process';
import * as path from 'path';
import * as readline from 'readline';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

const CLI = path.join(__dirname, '..', 'dist', 'cli.js');

interface Reply {
  type: string;
  id?: number | null;
  classes?: number;
  probs?: number[];
  message?: string;
}

class OracleClient {
  proc: ChildProcess;
  private queue: ((reply: Reply) => void)[] = [];

  constructor(args: string[] = []) {
    this.proc = spawn('node', [CLI, 'serve', ...args], { stdio: ['pipe', 'pipe', 'inherit'] });
    const rl = readline.createInterface({ input: this.proc.stdout! });
    rl.on('line', (line) => {
      const next = this.queue.shift();
      if (next) {
        next(JSON.parse(line));
      }
    });
  }

  send(obj: unknown): Promise<Reply> {
    return new Promise((resolve) => {
      this.queue.push(resolve);
      this.proc.stdin!.write(JSON.stringify(obj) + '\n');
    });
  }

  close(): void {
    this.proc.stdin!.end();
    this.proc.kill();
  }
}

function randomPixels(n: number, seed: number): Buffer {
  const buf = Buffer.alloc(n);
  let state = seed >>> 0;
  for (let i = 0; i < n; i++) {
    state = (Math.imul(state, 1664525) + 1013904223) >>> 0;
    buf[i] = state % 256;
  }
  return buf;
}

describe('oracle server protocol', () => {
  let client: OracleClient;

  beforeAll(() => {
    client = new OracleClient();
  });

  afterAll(() => {
    client.close();
  });

  it('answers hello with its class count', async () => {
    const ready = await client.send({ type: 'hello', shape: [24, 24, 3] });
    expect(ready.type).toBe('ready');
    expect(ready.classes).toBe(2);
  });

  it('replies to queries with normalized probabilities and matching ids', async () => {
    const pixels = randomPixels(24 * 24 * 3, 5).toString('base64');
    const reply = await client.send({ type: 'query', id: 1, pixels });
    expect(reply.type).toBe('probs');
    expect(reply.id).toBe(1);
    expect(reply.probs).toHaveLength(2);
    const sum = reply.probs!.reduce((a, b) => a + b, 0);
    expect(Math.abs(sum - 1)).toBeLessThanOrEqual(1e-6);
    expect(Math.min(...reply.probs!)).toBeGreaterThanOrEqual(0);
  });

  it('is deterministic for repeated queries', async () => {
    const pixels = randomPixels(24 * 24 * 3, 9).toString('base64');
    const a = await client.send({ type: 'query', id: 2, pixels });
    const b = await client.send({ type: 'query', id: 3, pixels });
    expect(a.probs).toEqual(b.probs);
  });

  it('answers malformed queries with an error reply instead of dying', async () => {
    const bad = await client.send({ type: 'query', id: 4, pixels: 'AAAA' });
    expect(bad.type).toBe('error');
    expect(bad.id).toBe(4);
    const notJson = await client.send('lol?');
    expect(notJson.type).toBe('error');
    // still alive afterwards
    const pixels = randomPixels(24 * 24 * 3, 11).toString('base64');
    const ok = await client.send({ type: 'query', id: 5, pixels });
    expect(ok.type).toBe('probs');
  });

  it('supports grayscale shapes by channel replication', async () => {
    const gray = new OracleClient();
    try {
      const ready = await gray.send({ type: 'hello', shape: [16, 16, 1] });
      expect(ready.type).toBe('ready');
      const reply = await gray.send({
        type: 'query',
        id: 1,
        pixels: randomPixels(16 * 16, 3).toString('base64'),
      });
      expect(reply.type).toBe('probs');
    } finally {
      gray.close();
    }
  });

  it('rejects bad hello shapes', async () => {
    const fresh = new OracleClient();
    try {
      const reply = await fresh.send({ type: 'hello', shape: [0, 4] });
      expect(reply.type).toBe('error');
    } finally {
      fresh.close();
    }
  });
});

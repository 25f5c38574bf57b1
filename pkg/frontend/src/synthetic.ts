/**
 * Synthetic scenes for training and testing the proxy: class 0 has a bright
 * textured object patch on a dark noisy background, class 1 is background
 * texture only.  A seeded LCG keeps generation reproducible without pulling
 * in an RNG dependency.
 */

import { RgbImage } from './images';

export class Lcg {
  private state: number;

  constructor(seed: number) {
    this.state = seed >>> 0;
  }

  next(): number {
    // Numerical Recipes LCG constants
    this.state = (Math.imul(this.state, 1664525) + 1013904223) >>> 0;
    return this.state / 4294967296;
  }

  int(lo: number, hi: number): number {
    return lo + Math.floor(this.next() * (hi - lo));
  }
}

export interface Scene {
  image: RgbImage;
  label: number; // 0 = object present, 1 = texture only
  box?: { top: number; left: number; height: number; width: number };
}

export function makeScene(size: number, label: number, rng: Lcg): Scene {
  const pixels = new Uint8Array(size * size * 3);
  for (let i = 0; i < pixels.length; i++) {
    pixels[i] = rng.int(0, 70); // dark background noise
  }
  const image: RgbImage = { height: size, width: size, pixels };
  if (label === 1) {
    return { image, label };
  }
  const boxSize = rng.int(Math.floor(size / 4), Math.floor(size / 2));
  const top = rng.int(1, size - boxSize - 1);
  const left = rng.int(1, size - boxSize - 1);
  for (let r = top; r < top + boxSize; r++) {
    for (let c = left; c < left + boxSize; c++) {
      const base = (r * size + c) * 3;
      const bright = 150 + rng.int(0, 100);
      pixels[base] = bright;
      pixels[base + 1] = Math.max(0, bright - rng.int(0, 60));
      pixels[base + 2] = rng.int(0, 80);
    }
  }
  return { image, label, box: { top, left, height: boxSize, width: boxSize } };
}

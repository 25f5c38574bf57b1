/**
 * PNG reading and PGM writing for the CAM pipeline.
 *
 * PGM output is the strict flavour the attack toolkit consumes: binary "P5",
 * maxval 255.
 */

import * as fs from 'fs';
import { PNG } from 'pngjs';

export interface RgbImage {
  height: number;
  width: number;
  /** Row-major RGB, length height*width*3, values 0..255. */
  pixels: Uint8Array;
}

export function readPng(path: string): RgbImage {
  const png = PNG.sync.read(fs.readFileSync(path));
  const pixels = new Uint8Array(png.height * png.width * 3);
  for (let i = 0; i < png.height * png.width; i++) {
    pixels[i * 3] = png.data[i * 4];
    pixels[i * 3 + 1] = png.data[i * 4 + 1];
    pixels[i * 3 + 2] = png.data[i * 4 + 2];
  }
  return { height: png.height, width: png.width, pixels };
}

export function writePng(image: RgbImage, path: string): void {
  const png = new PNG({ width: image.width, height: image.height });
  for (let i = 0; i < image.height * image.width; i++) {
    png.data[i * 4] = image.pixels[i * 3];
    png.data[i * 4 + 1] = image.pixels[i * 3 + 1];
    png.data[i * 4 + 2] = image.pixels[i * 3 + 2];
    png.data[i * 4 + 3] = 255;
  }
  fs.writeFileSync(path, PNG.sync.write(png));
}

export function writePgm(gray: Uint8Array, height: number, width: number, path: string): void {
  if (gray.length !== height * width) {
    throw new Error(`PGM payload is ${gray.length} bytes, expected ${height * width}`);
  }
  const header = Buffer.from(`P5\n${width} ${height}\n255\n`, 'ascii');
  fs.writeFileSync(path, Buffer.concat([header, Buffer.from(gray)]));
}

/**
 * Trains the proxy on synthetic object/texture scenes and writes the JSON
 * checkpoint consumed by `cam` and `serve`.  This is how the shipped
 * assets/proxy-weights.json was produced.
 */

import * as tf from '@tensorflow/tfjs';
import { buildProxyModel, INPUT_SIZE, saveWeights } from './model';
import { Lcg, makeScene } from './synthetic';

export interface TrainOptions {
  samples?: number;
  epochs?: number;
  seed?: number;
}

export async function trainProxy(options: TrainOptions = {}): Promise<tf.LayersModel> {
  const samples = options.samples ?? 600;
  const epochs = options.epochs ?? 8;
  const rng = new Lcg(options.seed ?? 2024);

  const images: number[] = [];
  const labels: number[] = [];
  for (let i = 0; i < samples; i++) {
    const label = i % 2;
    const scene = makeScene(INPUT_SIZE, label, rng);
    for (const v of scene.image.pixels) {
      images.push(v / 255.0);
    }
    labels.push(label);
  }
  const xs = tf.tensor4d(images, [samples, INPUT_SIZE, INPUT_SIZE, 3]);
  const ys = tf.oneHot(tf.tensor1d(labels, 'int32'), 2);

  const model = buildProxyModel();
  model.compile({
    optimizer: tf.train.adam(0.002),
    loss: 'categoricalCrossentropy',
    metrics: ['accuracy'],
  });
  const history = await model.fit(xs, ys, {
    epochs,
    batchSize: 32,
    shuffle: true,
    verbose: 0,
  });
  const acc = history.history['acc'] ?? history.history['accuracy'];
  const finalAcc = Number(acc[acc.length - 1]);
  xs.dispose();
  ys.dispose();
  if (finalAcc < 0.95) {
    throw new Error(`proxy failed to learn the synthetic task (accuracy ${finalAcc})`);
  }
  return model;
}

export async function trainAndSave(outPath: string, options: TrainOptions = {}): Promise<void> {
  const model = await trainProxy(options);
  saveWeights(model, outPath);
}

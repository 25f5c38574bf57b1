/**
 * Small squeeze-style convnet with a CAM-compatible head: convolutional
 * feature extractor, global average pooling, then a single dense layer, so
 * class evidence can be mapped back onto the final feature maps.
 *
 * Weights ship as plain JSON so the checkpoint is portable and inspectable;
 * `trainProxy` (see train.ts) regenerates it from synthetic scenes.
 */

import * as tf from '@tensorflow/tfjs';
import * as fs from 'fs';

export const INPUT_SIZE = 32;
export const CLASS_NAMES = ['object', 'texture'];
export const FEATURE_LAYER = 'features';

export function buildProxyModel(): tf.LayersModel {
  const input = tf.input({ shape: [INPUT_SIZE, INPUT_SIZE, 3] });
  let x = tf.layers
    .conv2d({ filters: 8, kernelSize: 3, padding: 'same', activation: 'relu', name: 'conv1' })
    .apply(input) as tf.SymbolicTensor;
  x = tf.layers.maxPooling2d({ poolSize: 2, name: 'pool1' }).apply(x) as tf.SymbolicTensor;
  x = tf.layers
    .conv2d({ filters: 12, kernelSize: 3, padding: 'same', activation: 'relu', name: 'conv2' })
    .apply(x) as tf.SymbolicTensor;
  x = tf.layers
    .conv2d({
      filters: 16,
      kernelSize: 3,
      padding: 'same',
      activation: 'relu',
      name: FEATURE_LAYER,
    })
    .apply(x) as tf.SymbolicTensor;
  const pooled = tf.layers
    .globalAveragePooling2d({ name: 'gap' })
    .apply(x) as tf.SymbolicTensor;
  const probs = tf.layers
    .dense({ units: CLASS_NAMES.length, name: 'head', useBias: true, activation: 'softmax' })
    .apply(pooled) as tf.SymbolicTensor;
  return tf.model({ inputs: input, outputs: probs });
}

interface WeightRecord {
  name: string;
  shape: number[];
  values: number[];
}

export function saveWeights(model: tf.LayersModel, path: string): void {
  const records: WeightRecord[] = model.getWeights().map((w, i) => ({
    name: model.weights[i].originalName,
    shape: w.shape.slice(),
    values: Array.from(w.dataSync()),
  }));
  fs.writeFileSync(path, JSON.stringify({ inputSize: INPUT_SIZE, weights: records }));
}

export function loadWeights(model: tf.LayersModel, path: string): void {
  let parsed: { weights: WeightRecord[] };
  try {
    parsed = JSON.parse(fs.readFileSync(path, 'utf-8'));
  } catch (err) {
    throw new Error(`cannot load model weights from ${path}: ${err}`);
  }
  const tensors = parsed.weights.map((r) => tf.tensor(r.values, r.shape as never));
  model.setWeights(tensors);
  tensors.forEach((t) => t.dispose());
}

export function loadProxyModel(weightsPath: string): tf.LayersModel {
  const model = buildProxyModel();
  loadWeights(model, weightsPath);
  return model;
}

/** Pixels (0..255, row-major RGB) to the model's normalized input tensor. */
export function preprocess(
  pixels: Uint8Array,
  height: number,
  width: number,
): tf.Tensor4D {
  return tf.tidy(() => {
    const img = tf
      .tensor3d(Array.from(pixels), [height, width, 3], 'float32')
      .div(255.0) as tf.Tensor3D;
    const resized =
      height === INPUT_SIZE && width === INPUT_SIZE
        ? img
        : tf.image.resizeBilinear(img, [INPUT_SIZE, INPUT_SIZE]);
    return resized.expandDims(0) as tf.Tensor4D;
  });
}

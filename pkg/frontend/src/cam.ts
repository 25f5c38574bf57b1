/**
 * Class activation mapping against the proxy model.
 *
 * The map is the head-weighted sum of the final convolutional feature maps
 * for the top-1 class, upsampled to the requested resolution and min-max
 * scaled to 0..255.
 */

import * as tf from '@tensorflow/tfjs';
import * as fs from 'fs';
import { readPng, writePgm } from './images';
import { CLASS_NAMES, FEATURE_LAYER, loadProxyModel, preprocess } from './model';

export interface CamRequest {
  imagePath: string;
  weightsPath: string;
  outPath: string;
  /** Output mask resolution; defaults to the source image's. */
  height?: number;
  width?: number;
  variant?: 'cam';
}

export interface CamResult {
  topClass: number;
  topClassName: string;
  confidence: number;
  height: number;
  width: number;
  /** Row-major 0..255 salience, length height*width. */
  map: Uint8Array;
}

export function computeCam(request: CamRequest): CamResult {
  const variant = request.variant ?? 'cam';
  if (variant !== 'cam') {
    throw new Error(`unknown CAM variant ${variant}`);
  }
  if (!fs.existsSync(request.imagePath)) {
    throw new Error(`image not found: ${request.imagePath}`);
  }
  const image = readPng(request.imagePath);
  const outHeight = request.height ?? image.height;
  const outWidth = request.width ?? image.width;
  const model = loadProxyModel(request.weightsPath);
  const features = tf.model({
    inputs: model.inputs,
    outputs: [model.getLayer(FEATURE_LAYER).output as tf.SymbolicTensor, model.outputs[0]],
  });

  const { topClass, confidence, map } = tf.tidy(() => {
    const input = preprocess(image.pixels, image.height, image.width);
    const [maps, probs] = features.predict(input) as [tf.Tensor4D, tf.Tensor2D];
    const top = probs.argMax(-1).dataSync()[0];
    const headWeights = model.getLayer('head').getWeights()[0] as tf.Tensor2D; // (F, classes)
    const classWeights = headWeights.slice([0, top], [-1, 1]).reshape([-1]); // (F,)
    const weighted = maps
      .squeeze([0])
      .mul(classWeights.reshape([1, 1, -1]))
      .sum(-1) as tf.Tensor2D;
    const upsampled = tf.image
      .resizeBilinear(weighted.expandDims(-1) as tf.Tensor3D, [outHeight, outWidth])
      .squeeze([2]) as tf.Tensor2D;
    const lo = upsampled.min();
    const span = upsampled.max().sub(lo);
    const spanValue = span.dataSync()[0];
    const scaled =
      spanValue > 0
        ? upsampled.sub(lo).div(span).mul(255)
        : tf.zerosLike(upsampled);
    return {
      topClass: top,
      confidence: probs.dataSync()[top],
      map: Uint8Array.from(scaled.round().dataSync()),
    };
  });

  writePgm(map, outHeight, outWidth, request.outPath);
  return {
    topClass,
    topClassName: CLASS_NAMES[topClass] ?? String(topClass),
    confidence,
    height: outHeight,
    width: outWidth,
    map,
  };
}

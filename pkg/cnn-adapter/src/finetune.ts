import * as tf from '@tensorflow/tfjs';
import { join } from 'path';
import { Image, readImage } from './image';
import { regionToInput } from './score';
import { SCORE_WIDTH, SampledRegion } from './wire';

export interface TrainOptions {
  epochs?: number;
  batchSize?: number;
  learningRate?: number;
  log?: (line: string) => void;
}

export interface TrainResult {
  loss: number[]; // per epoch
  accuracy: number; // on the training set, after the last epoch
}

/** Decode and stack labeled regions into training tensors. */
export function regionsToTensors(
  regions: SampledRegion[],
  imageRoot: string,
  cropSize: number,
): { xs: tf.Tensor4D; ys: tf.Tensor2D } {
  if (regions.length === 0) throw new Error('no training regions');
  const labels = new Set(regions.map(r => r.label));
  if (labels.size < 2) {
    throw new Error(`need regions from at least 2 classes, got ${labels.size}`);
  }
  const flat = new Float32Array(regions.length * cropSize * cropSize * 3);
  const oneHot = new Float32Array(regions.length * SCORE_WIDTH);
  let currentId: string | null = null;
  let currentImage: Image | null = null;
  regions.forEach((region, i) => {
    if (region.imageId !== currentId) {
      currentId = region.imageId;
      currentImage = readImage(join(imageRoot, region.imageId));
    }
    flat.set(regionToInput(currentImage!, region.box, cropSize), i * cropSize * cropSize * 3);
    oneHot[i * SCORE_WIDTH + region.label] = 1;
  });
  return {
    xs: tf.tensor4d(flat, [regions.length, cropSize, cropSize, 3]),
    ys: tf.tensor2d(oneHot, [regions.length, SCORE_WIDTH]),
  };
}

/**
 * Train the softmax head on frozen backbone features. Deterministic for a
 * fixed model seed and region order (no shuffling).
 */
export async function finetuneHead(
  model: tf.LayersModel,
  xs: tf.Tensor4D,
  ys: tf.Tensor2D,
  options: TrainOptions = {},
): Promise<TrainResult> {
  const epochs = options.epochs ?? 30;
  const log = options.log ?? (() => undefined);
  model.compile({
    optimizer: tf.train.adam(options.learningRate ?? 0.01),
    loss: 'categoricalCrossentropy',
    metrics: ['accuracy'],
  });
  const loss: number[] = [];
  await model.fit(xs, ys, {
    epochs,
    batchSize: options.batchSize ?? 64,
    shuffle: false,
    verbose: 0,
    callbacks: {
      onEpochEnd: async (epoch, logs) => {
        const value = logs?.loss ?? NaN;
        loss.push(value);
        log(`epoch ${epoch + 1}/${epochs}: loss=${value.toFixed(6)} acc=${(logs?.acc ?? NaN).toFixed(4)}`);
      },
    },
  });
  const [, accTensor] = model.evaluate(xs, ys) as tf.Scalar[];
  const accuracy = (await accTensor.data())[0];
  return { loss, accuracy };
}

import * as tf from '@tensorflow/tfjs';
import { join } from 'path';
import { Box, Image, crop, readImage, resizeNearest } from './image';
import { ProposalLine, SCORE_WIDTH, ScoreLine, writeScores } from './wire';

export interface ScoreOptions {
  imageRoot: string;
  cropSize: number;
  batchSize?: number;
}

/** Crop, resize, and scale a region to the [0,1] tensor the model expects. */
export function regionToInput(img: Image, box: Box, cropSize: number): Float32Array {
  const patch = resizeNearest(crop(img, box), cropSize, cropSize);
  const values = new Float32Array(patch.data.length);
  for (let i = 0; i < patch.data.length; i++) values[i] = patch.data[i] / 255;
  return values;
}

function predictBatch(
  model: tf.LayersModel,
  inputs: Float32Array[],
  cropSize: number,
): number[][] {
  return tf.tidy(() => {
    const flat = new Float32Array(inputs.length * cropSize * cropSize * 3);
    inputs.forEach((input, i) => flat.set(input, i * input.length));
    const x = tf.tensor4d(flat, [inputs.length, cropSize, cropSize, 3]);
    const y = model.predict(x) as tf.Tensor;
    return y.arraySync() as number[][];
  });
}

/**
 * Score every proposal with the model, preserving input order. Images are
 * decoded once per contiguous run of proposals (proposal files group lines
 * by image).
 */
export function scoreRegions(
  model: tf.LayersModel,
  proposals: ProposalLine[],
  options: ScoreOptions,
): ScoreLine[] {
  const batchSize = options.batchSize ?? 64;
  const out: ScoreLine[] = [];
  let currentId: string | null = null;
  let currentImage: Image | null = null;
  let pending: ProposalLine[] = [];
  let inputs: Float32Array[] = [];

  const flush = () => {
    if (pending.length === 0) return;
    const scores = predictBatch(model, inputs, options.cropSize);
    for (let i = 0; i < pending.length; i++) {
      if (scores[i].length !== SCORE_WIDTH) {
        throw new Error(`model emitted ${scores[i].length}-way scores`);
      }
      out.push({ imageId: pending[i].imageId, box: pending[i].box, scores: scores[i] });
    }
    pending = [];
    inputs = [];
  };

  for (const line of proposals) {
    if (line.imageId !== currentId) {
      currentId = line.imageId;
      currentImage = readImage(join(options.imageRoot, line.imageId));
    }
    pending.push(line);
    inputs.push(regionToInput(currentImage!, line.box, options.cropSize));
    if (pending.length >= batchSize) flush();
  }
  flush();
  return out;
}

export async function scoreProposalsToFile(
  model: tf.LayersModel,
  proposals: ProposalLine[],
  outPath: string,
  options: ScoreOptions,
): Promise<number> {
  return writeScores(outPath, scoreRegions(model, proposals, options));
}

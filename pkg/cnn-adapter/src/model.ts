import * as tf from '@tensorflow/tfjs';
import { mkdirSync, readFileSync, writeFileSync } from 'fs';
import { join } from 'path';
import { SCORE_WIDTH } from './wire';

export interface AdapterConfig {
  cropSize: number; // square crop side fed to the network
  seed: number; // weight-initialization seed
}

export const DEFAULT_CROP_SIZE = 16;
const HEAD_NAME = 'head';

/** Deterministic 32-bit PRNG so two builds from one seed are identical. */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function seedWeights(model: tf.LayersModel, seed: number): void {
  const rng = mulberry32(seed);
  for (const layer of model.layers) {
    const replaced = layer.getWeights().map(weight => {
      const shape = weight.shape;
      const size = shape.reduce((a, b) => a * b, 1);
      if (shape.length === 1) {
        return tf.zeros(shape); // biases
      }
      const fanIn = shape.slice(0, -1).reduce((a, b) => a * b, 1);
      const limit = Math.sqrt(6 / fanIn);
      const values = new Float32Array(size);
      for (let i = 0; i < size; i++) values[i] = (rng() * 2 - 1) * limit;
      return tf.tensor(values, shape);
    });
    if (replaced.length > 0) layer.setWeights(replaced);
  }
}

/**
 * A small convolutional classifier: a deterministic frozen backbone (seeded
 * random weights, never trained) and a trainable 33-way softmax head.
 */
export function buildModel(config: AdapterConfig): tf.LayersModel {
  if (config.cropSize < 12) throw new Error('cropSize must be at least 12');
  const model = tf.sequential({
    layers: [
      tf.layers.conv2d({
        inputShape: [config.cropSize, config.cropSize, 3],
        kernelSize: 3,
        filters: 8,
        activation: 'relu',
        name: 'backbone_conv1',
      }),
      tf.layers.maxPooling2d({ poolSize: 2, name: 'backbone_pool1' }),
      tf.layers.conv2d({
        kernelSize: 3,
        filters: 16,
        activation: 'relu',
        name: 'backbone_conv2',
      }),
      tf.layers.maxPooling2d({ poolSize: 2, name: 'backbone_pool2' }),
      tf.layers.flatten({ name: 'backbone_flatten' }),
      tf.layers.dense({ units: SCORE_WIDTH, activation: 'softmax', name: HEAD_NAME }),
    ],
  });
  seedWeights(model, config.seed);
  for (const layer of model.layers) {
    layer.trainable = layer.name === HEAD_NAME;
  }
  return model;
}

/**
 * Minimal file-backed IO for tf layers models: model.json (topology + weight
 * specs) and weights.bin next to it. The plain tfjs build has no file://
 * scheme in Node, so save/load go through this handler.
 */
function fileIO(dir: string, artifactsOut?: { current?: tf.io.ModelArtifacts }): tf.io.IOHandler {
  return {
    save: async (artifacts: tf.io.ModelArtifacts) => {
      mkdirSync(dir, { recursive: true });
      const weightData = artifacts.weightData as ArrayBuffer;
      writeFileSync(
        join(dir, 'model.json'),
        JSON.stringify({
          modelTopology: artifacts.modelTopology,
          weightSpecs: artifacts.weightSpecs,
        }),
      );
      writeFileSync(join(dir, 'weights.bin'), Buffer.from(weightData));
      return {
        modelArtifactsInfo: {
          dateSaved: new Date(),
          modelTopologyType: 'JSON',
        },
      };
    },
    load: async () => {
      const meta = JSON.parse(readFileSync(join(dir, 'model.json'), 'utf-8'));
      const bin = readFileSync(join(dir, 'weights.bin'));
      const weightData = bin.buffer.slice(bin.byteOffset, bin.byteOffset + bin.byteLength);
      const artifacts: tf.io.ModelArtifacts = {
        modelTopology: meta.modelTopology,
        weightSpecs: meta.weightSpecs,
        weightData,
      };
      if (artifactsOut) artifactsOut.current = artifacts;
      return artifacts;
    },
  };
}

export async function saveModel(
  model: tf.LayersModel,
  dir: string,
  config: AdapterConfig,
): Promise<void> {
  await model.save(fileIO(dir));
  writeFileSync(join(dir, 'adapter-config.json'), JSON.stringify(config) + '\n');
}

export async function loadModel(
  dir: string,
): Promise<{ model: tf.LayersModel; config: AdapterConfig }> {
  const config = JSON.parse(
    readFileSync(join(dir, 'adapter-config.json'), 'utf-8'),
  ) as AdapterConfig;
  const model = await tf.loadLayersModel(fileIO(dir));
  const head = model.layers[model.layers.length - 1];
  const units = (head.getConfig() as { units?: number }).units;
  if (units !== SCORE_WIDTH) {
    throw new Error(`model head must be ${SCORE_WIDTH}-way, got ${units}`);
  }
  for (const layer of model.layers) {
    layer.trainable = layer.name === HEAD_NAME;
  }
  return { model, config };
}

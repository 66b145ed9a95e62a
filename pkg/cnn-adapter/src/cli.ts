#!/usr/bin/env node
import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';
import { finetuneHead, regionsToTensors } from './finetune';
import { DEFAULT_CROP_SIZE, buildModel, loadModel, saveModel } from './model';
import { scoreProposalsToFile } from './score';
import { readProposals, readSampledRegions } from './wire';

async function runScore(argv: {
  proposals: string;
  images: string;
  model?: string;
  output: string;
  cropSize: number;
  seed: number;
  batchSize: number;
}): Promise<void> {
  const proposals = readProposals(argv.proposals);
  let model;
  let cropSize = argv.cropSize;
  if (argv.model) {
    const loaded = await loadModel(argv.model);
    model = loaded.model;
    cropSize = loaded.config.cropSize;
  } else {
    model = buildModel({ cropSize, seed: argv.seed });
  }
  const written = await scoreProposalsToFile(model, proposals, argv.output, {
    imageRoot: argv.images,
    cropSize,
    batchSize: argv.batchSize,
  });
  console.log(`wrote ${argv.output} (${written} regions)`);
}

async function runFinetune(argv: {
  regions: string;
  images: string;
  output: string;
  cropSize: number;
  seed: number;
  epochs: number;
  batchSize: number;
  learningRate: number;
}): Promise<void> {
  const regions = readSampledRegions(argv.regions);
  const model = buildModel({ cropSize: argv.cropSize, seed: argv.seed });
  const { xs, ys } = regionsToTensors(regions, argv.images, argv.cropSize);
  const result = await finetuneHead(model, xs, ys, {
    epochs: argv.epochs,
    batchSize: argv.batchSize,
    learningRate: argv.learningRate,
    log: line => console.log(line),
  });
  xs.dispose();
  ys.dispose();
  await saveModel(model, argv.output, { cropSize: argv.cropSize, seed: argv.seed });
  console.log(
    `wrote ${argv.output} (${regions.length} regions, final loss ${result.loss[result.loss.length - 1].toFixed(6)}, train accuracy ${result.accuracy.toFixed(4)})`,
  );
}

export async function main(argv: string[]): Promise<number> {
  try {
    await yargs(argv)
      .command(
        'score-proposals',
        'score a proposals JSONL file and write scores JSONL',
        y =>
          y
            .option('proposals', { type: 'string', demandOption: true })
            .option('images', { type: 'string', demandOption: true, describe: 'corpus root' })
            .option('model', { type: 'string', describe: 'saved model directory' })
            .option('output', { alias: 'o', type: 'string', demandOption: true })
            .option('crop-size', { type: 'number', default: DEFAULT_CROP_SIZE })
            .option('seed', { type: 'number', default: 0 })
            .option('batch-size', { type: 'number', default: 64 }),
        async a =>
          runScore({
            proposals: a.proposals,
            images: a.images,
            model: a.model,
            output: a.output,
            cropSize: a['crop-size'],
            seed: a.seed,
            batchSize: a['batch-size'],
          }),
      )
      .command(
        'finetune-head',
        'train the 33-way softmax head on labeled regions',
        y =>
          y
            .option('regions', { type: 'string', demandOption: true })
            .option('images', { type: 'string', demandOption: true, describe: 'corpus root' })
            .option('output', { alias: 'o', type: 'string', demandOption: true })
            .option('crop-size', { type: 'number', default: DEFAULT_CROP_SIZE })
            .option('seed', { type: 'number', default: 0 })
            .option('epochs', { type: 'number', default: 30 })
            .option('batch-size', { type: 'number', default: 64 })
            .option('learning-rate', { type: 'number', default: 0.01 }),
        async a =>
          runFinetune({
            regions: a.regions,
            images: a.images,
            output: a.output,
            cropSize: a['crop-size'],
            seed: a.seed,
            epochs: a.epochs,
            batchSize: a['batch-size'],
            learningRate: a['learning-rate'],
          }),
      )
      .demandCommand(1)
      .strict()
      .fail((msg, err) => {
        throw err ?? new Error(msg);
      })
      .parseAsync();
    return 0;
  } catch (err) {
    console.error(err instanceof Error ? err.message : String(err));
    return 1;
  }
}

if (require.main === module) {
  main(hideBin(process.argv)).then(code => {
    process.exitCode = code;
  });
}

export { Box, Image, crop, decodePng, decodePpm, readImage, resizeNearest } from './image';
export {
  BACKGROUND,
  ProposalLine,
  SCORE_WIDTH,
  SampledRegion,
  ScoreLine,
  readProposals,
  readSampledRegions,
  writeScores,
} from './wire';
export { AdapterConfig, DEFAULT_CROP_SIZE, buildModel, loadModel, mulberry32, saveModel } from './model';
export { ScoreOptions, regionToInput, scoreProposalsToFile, scoreRegions } from './score';
export { TrainOptions, TrainResult, finetuneHead, regionsToTensors } from './finetune';

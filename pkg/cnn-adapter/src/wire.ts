import { createWriteStream, readFileSync } from 'fs';
import { Box } from './image';

/** Width of every score vector: 32 classes then background at index 32. */
export const SCORE_WIDTH = 33;
export const BACKGROUND = 32;

export interface ProposalLine {
  imageId: string;
  box: Box;
}

export interface ScoreLine {
  imageId: string;
  box: Box;
  scores: number[];
}

export interface SampledRegion {
  imageId: string;
  box: Box;
  label: number; // class index, or 32 for background
}

function parseBox(value: unknown, where: string): Box {
  if (
    !Array.isArray(value) ||
    value.length !== 4 ||
    value.some(v => typeof v !== 'number' || !Number.isInteger(v))
  ) {
    throw new Error(`${where}: box must be 4 integers`);
  }
  const [x0, y0, x1, y1] = value as number[];
  if (x1 <= x0 || y1 <= y0) throw new Error(`${where}: empty box [${value}]`);
  return [x0, y0, x1, y1];
}

function jsonLines(path: string): Array<{ row: any; where: string }> {
  const out: Array<{ row: any; where: string }> = [];
  const lines = readFileSync(path, 'utf-8').split('\n');
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (line === '') continue;
    const where = `${path}:${i + 1}`;
    let row: any;
    try {
      row = JSON.parse(line);
    } catch {
      throw new Error(`${where}: invalid JSON`);
    }
    out.push({ row, where });
  }
  return out;
}

/**
 * Read a proposals JSONL file, preserving line order. Each line carries
 * {image_id, mode, box}; mode must be consistent within an image.
 */
export function readProposals(path: string): ProposalLine[] {
  const order: ProposalLine[] = [];
  const modes = new Map<string, string>();
  for (const { row, where } of jsonLines(path)) {
    if (typeof row.image_id !== 'string' || row.image_id === '') {
      throw new Error(`${where}: missing image_id`);
    }
    if (row.mode !== 'fast' && row.mode !== 'quality') {
      throw new Error(`${where}: mode must be "fast" or "quality"`);
    }
    const seen = modes.get(row.image_id);
    if (seen !== undefined && seen !== row.mode) {
      throw new Error(`${where}: image ${row.image_id} mixes modes`);
    }
    modes.set(row.image_id, row.mode);
    order.push({ imageId: row.image_id, box: parseBox(row.box, where) });
  }
  return order;
}

export function readSampledRegions(path: string): SampledRegion[] {
  const out: SampledRegion[] = [];
  for (const { row, where } of jsonLines(path)) {
    if (typeof row.image_id !== 'string' || row.image_id === '') {
      throw new Error(`${where}: missing image_id`);
    }
    if (!Number.isInteger(row.label) || row.label < 0 || row.label >= SCORE_WIDTH) {
      throw new Error(`${where}: label must be an integer in [0, ${SCORE_WIDTH})`);
    }
    out.push({ imageId: row.image_id, box: parseBox(row.box, where), label: row.label });
  }
  return out;
}

/** Write score lines in the pipeline wire format, preserving input order. */
export async function writeScores(path: string, rows: Iterable<ScoreLine>): Promise<number> {
  const stream = createWriteStream(path, { encoding: 'utf-8' });
  let count = 0;
  for (const row of rows) {
    if (row.scores.length !== SCORE_WIDTH) {
      throw new Error(`score vector must have ${SCORE_WIDTH} entries, got ${row.scores.length}`);
    }
    stream.write(
      JSON.stringify({ image_id: row.imageId, box: row.box, scores: row.scores }) + '\n',
    );
    count++;
  }
  await new Promise<void>((resolve, reject) => {
    stream.end(() => resolve());
    stream.on('error', reject);
  });
  return count;
}

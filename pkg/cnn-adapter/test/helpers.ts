import { execFileSync } from 'child_process';
import { mkdtempSync } from 'fs';
import { tmpdir } from 'os';
import { join } from 'path';

/** Run an inline python3 script with argv; returns stdout, throws on nonzero exit. */
export function pythonC(code: string, args: string[] = []): string {
  return execFileSync('python3', ['-c', code, ...args], { encoding: 'utf-8' });
}

/** Run a detection-pipeline CLI subcommand; returns stdout, throws on nonzero exit. */
export function logodet(args: string[]): string {
  return execFileSync('python3', ['-m', 'logodet.cli', ...args], { encoding: 'utf-8' });
}

export function tempDir(prefix: string): string {
  return mkdtempSync(join(tmpdir(), prefix));
}

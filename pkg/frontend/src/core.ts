/** Process-boundary transport to the core CLI.
 *
 * Every binding is a pure function: inputs are written to a fresh
 * temporary directory, one CLI invocation runs, outputs are read back
 * and the directory is removed. No state is shared between calls, so
 * concurrent use from multiple host threads is safe.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export class CoreInputError extends Error {}
export class CoreInternalError extends Error {}

const CLI = process.env.TEXTPERC_CLI ?? "textperc";

export function runCore(args: string[]): string {
  const res = spawnSync(CLI, args, { encoding: "utf-8", maxBuffer: 256 * 1024 * 1024 });
  if (res.error) {
    throw new CoreInternalError(`failed to launch core CLI '${CLI}': ${res.error.message}`);
  }
  if (res.status === 0) return res.stdout;
  const message = (res.stderr || res.stdout || "").trim();
  if (res.status === 1) throw new CoreInputError(message);
  throw new CoreInternalError(message || `core exited with status ${res.status}`);
}

export function withWorkdir<T>(fn: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), "textperc-"));
  try {
    return fn(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

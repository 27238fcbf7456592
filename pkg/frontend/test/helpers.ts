// Shared test setup: train a small classifier once via the python CLI and
// cache the model file for the whole vitest run.

import { execFile } from "node:child_process";
import { existsSync } from "node:fs";
import { mkdir } from "node:fs/promises";
import path from "node:path";
import { fileURLToPath } from "node:url";
import { promisify } from "node:util";

const execFileAsync = promisify(execFile);

export const CLI = process.env.DUALVOICE_CLI ?? "dualvoice";

const here = path.dirname(fileURLToPath(import.meta.url));
const cacheDir = path.join(here, "..", ".cache");

export const REPO_ROOT = path.join(here, "..", "..");

export async function ensureModel(): Promise<string> {
  const modelPath = path.join(cacheDir, "model.dvm");
  if (existsSync(modelPath)) {
    return modelPath;
  }
  await mkdir(cacheDir, { recursive: true });
  const corpusDir = path.join(cacheDir, "corpus");
  await execFileAsync(CLI, [
    "gen-corpus",
    "--n",
    "20",
    "--seed",
    "5",
    "--out",
    corpusDir,
  ]);
  await execFileAsync(CLI, [
    "train",
    "--corpus",
    corpusDir,
    "--frontend",
    "mfcc",
    "--out",
    modelPath,
  ]);
  return modelPath;
}

export async function runScriptedSession(
  modelPath: string,
  scriptPath: string,
  eventsPath: string,
): Promise<string> {
  const { stdout } = await execFileAsync(CLI, [
    "session",
    "run",
    scriptPath,
    "--model",
    modelPath,
    "--events",
    eventsPath,
    "--loose",
  ]);
  return stdout;
}

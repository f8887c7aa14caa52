import { spawnSync, SpawnSyncReturns } from "node:child_process";
import fs from "node:fs";
import os from "node:os";
import path from "node:path";

import tf from "@tensorflow/tfjs";

import { fileIOHandler } from "../src/io.js";

/** Deterministic 32-bit PRNG (mulberry32), uniform on [0, 1). */
export function mulberry32(seed: number): () => number {
  let s = seed >>> 0;
  return () => {
    s = (s + 0x6d2b79f5) | 0;
    let t = Math.imul(s ^ (s >>> 15), 1 | s);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** n samples in [-scale, scale), pre-rounded to float32. */
export function seededValues(rng: () => number, n: number, scale = 0.5): number[] {
  return Array.from({ length: n }, () => Math.fround((rng() * 2 - 1) * scale));
}

/** Replace every weight tensor of `model` with seeded float32 values. */
export function setSeededWeights(model: tf.LayersModel, seed: number, scale = 0.5): void {
  const rng = mulberry32(seed);
  const next = model.getWeights().map((w) => {
    const size = w.shape.reduce((a, b) => a * (b as number), 1);
    return tf.tensor(seededValues(rng, size, scale), w.shape as number[]);
  });
  model.setWeights(next);
}

/** Random batch of shape (count, timesteps, features), values float32 in [0, 1). */
export function randomInputs(
  seed: number,
  count: number,
  timesteps: number,
  features: number,
): number[][][] {
  const rng = mulberry32(seed);
  return Array.from({ length: count }, () =>
    Array.from({ length: timesteps }, () =>
      Array.from({ length: features }, () => Math.fround(rng())),
    ),
  );
}

export function tempDir(prefix: string): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), `${prefix}-`));
}

export async function saveModel(model: tf.LayersModel, dir: string): Promise<string> {
  const modelJson = path.join(dir, "model.json");
  await model.save(fileIOHandler(modelJson));
  return modelJson;
}

/** Walk upwards to the repository root (the directory holding src/lstmcov). */
export function repoRoot(): string {
  let dir = process.cwd();
  for (let i = 0; i < 6; i++) {
    if (fs.existsSync(path.join(dir, "src", "lstmcov", "cli.py"))) {
      return dir;
    }
    dir = path.dirname(dir);
  }
  throw new Error("repository root with src/lstmcov not found; run tests from exporter/");
}

const PY_ENV = () => ({
  ...process.env,
  PYTHONPATH: path.join(repoRoot(), "src"),
});

/** Run the Python toolkit CLI (`python3 -m lstmcov.cli ...`). */
export function runPythonCli(args: string[]): SpawnSyncReturns<string> {
  return spawnSync("python3", ["-m", "lstmcov.cli", ...args], {
    encoding: "utf-8",
    env: PY_ENV(),
  });
}

/** Run an inline Python snippet with warnings escalated to errors. */
export function runPythonStrict(code: string, args: string[] = []): SpawnSyncReturns<string> {
  return spawnSync("python3", ["-W", "error", "-c", code, ...args], {
    encoding: "utf-8",
    env: PY_ENV(),
  });
}

/** Run the compiled exporter CLI. */
export function runExportCli(args: string[]): SpawnSyncReturns<string> {
  const cli = path.join(repoRoot(), "exporter", "dist", "cli.js");
  return spawnSync(process.execPath, [cli, ...args], { encoding: "utf-8" });
}

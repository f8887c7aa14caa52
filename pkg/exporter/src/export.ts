/**
 * Export orchestration: load a tfjs model from disk, convert it, and write
 * the weight file plus a manifest describing the translation.
 */

import { createHash } from "node:crypto";
import { promises as fs } from "node:fs";
import path from "node:path";

import tf from "@tensorflow/tfjs";

import { convertModel, LayerDoc } from "./convert.js";
import { fileIOHandler } from "./io.js";

/** Record of one export run, written beside the destination file. */
export interface ExportManifest {
  source: string;
  emitted: string;
  head_input: string;
  notes: string[];
  layers: {
    name: string;
    type: "lstm" | "dense";
    note: string;
    sha256: string;
  }[];
}

export function manifestPath(destPath: string): string {
  return `${destPath}.manifest.json`;
}

/** Checksum of one emitted layer: sha256 over its JSON serialization. */
function layerChecksum(layer: LayerDoc): string {
  return createHash("sha256").update(JSON.stringify(layer), "utf-8").digest("hex");
}

async function resolveSource(sourcePath: string): Promise<string> {
  const stat = await fs.stat(sourcePath);
  return stat.isDirectory() ? path.join(sourcePath, "model.json") : sourcePath;
}

/**
 * Convert the tfjs model at `sourcePath` (a model.json file or a directory
 * holding one) into a weight file at `destPath`, writing the manifest to
 * `destPath + ".manifest.json"`.  Returns the manifest.
 */
export async function exportModel(
  sourcePath: string,
  destPath: string,
): Promise<ExportManifest> {
  const modelJson = await resolveSource(sourcePath);
  const model = await tf.loadLayersModel(fileIOHandler(modelJson));
  try {
    const { doc, mappings, notes } = await convertModel(model);
    const manifest: ExportManifest = {
      source: modelJson,
      emitted: destPath,
      head_input: doc.head_input,
      notes,
      layers: mappings.map((m, idx) => ({
        ...m,
        sha256: layerChecksum(doc.layers[idx]),
      })),
    };
    const destDir = path.dirname(destPath);
    if (destDir) {
      await fs.mkdir(destDir, { recursive: true });
    }
    await fs.writeFile(destPath, JSON.stringify(doc));
    await fs.writeFile(manifestPath(destPath), JSON.stringify(manifest, null, 2) + "\n");
    return manifest;
  } finally {
    model.dispose();
  }
}

/**
 * File-backed IOHandler for TensorFlow.js model artifacts.
 *
 * The browser build of tfjs ships no `file://` scheme, so loading a model
 * from disk in Node needs a small custom handler.  The on-disk layout is the
 * standard tfjs one: a `model.json` holding the topology plus a weights
 * manifest, and binary shard files next to it.
 */

import { promises as fs } from "node:fs";
import path from "node:path";

import tf from "@tensorflow/tfjs";

type WeightsGroup = {
  paths: string[];
  weights: tf.io.WeightsManifestEntry[];
};

/** Concatenate ArrayBuffers into one (tfjs may hand back a list). */
function joinBuffers(data: ArrayBuffer | ArrayBuffer[]): ArrayBuffer {
  if (!Array.isArray(data)) {
    return data;
  }
  const total = data.reduce((n, b) => n + b.byteLength, 0);
  const out = new Uint8Array(total);
  let offset = 0;
  for (const buf of data) {
    out.set(new Uint8Array(buf), offset);
    offset += buf.byteLength;
  }
  return out.buffer;
}

/**
 * IOHandler that reads and writes tfjs model artifacts under `modelJsonPath`.
 *
 * `load` resolves weight shards relative to the model.json directory and
 * concatenates them in manifest order.  `save` always emits a single
 * `weights.bin` shard.
 */
export function fileIOHandler(modelJsonPath: string): tf.io.IOHandler {
  const dir = path.dirname(modelJsonPath);

  return {
    async load(): Promise<tf.io.ModelArtifacts> {
      const text = await fs.readFile(modelJsonPath, "utf-8");
      const doc = JSON.parse(text);
      if (typeof doc !== "object" || doc === null || !doc.modelTopology) {
        throw new Error(`${modelJsonPath}: not a tfjs model.json (no modelTopology)`);
      }
      const groups: WeightsGroup[] = doc.weightsManifest ?? [];
      const specs: tf.io.WeightsManifestEntry[] = [];
      const shards: ArrayBuffer[] = [];
      for (const group of groups) {
        specs.push(...group.weights);
        for (const rel of group.paths) {
          const bytes = await fs.readFile(path.join(dir, rel));
          shards.push(
            bytes.buffer.slice(bytes.byteOffset, bytes.byteOffset + bytes.byteLength),
          );
        }
      }
      return {
        modelTopology: doc.modelTopology,
        format: doc.format,
        generatedBy: doc.generatedBy,
        convertedBy: doc.convertedBy,
        weightSpecs: specs,
        weightData: joinBuffers(shards),
      };
    },

    async save(artifacts: tf.io.ModelArtifacts): Promise<tf.io.SaveResult> {
      const binName = "weights.bin";
      const doc = {
        modelTopology: artifacts.modelTopology,
        format: artifacts.format ?? "layers-model",
        generatedBy: artifacts.generatedBy,
        convertedBy: artifacts.convertedBy ?? null,
        weightsManifest: [
          { paths: [binName], weights: artifacts.weightSpecs ?? [] },
        ],
      };
      await fs.mkdir(dir, { recursive: true });
      await fs.writeFile(modelJsonPath, JSON.stringify(doc));
      const data = joinBuffers(artifacts.weightData ?? new ArrayBuffer(0));
      await fs.writeFile(path.join(dir, binName), Buffer.from(data));
      return {
        modelArtifactsInfo: {
          dateSaved: new Date(),
          modelTopologyType: "JSON",
        },
      };
    },
  };
}

/**
 * Conversion from a TensorFlow.js layers model to the lstmcov weight format.
 *
 * The target format stores each LSTM gate as an explicit matrix of shape
 * (units, units + input_dim) whose columns act on the concatenation
 * [h_{t-1} | x_t].  tfjs (following Keras) instead stores two fused kernels,
 * `kernel` of shape (input_dim, 4*units) and `recurrentKernel` of shape
 * (units, 4*units), with the gates packed in the order [i | f | c | o].
 * Conversion therefore slices each fused kernel into its four gate blocks,
 * transposes them, and pastes the recurrent part left of the input part.
 */

import tf from "@tensorflow/tfjs";

export class UnsupportedModelError extends Error {}

export interface LstmLayerDoc {
  type: "lstm";
  units: number;
  W_f: number[][];
  W_i: number[][];
  W_c: number[][];
  W_o: number[][];
  b_f: number[];
  b_i: number[];
  b_c: number[];
  b_o: number[];
}

export interface DenseLayerDoc {
  type: "dense";
  activation: "relu" | "softmax" | "identity";
  W: number[][];
  b: number[];
}

export type LayerDoc = LstmLayerDoc | DenseLayerDoc;

/** The lstmcov weight-file document (serialized as JSON). */
export interface WeightFileDoc {
  input_shape: [number, number];
  class_count: number;
  head_input: "last" | "flatten";
  layers: LayerDoc[];
}

/** How one source layer was translated, for the export manifest. */
export interface LayerMapping {
  name: string;
  type: "lstm" | "dense";
  note: string;
}

export interface ConversionResult {
  doc: WeightFileDoc;
  mappings: LayerMapping[];
  notes: string[];
}

// Gate offsets into the fused 4*units axis, in tfjs/Keras order.
const GATE_SLOT = { i: 0, f: 1, c: 2, o: 3 } as const;

const DENSE_ACTIVATIONS: Record<string, DenseLayerDoc["activation"]> = {
  relu: "relu",
  softmax: "softmax",
  linear: "identity",
};

/** Activation identifiers appear as strings or serialized {className} objects. */
function activationName(value: unknown): string {
  if (typeof value === "string") {
    return value.replace(/_/g, "").toLowerCase();
  }
  if (typeof value === "object" && value !== null && "className" in value) {
    return String((value as { className: unknown }).className)
      .replace(/_/g, "")
      .toLowerCase();
  }
  return String(value);
}

function toMatrix(data: Float32Array | Int32Array | Uint8Array, rows: number, cols: number): number[][] {
  const out: number[][] = [];
  for (let r = 0; r < rows; r++) {
    const row = new Array<number>(cols);
    for (let c = 0; c < cols; c++) {
      row[c] = data[r * cols + c];
    }
    out.push(row);
  }
  return out;
}

async function lstmToDoc(layer: tf.layers.Layer): Promise<LstmLayerDoc> {
  const cfg = layer.getConfig() as Record<string, unknown>;
  const units = Number(cfg.units);
  const name = layer.name;

  if (activationName(cfg.activation) !== "tanh") {
    throw new UnsupportedModelError(
      `layer ${name}: activation must be tanh, got ${String(cfg.activation)}`,
    );
  }
  const recAct = activationName(cfg.recurrentActivation);
  if (recAct !== "sigmoid") {
    throw new UnsupportedModelError(
      `layer ${name}: recurrentActivation must be sigmoid, got ` +
        `${String(cfg.recurrentActivation)} (the tfjs default is hardSigmoid; ` +
        `build the layer with recurrentActivation: 'sigmoid')`,
    );
  }
  if (cfg.goBackwards) {
    throw new UnsupportedModelError(`layer ${name}: goBackwards is not supported`);
  }
  if (cfg.stateful) {
    throw new UnsupportedModelError(`layer ${name}: stateful layers are not supported`);
  }

  const weights = layer.getWeights();
  const kernel = weights[0]; // (input_dim, 4 * units)
  const recurrent = weights[1]; // (units, 4 * units)
  const inputDim = kernel.shape[0] as number;
  if (kernel.shape[1] !== 4 * units || recurrent.shape[0] !== units) {
    throw new UnsupportedModelError(
      `layer ${name}: unexpected kernel shapes ${JSON.stringify(kernel.shape)} / ` +
        `${JSON.stringify(recurrent.shape)} for ${units} units`,
    );
  }
  const k = (await kernel.data()) as Float32Array;
  const r = (await recurrent.data()) as Float32Array;
  const bias = weights.length > 2 ? ((await weights[2].data()) as Float32Array) : null;

  const fused = 4 * units;
  const gateMatrix = (slot: number): number[][] => {
    const off = slot * units;
    const rows: number[][] = [];
    for (let j = 0; j < units; j++) {
      const row = new Array<number>(units + inputDim);
      for (let p = 0; p < units; p++) {
        row[p] = r[p * fused + off + j];
      }
      for (let p = 0; p < inputDim; p++) {
        row[units + p] = k[p * fused + off + j];
      }
      rows.push(row);
    }
    return rows;
  };
  const gateBias = (slot: number): number[] => {
    const off = slot * units;
    const out = new Array<number>(units);
    for (let j = 0; j < units; j++) {
      out[j] = bias ? bias[off + j] : 0;
    }
    return out;
  };

  return {
    type: "lstm",
    units,
    W_f: gateMatrix(GATE_SLOT.f),
    W_i: gateMatrix(GATE_SLOT.i),
    W_c: gateMatrix(GATE_SLOT.c),
    W_o: gateMatrix(GATE_SLOT.o),
    b_f: gateBias(GATE_SLOT.f),
    b_i: gateBias(GATE_SLOT.i),
    b_c: gateBias(GATE_SLOT.c),
    b_o: gateBias(GATE_SLOT.o),
  };
}

async function denseToDoc(layer: tf.layers.Layer): Promise<DenseLayerDoc> {
  const cfg = layer.getConfig() as Record<string, unknown>;
  const name = layer.name;
  const act = activationName(cfg.activation);
  const mapped = DENSE_ACTIVATIONS[act];
  if (mapped === undefined) {
    throw new UnsupportedModelError(
      `layer ${name}: dense activation ${String(cfg.activation)} is not supported ` +
        `(expected relu, softmax or linear)`,
    );
  }
  const weights = layer.getWeights();
  const kernel = weights[0]; // (in, out)
  const [inDim, outDim] = kernel.shape as [number, number];
  const k = (await kernel.data()) as Float32Array;
  const bias = weights.length > 1 ? ((await weights[1].data()) as Float32Array) : null;

  // Transpose to the target's (out, in) row-major layout.
  const W: number[][] = [];
  for (let j = 0; j < outDim; j++) {
    const row = new Array<number>(inDim);
    for (let p = 0; p < inDim; p++) {
      row[p] = k[p * outDim + j];
    }
    W.push(row);
  }
  const b = new Array<number>(outDim);
  for (let j = 0; j < outDim; j++) {
    b[j] = bias ? bias[j] : 0;
  }
  return { type: "dense", activation: mapped, W, b };
}

/**
 * Translate a loaded tfjs model into the lstmcov weight-file document.
 *
 * Supported topology: one or more LSTM layers, then (only when the last LSTM
 * returns sequences) a single Flatten, then one or more Dense layers.  Any
 * other layer raises UnsupportedModelError naming the layer.
 */
export async function convertModel(model: tf.LayersModel): Promise<ConversionResult> {
  const inputShape = model.inputs[0].shape; // [batch, timesteps, features]
  if (inputShape.length !== 3 || inputShape[1] == null || inputShape[2] == null) {
    throw new UnsupportedModelError(
      `model input shape ${JSON.stringify(inputShape)} must be ` +
        `[batch, timesteps, features] with fixed timesteps and features`,
    );
  }
  const timesteps = inputShape[1] as number;
  const features = inputShape[2] as number;

  const layers = model.layers.filter((l) => l.getClassName() !== "InputLayer");
  for (const layer of layers) {
    const kind = layer.getClassName();
    if (kind !== "LSTM" && kind !== "Dense" && kind !== "Flatten") {
      throw new UnsupportedModelError(
        `unsupported layer type ${kind} (layer ${layer.name})`,
      );
    }
  }

  const lstms = layers.filter((l) => l.getClassName() === "LSTM");
  const denses = layers.filter((l) => l.getClassName() === "Dense");
  const flattens = layers.filter((l) => l.getClassName() === "Flatten");
  if (lstms.length === 0) {
    throw new UnsupportedModelError("model has no LSTM layer");
  }
  if (denses.length === 0) {
    throw new UnsupportedModelError("model has no dense head");
  }

  // Enforce the sequential order LSTM* [Flatten] Dense+.
  const expected = [...lstms, ...flattens, ...denses];
  for (let idx = 0; idx < layers.length; idx++) {
    if (layers[idx] !== expected[idx]) {
      throw new UnsupportedModelError(
        `layer ${layers[idx].name}: layers must run LSTM stack, then an ` +
          `optional Flatten, then the dense head`,
      );
    }
  }
  if (flattens.length > 1) {
    throw new UnsupportedModelError(
      `layer ${flattens[1].name}: at most one Flatten layer is supported`,
    );
  }

  const lastLstmCfg = lstms[lstms.length - 1].getConfig() as Record<string, unknown>;
  const returnsSequences = Boolean(lastLstmCfg.returnSequences);
  let head: "last" | "flatten";
  if (returnsSequences) {
    if (flattens.length !== 1) {
      throw new UnsupportedModelError(
        `layer ${lstms[lstms.length - 1].name}: returns a sequence, so a ` +
          `Flatten layer must precede the dense head`,
      );
    }
    head = "flatten";
  } else {
    if (flattens.length !== 0) {
      throw new UnsupportedModelError(
        `layer ${flattens[0].name}: Flatten after a last-step LSTM output ` +
          `is redundant and not supported`,
      );
    }
    head = "last";
  }

  const docLayers: LayerDoc[] = [];
  const mappings: LayerMapping[] = [];
  const notes: string[] = [];

  for (const layer of lstms) {
    const doc = await lstmToDoc(layer);
    const d = doc.W_f[0].length - doc.units;
    docLayers.push(doc);
    mappings.push({
      name: layer.name,
      type: "lstm",
      note:
        `fused kernel (${d}, ${4 * doc.units}) and recurrent kernel ` +
        `(${doc.units}, ${4 * doc.units}), gate order [i|f|c|o], split into ` +
        `four (${doc.units}, ${doc.units + d}) matrices with columns [h|x]`,
    });
  }
  if (flattens.length === 1) {
    notes.push(`${flattens[0].name}: folded into head_input='flatten'`);
  }
  for (const layer of denses) {
    const doc = await denseToDoc(layer);
    docLayers.push(doc);
    mappings.push({
      name: layer.name,
      type: "dense",
      note:
        `kernel (${doc.W[0].length}, ${doc.W.length}) transposed to ` +
        `(${doc.W.length}, ${doc.W[0].length}), activation ${doc.activation}`,
    });
  }

  const lastDense = docLayers[docLayers.length - 1] as DenseLayerDoc;
  return {
    doc: {
      input_shape: [timesteps, features],
      class_count: lastDense.W.length,
      head_input: head,
      layers: docLayers,
    },
    mappings,
    notes,
  };
}

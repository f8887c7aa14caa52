import { describe, expect, it } from "vitest";

import tf from "@tensorflow/tfjs";

import { convertModel, UnsupportedModelError } from "../src/convert.js";
import type { DenseLayerDoc, LstmLayerDoc } from "../src/convert.js";
import { setSeededWeights } from "./helpers.js";

type LstmArgs = Parameters<typeof tf.layers.lstm>[0];

function lstmDense(lstmOpts: Partial<LstmArgs> = {}): tf.Sequential {
  return tf.sequential({
    layers: [
      tf.layers.lstm({
        units: 2,
        recurrentActivation: "sigmoid",
        inputShape: [4, 3],
        ...lstmOpts,
      }),
      tf.layers.dense({ units: 2, activation: "softmax" }),
    ],
  });
}

describe("gate splitting", () => {
  // Fill the fused kernels with position-encoding integers (exact in float32)
  // so each entry of the split matrices identifies where it came from.
  it("maps the fused [i|f|c|o] kernels onto the four gate matrices", async () => {
    const units = 2;
    const d = 3;
    const K = Array.from({ length: d }, (_, r) =>
      Array.from({ length: 4 * units }, (_, c) => 1000 * r + c),
    );
    const R = Array.from({ length: units }, (_, r) =>
      Array.from({ length: 4 * units }, (_, c) => 500000 + 1000 * r + c),
    );
    const B = Array.from({ length: 4 * units }, (_, c) => 90000 + c);

    const model = lstmDense();
    const dense = model.layers[1].getWeights();
    model.setWeights([tf.tensor2d(K), tf.tensor2d(R), tf.tensor1d(B), ...dense]);

    const { doc } = await convertModel(model);
    const lstm = doc.layers[0] as LstmLayerDoc;

    const col = (M: number[][], c: number) => M.map((row) => row[c]);
    const expectGate = (W: number[][], b: number[], slot: number) => {
      for (let j = 0; j < units; j++) {
        expect(W[j]).toEqual([...col(R, slot * units + j), ...col(K, slot * units + j)]);
      }
      expect(b).toEqual(B.slice(slot * units, (slot + 1) * units));
    };
    expectGate(lstm.W_i, lstm.b_i, 0);
    expectGate(lstm.W_f, lstm.b_f, 1);
    expectGate(lstm.W_c, lstm.b_c, 2);
    expectGate(lstm.W_o, lstm.b_o, 3);

    expect(doc.input_shape).toEqual([4, 3]);
    expect(doc.class_count).toBe(2);
    expect(doc.head_input).toBe("last");
  });

  it("emits zero biases when the source layer has none", async () => {
    const model = tf.sequential({
      layers: [
        tf.layers.lstm({
          units: 2,
          recurrentActivation: "sigmoid",
          useBias: false,
          inputShape: [4, 3],
        }),
        tf.layers.dense({ units: 2, activation: "softmax", useBias: false }),
      ],
    });
    setSeededWeights(model, 5);
    const { doc } = await convertModel(model);
    const lstm = doc.layers[0] as LstmLayerDoc;
    const dense = doc.layers[1] as DenseLayerDoc;
    expect(lstm.b_f).toEqual([0, 0]);
    expect(lstm.b_i).toEqual([0, 0]);
    expect(lstm.b_c).toEqual([0, 0]);
    expect(lstm.b_o).toEqual([0, 0]);
    expect(dense.b).toEqual([0, 0]);
  });
});

describe("dense head", () => {
  it("transposes the (in, out) kernel to (out, in) rows", async () => {
    const model = tf.sequential({
      layers: [
        tf.layers.lstm({ units: 2, recurrentActivation: "sigmoid", inputShape: [4, 3] }),
        tf.layers.dense({ units: 3, activation: "linear" }),
      ],
    });
    const lstmWeights = model.layers[0].getWeights();
    const K = [
      [0, 1, 2],
      [10, 11, 12],
    ];
    model.setWeights([...lstmWeights, tf.tensor2d(K), tf.tensor1d([7, 8, 9])]);

    const { doc } = await convertModel(model);
    const dense = doc.layers[1] as DenseLayerDoc;
    expect(dense.W).toEqual([
      [0, 10],
      [1, 11],
      [2, 12],
    ]);
    expect(dense.b).toEqual([7, 8, 9]);
    expect(dense.activation).toBe("identity");
    expect(doc.class_count).toBe(3);
  });

  it("rejects dense activations outside relu/softmax/linear", async () => {
    const model = tf.sequential({
      layers: [
        tf.layers.lstm({ units: 2, recurrentActivation: "sigmoid", inputShape: [4, 3] }),
        tf.layers.dense({ units: 2, activation: "sigmoid" }),
      ],
    });
    await expect(convertModel(model)).rejects.toThrow(/dense activation/);
  });
});

describe("head selection", () => {
  it("uses head_input='last' when the final LSTM drops the sequence", async () => {
    const { doc } = await convertModel(lstmDense());
    expect(doc.head_input).toBe("last");
  });

  it("uses head_input='flatten' for returnSequences + Flatten", async () => {
    const model = tf.sequential({
      layers: [
        tf.layers.lstm({
          units: 2,
          recurrentActivation: "sigmoid",
          returnSequences: true,
          inputShape: [4, 3],
        }),
        tf.layers.flatten(),
        tf.layers.dense({ units: 2, activation: "softmax" }),
      ],
    });
    const { doc, notes } = await convertModel(model);
    expect(doc.head_input).toBe("flatten");
    expect(notes.join(" ")).toMatch(/flatten/);
  });

  it("rejects a sequence output with no Flatten before the head", async () => {
    const model = tf.sequential({
      layers: [
        tf.layers.lstm({
          units: 2,
          recurrentActivation: "sigmoid",
          returnSequences: true,
          inputShape: [4, 3],
        }),
        tf.layers.dense({ units: 2, activation: "softmax" }),
      ],
    });
    await expect(convertModel(model)).rejects.toThrow(/Flatten layer must precede/);
  });
});

describe("unsupported models", () => {
  it("names the offending layer for unsupported layer types", async () => {
    const model = tf.sequential({
      layers: [
        tf.layers.lstm({
          units: 2,
          recurrentActivation: "sigmoid",
          returnSequences: true,
          inputShape: [6, 3],
        }),
        tf.layers.conv1d({ filters: 2, kernelSize: 2 }),
        tf.layers.flatten(),
        tf.layers.dense({ units: 2, activation: "softmax" }),
      ],
    });
    const err = await convertModel(model).catch((e: unknown) => e);
    expect(err).toBeInstanceOf(UnsupportedModelError);
    expect((err as Error).message).toMatch(/unsupported layer type Conv1D/);
    expect((err as Error).message).toMatch(/conv1d/);
  });

  it("rejects the tfjs default hardSigmoid recurrent activation", async () => {
    const model = tf.sequential({
      layers: [
        tf.layers.lstm({ units: 2, inputShape: [4, 3] }),
        tf.layers.dense({ units: 2, activation: "softmax" }),
      ],
    });
    await expect(convertModel(model)).rejects.toThrow(/recurrentActivation must be sigmoid/);
  });

  it("rejects non-tanh cell activations", async () => {
    const model = lstmDense({ activation: "relu" });
    await expect(convertModel(model)).rejects.toThrow(/activation must be tanh/);
  });

  it("rejects goBackwards layers", async () => {
    const model = lstmDense({ goBackwards: true });
    await expect(convertModel(model)).rejects.toThrow(/goBackwards/);
  });

  it("rejects models with variable-length input sequences", async () => {
    const model = tf.sequential({
      layers: [
        tf.layers.lstm({
          units: 2,
          recurrentActivation: "sigmoid",
          inputShape: [null as unknown as number, 3],
        }),
        tf.layers.dense({ units: 2, activation: "softmax" }),
      ],
    });
    await expect(convertModel(model)).rejects.toThrow(/fixed timesteps/);
  });
});

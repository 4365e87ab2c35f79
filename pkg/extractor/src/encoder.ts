/**
 * ONNX-backed speech encoder. The model takes a float32 waveform tensor
 * [1, samples] at 16 kHz and returns frame-level features [1, T, D]
 * (or [T, D]). Models exporting several layers as separate outputs
 * support --layer selection; conventionally outputs are named
 * "hidden_states.<n>", otherwise the n-th output is taken.
 */

import * as ort from "onnxruntime-node";

export interface EncoderOptions {
  modelPath: string;
  layer?: number;
  device?: string;
}

export interface EncodedFeatures {
  frames: number;
  dim: number;
  data: Float32Array;
}

export class EncoderError extends Error {}

const PROVIDERS: Record<string, string[]> = {
  cpu: ["cpu"],
  cuda: ["cuda", "cpu"],
};

export class OnnxEncoder {
  private constructor(
    private readonly session: ort.InferenceSession,
    private readonly outputName: string,
  ) {}

  static async load(options: EncoderOptions): Promise<OnnxEncoder> {
    const device = options.device ?? "cpu";
    const providers = PROVIDERS[device];
    if (!providers) {
      throw new EncoderError(`unknown device "${device}" (expected cpu or cuda)`);
    }
    let session: ort.InferenceSession;
    try {
      session = await ort.InferenceSession.create(options.modelPath, {
        executionProviders: providers as ort.InferenceSession.SessionOptions["executionProviders"],
        // single-threaded so identical inputs give byte-identical outputs
        intraOpNumThreads: 1,
        interOpNumThreads: 1,
      });
    } catch (err) {
      throw new EncoderError(`cannot load model ${options.modelPath}: ${(err as Error).message}`);
    }
    if (session.inputNames.length !== 1) {
      throw new EncoderError(`model must have exactly 1 input, has ${session.inputNames.length}`);
    }
    return new OnnxEncoder(session, pickOutput(session.outputNames, options.layer));
  }

  async encode(samples: Float32Array): Promise<EncodedFeatures> {
    const input = new ort.Tensor("float32", samples, [1, samples.length]);
    let results: ort.InferenceSession.OnnxValueMapType;
    try {
      results = await this.session.run({ [this.session.inputNames[0]]: input });
    } catch (err) {
      throw new EncoderError(`inference failed: ${(err as Error).message}`);
    }
    const output = results[this.outputName];
    if (output.dims.length === 3 && output.dims[0] === 1) {
      return { frames: output.dims[1], dim: output.dims[2], data: output.data as Float32Array };
    }
    if (output.dims.length === 2) {
      return { frames: output.dims[0], dim: output.dims[1], data: output.data as Float32Array };
    }
    throw new EncoderError(`unexpected output shape [${output.dims.join(", ")}]`);
  }
}

export function pickOutput(outputNames: readonly string[], layer?: number): string {
  if (outputNames.length === 0) {
    throw new EncoderError("model has no outputs");
  }
  if (outputNames.length === 1) {
    return outputNames[0];
  }
  const wanted = layer ?? 6; // the matching layer conventionally used with WavLM-style encoders
  const named = outputNames.find((n) => n === `hidden_states.${wanted}` || n.endsWith(`.${wanted}`));
  if (named) {
    return named;
  }
  if (wanted >= 0 && wanted < outputNames.length) {
    return outputNames[wanted];
  }
  throw new EncoderError(
    `layer ${wanted} not found among outputs [${outputNames.join(", ")}]`,
  );
}

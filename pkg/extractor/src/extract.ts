/**
 * The extraction operation: WAV in, .ksvc features out, frame-aligned
 * to the engine's 20 ms grid (hop 320 @ 16 kHz).
 */

import { writeFileSync } from "fs";

import { OnnxEncoder, EncoderOptions } from "./encoder";
import { encodeKsvc, KIND_FEATURES } from "./ksvc";
import { readWav, resampleLinear } from "./wav";

export const ENGINE_SAMPLE_RATE = 16000;
export const ENGINE_HOP_SIZE = 320;

export interface ExtractOptions extends EncoderOptions {
  /** Called for non-fatal notices (resampling); defaults to stderr. */
  warn?: (message: string) => void;
}

export interface ExtractResult {
  frames: number;
  dim: number;
}

export async function extractSslFeatures(
  wavPath: string,
  outPath: string,
  options: ExtractOptions,
): Promise<ExtractResult> {
  const warn = options.warn ?? ((m: string) => process.stderr.write(`warning: ${m}\n`));

  let audio = readWav(wavPath);
  if (audio.sampleRate !== ENGINE_SAMPLE_RATE) {
    warn(`${wavPath}: resampling ${audio.sampleRate} Hz -> ${ENGINE_SAMPLE_RATE} Hz`);
    audio = resampleLinear(audio, ENGINE_SAMPLE_RATE);
  }

  const encoder = await OnnxEncoder.load(options);
  const { frames, dim, data } = await encoder.encode(audio.samples);
  if (frames < 1) {
    throw new Error(`${wavPath}: audio too short for the encoder (no frames)`);
  }

  // only written after successful inference: failures leave no file behind
  writeFileSync(
    outPath,
    encodeKsvc({
      kind: KIND_FEATURES,
      frames,
      dim,
      sampleRate: ENGINE_SAMPLE_RATE,
      hopSize: ENGINE_HOP_SIZE,
      data,
    }),
  );
  return { frames, dim };
}

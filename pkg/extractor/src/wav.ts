/**
 * Minimal WAV reader: 16/24/32-bit integer and 32/64-bit float PCM,
 * plain or WAVE_FORMAT_EXTENSIBLE headers. Multi-channel audio is
 * downmixed by averaging.
 */

import { readFileSync } from "fs";

export interface RawAudio {
  samples: Float32Array;
  sampleRate: number;
}

const FORMAT_PCM = 1;
const FORMAT_IEEE_FLOAT = 3;
const FORMAT_EXTENSIBLE = 0xfffe;

export class WavError extends Error {}

export function decodeWav(buf: Buffer): RawAudio {
  if (buf.length < 12 || buf.toString("ascii", 0, 4) !== "RIFF" || buf.toString("ascii", 8, 12) !== "WAVE") {
    throw new WavError("not a RIFF/WAVE file");
  }

  let formatTag = 0;
  let channels = 0;
  let sampleRate = 0;
  let bitsPerSample = 0;
  let dataOffset = -1;
  let dataLength = 0;

  let pos = 12;
  while (pos + 8 <= buf.length) {
    const chunkId = buf.toString("ascii", pos, pos + 4);
    const chunkSize = buf.readUInt32LE(pos + 4);
    const body = pos + 8;
    if (chunkId === "fmt ") {
      formatTag = buf.readUInt16LE(body);
      channels = buf.readUInt16LE(body + 2);
      sampleRate = buf.readUInt32LE(body + 4);
      bitsPerSample = buf.readUInt16LE(body + 14);
      if (formatTag === FORMAT_EXTENSIBLE && chunkSize >= 40) {
        formatTag = buf.readUInt16LE(body + 24); // first bytes of the SubFormat GUID
      }
    } else if (chunkId === "data") {
      dataOffset = body;
      dataLength = Math.min(chunkSize, buf.length - body);
    }
    pos = body + chunkSize + (chunkSize & 1);
  }

  if (dataOffset < 0 || channels < 1 || sampleRate < 1) {
    throw new WavError("missing fmt or data chunk");
  }

  const bytesPerSample = bitsPerSample / 8;
  const frameCount = Math.floor(dataLength / (bytesPerSample * channels));
  if (frameCount < 1) {
    throw new WavError("empty audio");
  }

  const read = sampleReader(buf, formatTag, bitsPerSample);
  const samples = new Float32Array(frameCount);
  for (let i = 0; i < frameCount; i++) {
    let acc = 0;
    for (let c = 0; c < channels; c++) {
      acc += read(dataOffset + (i * channels + c) * bytesPerSample);
    }
    samples[i] = acc / channels;
  }
  return { samples, sampleRate };
}

function sampleReader(buf: Buffer, formatTag: number, bits: number): (offset: number) => number {
  if (formatTag === FORMAT_PCM && bits === 16) {
    return (o) => buf.readInt16LE(o) / 32768;
  }
  if (formatTag === FORMAT_PCM && bits === 24) {
    return (o) => buf.readIntLE(o, 3) / 8388608;
  }
  if (formatTag === FORMAT_PCM && bits === 32) {
    return (o) => buf.readInt32LE(o) / 2147483648;
  }
  if (formatTag === FORMAT_IEEE_FLOAT && bits === 32) {
    return (o) => buf.readFloatLE(o);
  }
  if (formatTag === FORMAT_IEEE_FLOAT && bits === 64) {
    return (o) => buf.readDoubleLE(o);
  }
  throw new WavError(`unsupported WAV format (tag ${formatTag}, ${bits}-bit)`);
}

export function readWav(path: string): RawAudio {
  return decodeWav(readFileSync(path));
}

/** Linear-interpolation resampler; adequate for feature extraction. */
export function resampleLinear(audio: RawAudio, targetRate: number): RawAudio {
  if (targetRate === audio.sampleRate) {
    return audio;
  }
  const ratio = audio.sampleRate / targetRate;
  const outLength = Math.max(1, Math.round(audio.samples.length / ratio));
  const out = new Float32Array(outLength);
  const last = audio.samples.length - 1;
  for (let i = 0; i < outLength; i++) {
    const pos = Math.min(i * ratio, last);
    const i0 = Math.floor(pos);
    const frac = pos - i0;
    const a = audio.samples[i0];
    const b = audio.samples[Math.min(i0 + 1, last)];
    out[i] = a + frac * (b - a);
  }
  return { samples: out, sampleRate: targetRate };
}

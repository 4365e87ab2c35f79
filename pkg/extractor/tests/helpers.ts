import { writeFileSync } from "fs";

/** Build a mono/stereo WAV buffer for tests. */
export function makeWav(
  channels: Float32Array[],
  sampleRate: number,
  format: "pcm16" | "float32" = "float32",
): Buffer {
  const numChannels = channels.length;
  const frames = channels[0]?.length ?? 0;
  const bytesPer = format === "pcm16" ? 2 : 4;
  const dataSize = frames * numChannels * bytesPer;
  const buf = Buffer.alloc(44 + dataSize);

  buf.write("RIFF", 0, "ascii");
  buf.writeUInt32LE(36 + dataSize, 4);
  buf.write("WAVE", 8, "ascii");
  buf.write("fmt ", 12, "ascii");
  buf.writeUInt32LE(16, 16);
  buf.writeUInt16LE(format === "pcm16" ? 1 : 3, 20);
  buf.writeUInt16LE(numChannels, 22);
  buf.writeUInt32LE(sampleRate, 24);
  buf.writeUInt32LE(sampleRate * numChannels * bytesPer, 28);
  buf.writeUInt16LE(numChannels * bytesPer, 32);
  buf.writeUInt16LE(8 * bytesPer, 34);
  buf.write("data", 36, "ascii");
  buf.writeUInt32LE(dataSize, 40);

  let o = 44;
  for (let i = 0; i < frames; i++) {
    for (let c = 0; c < numChannels; c++) {
      const v = channels[c][i];
      if (format === "pcm16") {
        const q = Math.max(-32768, Math.min(32767, Math.round(v * 32768)));
        buf.writeInt16LE(q, o);
      } else {
        buf.writeFloatLE(v, o);
      }
      o += bytesPer;
    }
  }
  return buf;
}

export function writeWav(
  path: string,
  channels: Float32Array[],
  sampleRate: number,
  format: "pcm16" | "float32" = "float32",
): string {
  writeFileSync(path, makeWav(channels, sampleRate, format));
  return path;
}

/** The deterministic signal mirrored by tests/fixtures/make_fixture_model.py. */
export function fixtureSignal(n = 16000, freq = 220.0, rate = 16000): Float32Array {
  const out = new Float32Array(n);
  for (let i = 0; i < n; i++) {
    out[i] = Math.fround(0.5 * Math.sin((2 * Math.PI * freq * i) / rate));
  }
  return out;
}

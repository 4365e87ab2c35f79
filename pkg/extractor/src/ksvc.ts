/**
 * .ksvc v1 binary feature files, the exchange format of the ksvc engine.
 *
 * Layout (little-endian): "KSVC" magic, u32 version = 1, u8 kind,
 * u32 T, u32 D, u32 sample_rate, u32 hop_size, then T*D float32
 * row-major.
 */

export const KSVC_MAGIC = "KSVC";
export const KSVC_VERSION = 1;
export const KIND_FEATURES = 0;
export const KIND_PITCH = 1;
export const KIND_HARMONICS = 2;

const HEADER_SIZE = 25;

export interface KsvcFile {
  kind: number;
  frames: number;
  dim: number;
  sampleRate: number;
  hopSize: number;
  data: Float32Array; // length frames * dim
}

export class KsvcError extends Error {}

export function encodeKsvc(file: KsvcFile): Buffer {
  const { kind, frames, dim, sampleRate, hopSize, data } = file;
  if (data.length !== frames * dim) {
    throw new KsvcError(`payload length ${data.length} != ${frames} * ${dim}`);
  }
  const buf = Buffer.alloc(HEADER_SIZE + 4 * data.length);
  buf.write(KSVC_MAGIC, 0, "ascii");
  buf.writeUInt32LE(KSVC_VERSION, 4);
  buf.writeUInt8(kind, 8);
  buf.writeUInt32LE(frames, 9);
  buf.writeUInt32LE(dim, 13);
  buf.writeUInt32LE(sampleRate, 17);
  buf.writeUInt32LE(hopSize, 21);
  for (let i = 0; i < data.length; i++) {
    buf.writeFloatLE(data[i], HEADER_SIZE + 4 * i);
  }
  return buf;
}

export function decodeKsvc(buf: Buffer): KsvcFile {
  if (buf.length < HEADER_SIZE) {
    throw new KsvcError("truncated header");
  }
  if (buf.toString("ascii", 0, 4) !== KSVC_MAGIC) {
    throw new KsvcError("bad magic");
  }
  const version = buf.readUInt32LE(4);
  if (version !== KSVC_VERSION) {
    throw new KsvcError(`unsupported version ${version}`);
  }
  const kind = buf.readUInt8(8);
  const frames = buf.readUInt32LE(9);
  const dim = buf.readUInt32LE(13);
  const sampleRate = buf.readUInt32LE(17);
  const hopSize = buf.readUInt32LE(21);
  if (buf.length !== HEADER_SIZE + 4 * frames * dim) {
    throw new KsvcError(`payload is ${buf.length - HEADER_SIZE} bytes, expected ${4 * frames * dim}`);
  }
  const data = new Float32Array(frames * dim);
  for (let i = 0; i < data.length; i++) {
    data[i] = buf.readFloatLE(HEADER_SIZE + 4 * i);
  }
  return { kind, frames, dim, sampleRate, hopSize, data };
}

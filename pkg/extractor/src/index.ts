export { decodeWav, readWav, resampleLinear, RawAudio, WavError } from "./wav";
export {
  decodeKsvc,
  encodeKsvc,
  KsvcError,
  KsvcFile,
  KIND_FEATURES,
  KIND_HARMONICS,
  KIND_PITCH,
  KSVC_MAGIC,
  KSVC_VERSION,
} from "./ksvc";
export { EncodedFeatures, EncoderError, EncoderOptions, OnnxEncoder, pickOutput } from "./encoder";
export {
  ENGINE_HOP_SIZE,
  ENGINE_SAMPLE_RATE,
  ExtractOptions,
  ExtractResult,
  extractSslFeatures,
} from "./extract";

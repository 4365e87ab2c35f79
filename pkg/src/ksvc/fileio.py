"""Binary feature files (.ksvc) and WAV input/output.

.ksvc layout, all little-endian:

    magic   4 bytes  "KSVC"
    version u32      1
    kind    u8       0 = features, 1 = pitch, 2 = harmonics
    T       u32      frame count
    D       u32      vector width (pitch files use D = 1)
    sample_rate u32
    hop_size    u32
    payload T*D float32, row-major

Payload values are stored exactly as the in-memory float32 arrays, so a
write/read round trip is bit-exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .types import AudioConfig, FeatureSequence, HarmonicTable, PitchTrack, Waveform

MAGIC = b"KSVC"
VERSION = 1
KIND_FEATURES = 0
KIND_PITCH = 1
KIND_HARMONICS = 2

_HEADER = struct.Struct("<4sIBIIII")


class FormatError(ValueError):
    """Raised for malformed .ksvc or unsupported WAV content."""


@dataclass(frozen=True)
class KsvcFile:
    kind: int
    data: np.ndarray  # T x D float32
    sample_rate: int
    hop_size: int

    @property
    def frame_count(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


def write_ksvc(path, kind: int, data: np.ndarray, sample_rate: int, hop_size: int) -> None:
    if kind not in (KIND_FEATURES, KIND_PITCH, KIND_HARMONICS):
        raise FormatError(f"unknown kind {kind}")
    arr = np.ascontiguousarray(data, dtype=np.float32)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise FormatError("data must be 1-D or 2-D")
    if kind == KIND_PITCH and arr.shape[1] != 1:
        raise FormatError("pitch files must have D=1")
    t, d = arr.shape
    header = _HEADER.pack(MAGIC, VERSION, kind, t, d, sample_rate, hop_size)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.tobytes(order="C"))


def read_ksvc(path) -> KsvcFile:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, kind, t, d, sr, hop = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if kind not in (KIND_FEATURES, KIND_PITCH, KIND_HARMONICS):
        raise FormatError(f"{path}: unknown kind {kind}")
    expected = _HEADER.size + 4 * t * d
    if len(raw) != expected:
        raise FormatError(f"{path}: payload is {len(raw) - _HEADER.size} bytes, expected {4 * t * d}")
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(t, d)
    return KsvcFile(kind=kind, data=data, sample_rate=sr, hop_size=hop)


def write_features(path, features: FeatureSequence, config: AudioConfig) -> None:
    write_ksvc(path, KIND_FEATURES, features.frames, config.sample_rate, config.hop_size)


def write_pitch(path, pitch: PitchTrack, config: AudioConfig) -> None:
    write_ksvc(path, KIND_PITCH, pitch.f0, config.sample_rate, config.hop_size)


def write_harmonics(path, harmonics: HarmonicTable, config: AudioConfig) -> None:
    write_ksvc(path, KIND_HARMONICS, harmonics.amplitudes, config.sample_rate, config.hop_size)


def read_features(path) -> FeatureSequence:
    f = read_ksvc(path)
    if f.kind != KIND_FEATURES:
        raise FormatError(f"{path}: expected a features file, got kind {f.kind}")
    return FeatureSequence(f.data)


def read_pitch(path) -> PitchTrack:
    f = read_ksvc(path)
    if f.kind != KIND_PITCH:
        raise FormatError(f"{path}: expected a pitch file, got kind {f.kind}")
    return PitchTrack(f.data[:, 0])


def read_harmonics(path) -> HarmonicTable:
    f = read_ksvc(path)
    if f.kind != KIND_HARMONICS:
        raise FormatError(f"{path}: expected a harmonics file, got kind {f.kind}")
    return HarmonicTable(f.data)


def read_wav(path) -> Waveform:
    """Read a WAV file as mono float64 in [-1, 1].

    16-bit, 32-bit (int or float) and 64-bit float PCM are accepted;
    stereo is downmixed by averaging the channels.
    """
    try:
        sr, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise FormatError(f"{path}: not a readable WAV file ({exc})") from exc

    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise FormatError(f"{path}: unsupported sample format {data.dtype}")

    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if samples.size < 1:
        raise FormatError(f"{path}: empty audio")
    samples = np.clip(samples, -1.0, 1.0)
    return Waveform(samples, int(sr))


def write_wav(path, wave: Waveform, fmt: str = "float32") -> None:
    """Write mono WAV; fmt is "float32" or "pcm16"."""
    if fmt == "float32":
        wavfile.write(path, wave.sample_rate, wave.samples.astype(np.float32))
    elif fmt == "pcm16":
        scaled = np.round(np.clip(wave.samples, -1.0, 1.0) * 32768.0)
        wavfile.write(path, wave.sample_rate,
                      np.clip(scaled, -32768, 32767).astype(np.int16))
    else:
        raise FormatError(f"unknown WAV format {fmt!r}")


def resample(wave: Waveform, target_rate: int) -> Waveform:
    """Polyphase resampling to target_rate; identity when rates match."""
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if wave.sample_rate == target_rate:
        return wave
    g = np.gcd(wave.sample_rate, target_rate)
    up, down = target_rate // g, wave.sample_rate // g
    out = resample_poly(wave.samples, up, down)
    return Waveform(np.clip(out, -1.0, 1.0), target_rate)

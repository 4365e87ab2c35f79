"""Signal analysis: STFT, YIN pitch detection, harmonic-amplitude
extraction, pitch transposition, and frame-to-sample upsampling.

Every frame-rate product here shares one time base: frame t is centered
at sample t*hop_size (reflect padding at the edges), and the frame count
for a waveform of L samples is 1 + (L-1)//hop -- one frame per hop with
its center inside the signal. That keeps spectrogram, pitch and feature
rows aligned index-for-index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .types import AudioConfig, FeatureSequence, HarmonicTable, PitchTrack, Waveform

_FFT_CHUNK = 512  # frames per batched FFT, bounds memory on long inputs


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window (the STFT analysis window)."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def coherent_gain(n: int) -> float:
    """Peak magnitude a unit-amplitude sinusoid reaches in a windowed DFT."""
    return float(hann_window(n).sum()) / 2.0


@dataclass(frozen=True)
class MagnitudeSpectrogram:
    """T x (fft_size/2 + 1) magnitude (not power) spectrogram.

    Bin b covers frequency b * sample_rate / fft_size Hz.
    """

    frames: np.ndarray
    config: AudioConfig

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def bin_count(self) -> int:
        return self.frames.shape[1]

    def bin_frequency(self, b: int) -> float:
        return b * self.config.sample_rate / self.config.fft_size


def _frame_signal(samples: np.ndarray, frame_len: int, hop: int, count: int) -> np.ndarray:
    """count frames of frame_len samples, frame t centered at t*hop."""
    pad_left = frame_len // 2
    pad_right = frame_len - pad_left
    if samples.size - 1 < max(pad_left, pad_right):
        raise ValueError("input too short")
    padded = np.pad(samples, (pad_left, pad_right), mode="reflect")
    frames = np.lib.stride_tricks.sliding_window_view(padded, frame_len)[::hop]
    return frames[:count]


def stft(wave: Waveform, config: AudioConfig) -> MagnitudeSpectrogram:
    """Magnitude spectrogram with frames centered at t*hop_size.

    Raises ValueError("input too short") when the waveform cannot fill
    one analysis window.
    """
    if wave.sample_rate != config.sample_rate:
        raise ValueError(
            f"waveform rate {wave.sample_rate} != config rate {config.sample_rate}"
        )
    if len(wave) < config.fft_size:
        raise ValueError("input too short")

    n_frames = config.frame_count(len(wave))
    frames = _frame_signal(wave.samples, config.fft_size, config.hop_size, n_frames)
    window = hann_window(config.fft_size)

    out = np.empty((n_frames, config.fft_size // 2 + 1), dtype=np.float64)
    for start in range(0, n_frames, _FFT_CHUNK):
        block = frames[start : start + _FFT_CHUNK] * window
        out[start : start + _FFT_CHUNK] = np.abs(np.fft.rfft(block, axis=1))
    return MagnitudeSpectrogram(out, config)


def _yin_frame_lengths(sample_rate: int, fft_size: int, f_min: float, f_max: float):
    tau_min = max(2, int(sample_rate / f_max))
    tau_max = int(np.ceil(sample_rate / f_min))
    if tau_max <= tau_min + 1:
        raise ValueError("pitch search range too narrow for this sample rate")
    win = max(fft_size // 2, tau_max)
    return tau_min, tau_max, win


def detect_pitch(
    wave: Waveform,
    config: AudioConfig,
    f_min: float = 50.0,
    f_max: float = 1000.0,
    threshold: float = 0.1,
) -> PitchTrack:
    """YIN fundamental-frequency track, one value per feature frame.

    Implements the difference function d(tau) over a fixed integration
    window, cumulative mean normalization, absolute threshold with local
    minimum descent, and parabolic refinement of the selected lag.
    Frames with no normalized-difference dip below `threshold` (silence,
    noise, unpitched sounds) are reported as 0.0.
    """
    if not (0.0 < f_min < f_max < config.sample_rate / 2):
        raise ValueError(f"invalid pitch range [{f_min}, {f_max}]")
    if wave.sample_rate != config.sample_rate:
        raise ValueError(
            f"waveform rate {wave.sample_rate} != config rate {config.sample_rate}"
        )

    sr = config.sample_rate
    tau_min, tau_max, win = _yin_frame_lengths(sr, config.fft_size, f_min, f_max)
    frame_len = win + tau_max + 1

    n_frames = config.frame_count(len(wave))
    frames = _frame_signal(wave.samples, frame_len, config.hop_size, n_frames)

    f0 = np.zeros(n_frames, dtype=np.float64)
    fft_size = 1 << int(np.ceil(np.log2(frame_len + tau_max + 1)))

    for start in range(0, n_frames, _FFT_CHUNK):
        block = frames[start : start + _FFT_CHUNK]
        cmndf = _cmndf_block(block, win, tau_max, fft_size)
        for j in range(block.shape[0]):
            f0[start + j] = _pick_period(cmndf[j], tau_min, tau_max, sr, threshold)

    f0 = np.where(f0 > 0, np.clip(f0, f_min, f_max), 0.0)
    return PitchTrack(f0)


def _cmndf_block(frames: np.ndarray, win: int, tau_max: int, fft_size: int) -> np.ndarray:
    """Cumulative mean normalized difference function for a batch of frames.

    d(tau) = e(0) + e(tau) - 2 r(tau) with a fixed window of `win` terms:
    r(tau) = sum_j x[j] x[j+tau], e(tau) = sum_j x[j+tau]^2 for j < win.
    """
    head = frames[:, :win]
    spec_frame = np.fft.rfft(frames, fft_size, axis=1)
    spec_head = np.fft.rfft(head, fft_size, axis=1)
    corr = np.fft.irfft(np.conj(spec_head) * spec_frame, fft_size, axis=1)[:, : tau_max + 1]

    sq = np.concatenate(
        [np.zeros((frames.shape[0], 1)), np.cumsum(frames * frames, axis=1)], axis=1
    )
    energy = sq[:, win : win + tau_max + 1] - sq[:, : tau_max + 1]
    diff = energy[:, :1] + energy - 2.0 * corr
    diff = np.maximum(diff, 0.0)  # roundoff can leave tiny negatives

    running = np.cumsum(diff[:, 1:], axis=1)
    taus = np.arange(1, tau_max + 1, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        normed = diff[:, 1:] * taus / running
    normed = np.where(running > 0, normed, 1.0)
    return np.concatenate([np.ones((frames.shape[0], 1)), normed], axis=1)


def _pick_period(cmndf: np.ndarray, tau_min: int, tau_max: int, sr: int, threshold: float) -> float:
    below = np.nonzero(cmndf[tau_min : tau_max + 1] < threshold)[0]
    if below.size == 0:
        return 0.0
    tau = tau_min + int(below[0])
    while tau + 1 <= tau_max and cmndf[tau + 1] < cmndf[tau]:
        tau += 1

    # parabolic refinement around the selected lag
    if 1 <= tau - 1 and tau + 1 <= tau_max:
        a, b, c = cmndf[tau - 1], cmndf[tau], cmndf[tau + 1]
        denom = a - 2.0 * b + c
        offset = 0.0 if abs(denom) < 1e-12 else 0.5 * (a - c) / denom
        offset = float(np.clip(offset, -0.5, 0.5))
    else:
        offset = 0.0
    return sr / (tau + offset)


def extract_harmonics(spec: MagnitudeSpectrogram, pitch: PitchTrack, n_harmonics: int) -> HarmonicTable:
    """Per-frame amplitudes A_n of the first n_harmonics partials.

    For voiced frames, A_n is the spectrogram peak near n*f0: quadratic
    interpolation of log magnitude over the 3 bins centered on the
    nearest bin, divided by the window's coherent gain so a
    unit-amplitude sinusoid reads as A ~= 1. Harmonics at or above
    Nyquist are 0; unvoiced frames give all-zero rows.
    """
    if spec.frame_count != len(pitch):
        raise ValueError(
            f"spectrogram has {spec.frame_count} frames but pitch has {len(pitch)}"
        )
    if n_harmonics < 1:
        raise ValueError("n_harmonics must be >= 1")

    cfg = spec.config
    t_count = spec.frame_count
    nbins = spec.bin_count
    gain = coherent_gain(cfg.fft_size)

    f0 = pitch.f0.astype(np.float64)
    orders = np.arange(1, n_harmonics + 1, dtype=np.float64)
    freqs = f0[:, None] * orders[None, :]  # (T, N)
    live = (f0[:, None] > 0) & (freqs < cfg.sample_rate / 2)

    bins = np.rint(freqs * cfg.fft_size / cfg.sample_rate).astype(np.int64)
    bins = np.clip(bins, 1, nbins - 2)

    rows = np.repeat(np.arange(t_count)[:, None], n_harmonics, axis=1)
    m_prev = spec.frames[rows, bins - 1]
    m_peak = spec.frames[rows, bins]
    m_next = spec.frames[rows, bins + 1]

    tiny = 1e-300
    la = np.log(np.maximum(m_prev, tiny))
    lb = np.log(np.maximum(m_peak, tiny))
    lc = np.log(np.maximum(m_next, tiny))
    denom = la - 2.0 * lb + lc
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = 0.5 * (la - lc) / denom
    delta = np.where(np.abs(denom) > 1e-12, delta, 0.0)
    delta = np.clip(delta, -0.5, 0.5)
    log_peak = lb - 0.25 * (la - lc) * delta

    amps = np.where(live & (m_peak > 0), np.exp(log_peak) / gain, 0.0)
    return HarmonicTable(amps)


def infer_semitone_shift(src: PitchTrack, ref: PitchTrack) -> int:
    """Integer semitone shift aligning the voiced-median octaves of src to ref."""
    src_v = src.f0[src.voiced_mask].astype(np.float64)
    ref_v = ref.f0[ref.voiced_mask].astype(np.float64)
    if src_v.size == 0 or ref_v.size == 0:
        raise ValueError("cannot infer shift")
    gap = np.median(np.log2(ref_v)) - np.median(np.log2(src_v))
    return int(round(12.0 * gap))


def transpose_pitch(
    src: PitchTrack,
    ref: Optional[PitchTrack],
    override_semitones: Optional[float] = None,
) -> PitchTrack:
    """Shift src's voiced pitches into ref's range (or by an explicit amount).

    Without an override the shift is the integer-semitone gap between the
    voiced log2-medians of ref and src; the override may be fractional.
    Unvoiced frames stay 0.
    """
    if override_semitones is not None:
        shift = float(override_semitones)
    else:
        if ref is None:
            raise ValueError("cannot infer shift")
        shift = float(infer_semitone_shift(src, ref))
    factor = 2.0 ** (shift / 12.0)
    f0 = src.f0.astype(np.float64)
    return PitchTrack(np.where(f0 > 0, f0 * factor, 0.0))


def upsample_linear(series: np.ndarray, hop: int) -> np.ndarray:
    """Frame-rate data to sample rate by linear interpolation.

    Frame t sits at sample t*hop; output has T*hop samples. Values before
    the first and after the last frame center are held constant. Works on
    (T,) scalars and (T, D) vectors.
    """
    arr = np.asarray(series, dtype=np.float64)
    if arr.ndim not in (1, 2) or arr.shape[0] < 1:
        raise ValueError("series must be a non-empty (T,) or (T, D) array")
    if hop < 1:
        raise ValueError("hop must be >= 1")

    t_count = arr.shape[0]
    centers = np.arange(t_count, dtype=np.float64) * hop
    positions = np.arange(t_count * hop, dtype=np.float64)
    if arr.ndim == 1:
        return np.interp(positions, centers, arr)
    out = np.empty((t_count * hop, arr.shape[1]), dtype=np.float64)
    for d in range(arr.shape[1]):
        out[:, d] = np.interp(positions, centers, arr[:, d])
    return out


def mel_filterbank(sample_rate: int, fft_size: int, n_mels: int) -> np.ndarray:
    """Triangular mel filterbank, (n_mels, fft_size//2 + 1)."""

    def to_mel(f):
        return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)

    def from_mel(m):
        return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)

    edges = from_mel(np.linspace(to_mel(0.0), to_mel(sample_rate / 2), n_mels + 2))
    bin_freqs = np.arange(fft_size // 2 + 1, dtype=np.float64) * sample_rate / fft_size

    fb = np.zeros((n_mels, bin_freqs.size), dtype=np.float64)
    for m in range(n_mels):
        left, center, right = edges[m], edges[m + 1], edges[m + 2]
        up = (bin_freqs - left) / max(center - left, 1e-12)
        down = (right - bin_freqs) / max(right - center, 1e-12)
        fb[m] = np.maximum(0.0, np.minimum(up, down))
    return fb


def melspec_features(spec: MagnitudeSpectrogram, n_mels: int = 80) -> FeatureSequence:
    """Built-in fallback feature space: log(1 + mel-projected magnitude)."""
    if n_mels < 1:
        raise ValueError("n_mels must be >= 1")
    fb = mel_filterbank(spec.config.sample_rate, spec.config.fft_size, n_mels)
    return FeatureSequence(np.log1p(spec.frames @ fb.T))

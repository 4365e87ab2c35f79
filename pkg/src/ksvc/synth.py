"""Additive harmonic renderer.

Builds the harmonic waveform from a target pitch contour and
candidate-averaged harmonic amplitudes: upsample both to sample rate,
accumulate phase per sample (double precision, so hours of audio do not
drift), and sum a bank of sinusoids at integer multiples of f0.
"""

from __future__ import annotations

from typing import Sequence, Tuple

import numpy as np

from .dsp import upsample_linear
from .matcher import average_candidates
from .types import AudioConfig, CandidateSet, FeatureSequence, HarmonicTable, PitchTrack, ReferencePool, Waveform


def gather_harmonics(pool: ReferencePool, sets: Sequence[CandidateSet]) -> HarmonicTable:
    """Weighted mean of the candidates' harmonic rows, one row per set."""
    if not sets:
        raise ValueError("no candidate sets")
    rows = pool.harmonics.amplitudes.astype(np.float64)
    out = np.empty((len(sets), rows.shape[1]), dtype=np.float64)
    for t, cs in enumerate(sets):
        idx = np.fromiter(cs.indices, dtype=np.int64)
        w = np.fromiter(cs.weights, dtype=np.float64)
        out[t] = w @ rows[idx]
    return HarmonicTable(out)


def render_harmonics(
    target_pitch: PitchTrack,
    harmonics: HarmonicTable,
    config: AudioConfig,
) -> Tuple[Waveform, float]:
    """Sum-of-sinusoids render of the pitch contour and amplitude table.

    Phase of harmonic n at sample s is the running sum of
    2*pi*n*f0/sample_rate up to (but not including) s, so the render
    starts at phase zero. Samples where a harmonic's instantaneous
    frequency reaches Nyquist contribute nothing (pitch glides may cross
    mid-frame, hence per-sample masking).

    If the per-frame amplitude sums ever exceed 1 the whole render is
    rescaled to peak at 0.99; the applied scale is returned (1.0 when
    untouched) so callers can report it.
    """
    t_count = len(target_pitch)
    if harmonics.frame_count != t_count:
        raise ValueError(
            f"pitch has {t_count} frames but harmonics has {harmonics.frame_count}"
        )

    f0_up = upsample_linear(target_pitch.f0.astype(np.float64), config.hop_size)
    amps_up = upsample_linear(harmonics.amplitudes.astype(np.float64), config.hop_size)

    nyquist = config.sample_rate / 2.0
    increments = 2.0 * np.pi * f0_up / config.sample_rate
    base_phase = np.concatenate([[0.0], np.cumsum(increments[:-1])])

    out = np.zeros(f0_up.size, dtype=np.float64)
    for n in range(1, harmonics.harmonic_count + 1):
        amp = amps_up[:, n - 1]
        if not np.any(amp):
            continue
        audible = (n * f0_up) < nyquist
        out += amp * audible * np.sin(n * base_phase)

    scale = 1.0
    frame_sums = harmonics.amplitudes.astype(np.float64).sum(axis=1)
    if frame_sums.size and frame_sums.max() > 1.0:
        peak = np.max(np.abs(out))
        if peak > 0.99:
            scale = 0.99 / peak
            out = out * scale
    return Waveform(out, config.sample_rate), scale


def render_conversion(
    pool: ReferencePool,
    sets: Sequence[CandidateSet],
    target_pitch: PitchTrack,
    config: AudioConfig,
) -> Tuple[FeatureSequence, Waveform]:
    """Blend candidate features (the vocoder input) and render their harmonics."""
    features = average_candidates(pool, sets)
    harm = gather_harmonics(pool, sets)
    wave, _ = render_harmonics(target_pitch, harm, config)
    return features, wave

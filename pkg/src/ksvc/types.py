"""Domain data types shared by every stage of the conversion engine.

All containers are frozen dataclasses wrapping read-only numpy arrays:
construct once, share freely across threads. Feature-rate data
(features, pitch, harmonics) is stored as float32, the same width the
.ksvc file format uses, so a write/read round trip is bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

UNVOICED = 0.0


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class AudioConfig:
    """Analysis time base. frame_rate = sample_rate / hop_size is shared
    by features, pitch and spectrogram frames."""

    sample_rate: int = 16000
    hop_size: int = 320
    fft_size: int = 1024
    window: str = "hann"

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.hop_size <= 0:
            raise ValueError("hop_size must be positive")
        if self.fft_size < self.hop_size:
            raise ValueError("fft_size must be >= hop_size")
        if self.fft_size & (self.fft_size - 1):
            raise ValueError("fft_size must be a power of two")
        if self.window != "hann":
            raise ValueError(f"unknown window {self.window!r}")

    @property
    def frame_rate(self) -> float:
        return self.sample_rate / self.hop_size

    def frame_count(self, num_samples: int) -> int:
        """Frames centered at t*hop_size for centers in [0, num_samples)."""
        if num_samples < 1:
            return 0
        return 1 + (num_samples - 1) // self.hop_size


@dataclass(frozen=True)
class Waveform:
    """Mono audio in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size < 1:
            raise ValueError("waveform must be a non-empty 1-D array")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains non-finite samples")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", _freeze(samples))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class FeatureSequence:
    """T x D matrix of frame-level feature vectors (float32)."""

    frames: np.ndarray

    def __post_init__(self):
        frames = np.ascontiguousarray(self.frames, dtype=np.float32)
        if frames.ndim != 2:
            raise ValueError("frames must be a T x D matrix")
        if frames.shape[1] < 1:
            raise ValueError("feature dimension must be positive")
        if not np.all(np.isfinite(frames)):
            raise ValueError("frames contain NaN/Inf")
        object.__setattr__(self, "frames", _freeze(frames))

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True)
class PitchTrack:
    """Per-frame fundamental frequency in Hz; 0.0 encodes unvoiced."""

    f0: np.ndarray

    def __post_init__(self):
        f0 = np.ascontiguousarray(self.f0, dtype=np.float32)
        if f0.ndim != 1:
            raise ValueError("f0 must be 1-D")
        if not np.all(np.isfinite(f0)):
            raise ValueError("f0 contains NaN/Inf")
        if np.any(f0 < 0):
            raise ValueError("f0 values must be >= 0 (0 = unvoiced)")
        object.__setattr__(self, "f0", _freeze(f0))

    def __len__(self) -> int:
        return self.f0.size

    @property
    def voiced_mask(self) -> np.ndarray:
        return self.f0 > 0


@dataclass(frozen=True)
class HarmonicTable:
    """T x N matrix of per-frame harmonic amplitudes A_1..A_N."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.ascontiguousarray(self.amplitudes, dtype=np.float32)
        if amps.ndim != 2:
            raise ValueError("amplitudes must be a T x N matrix")
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes contain NaN/Inf")
        if np.any(amps < 0):
            raise ValueError("amplitudes must be nonnegative")
        object.__setattr__(self, "amplitudes", _freeze(amps))

    @property
    def frame_count(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def harmonic_count(self) -> int:
        return self.amplitudes.shape[1]


@dataclass(frozen=True)
class ReferencePool:
    """All reference utterances concatenated, with per-frame pitch and
    harmonics plus the utterance boundary map.

    A row i has a valid right continuation i+1 only when both lie in the
    same utterance span. unit_norms caches per-row L2 norms; rows with
    zero norm have no cosine direction and are excluded from matching.

    Cross-field coherence is intentionally NOT enforced here; use
    validate_pool, which reports violations instead of raising.
    """

    features: FeatureSequence
    pitch: PitchTrack
    harmonics: HarmonicTable
    utterance_spans: tuple
    unit_norms: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self):
        spans = tuple((int(a), int(b)) for a, b in self.utterance_spans)
        object.__setattr__(self, "utterance_spans", spans)
        if self.unit_norms is None:
            norms = np.linalg.norm(self.features.frames.astype(np.float64), axis=1)
            object.__setattr__(self, "unit_norms", _freeze(norms))
        else:
            norms = np.ascontiguousarray(self.unit_norms, dtype=np.float64)
            object.__setattr__(self, "unit_norms", _freeze(norms))

    @property
    def size(self) -> int:
        return self.features.frame_count

    @property
    def matchable(self) -> np.ndarray:
        """Boolean mask of rows that can participate in cosine matching."""
        return self.unit_norms > 0

    def span_of(self, index: int) -> Optional[tuple]:
        for a, b in self.utterance_spans:
            if a <= index < b:
                return (a, b)
        return None


@dataclass(frozen=True)
class CandidateSet:
    """k pool row indices with blending weights on the probability simplex."""

    indices: tuple
    weights: tuple

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        w = tuple(float(x) for x in self.weights)
        if len(idx) < 1 or len(idx) != len(w):
            raise ValueError("indices and weights must be non-empty and equal-length")
        if len(set(idx)) != len(idx):
            raise ValueError("indices must be distinct")
        if any(x < 0 for x in w):
            raise ValueError("weights must be nonnegative")
        if abs(sum(w) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1 within 1e-9")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "weights", w)

    @property
    def k(self) -> int:
        return len(self.indices)

    @classmethod
    def uniform(cls, indices: Sequence[int]) -> "CandidateSet":
        n = len(indices)
        return cls(tuple(indices), (1.0 / n,) * n)


@dataclass
class ConversionReport:
    """Run record emitted as report.json by the CLI."""

    hyperparameters: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    objective_before: Optional[float] = None
    objective_after: Optional[float] = None
    output_roughness: Optional[float] = None
    semitone_shift: Optional[float] = None
    render_scale: Optional[float] = None

    def validate(self) -> None:
        if self.objective_before is not None and self.objective_after is not None:
            if self.objective_after > self.objective_before + 1e-9:
                raise ValueError("objective_after exceeds objective_before")

    def to_dict(self) -> dict:
        return {
            "hyperparameters": dict(self.hyperparameters),
            "timings": dict(self.timings),
            "objective_before": self.objective_before,
            "objective_after": self.objective_after,
            "output_roughness": self.output_roughness,
            "semitone_shift": self.semitone_shift,
            "render_scale": self.render_scale,
        }


def validate_pool(pool: ReferencePool) -> list:
    """Check every ReferencePool invariant; never raises.

    Returns a list of human-readable violations, each naming the offending
    field (and index where applicable). Empty list == valid pool.
    """
    violations = []
    t = pool.features.frame_count

    if len(pool.pitch) != t:
        violations.append(f"pitch: length {len(pool.pitch)} != feature frame count {t}")
    if pool.harmonics.frame_count != t:
        violations.append(
            f"harmonics: length {pool.harmonics.frame_count} != feature frame count {t}"
        )
    if pool.unit_norms.shape != (t,):
        violations.append(f"unit_norms: shape {pool.unit_norms.shape} != ({t},)")
    else:
        true_norms = np.linalg.norm(pool.features.frames.astype(np.float64), axis=1)
        bad = np.nonzero(~np.isclose(pool.unit_norms, true_norms, rtol=1e-6, atol=1e-12))[0]
        if bad.size:
            violations.append(f"unit_norms: stale cache at index {int(bad[0])}")

    spans = pool.utterance_spans
    if not spans:
        if t > 0:
            violations.append("utterance_spans: empty but pool has frames")
    else:
        cursor = 0
        for n, (a, b) in enumerate(spans):
            if a >= b:
                violations.append(f"utterance_spans: span {n} ({a},{b}) is empty or reversed")
            elif a != cursor:
                kind = "overlap" if a < cursor else "gap"
                violations.append(f"utterance_spans: {kind} at index {min(a, cursor)} (span {n})")
            cursor = max(cursor, b)
        if spans and spans[-1][1] != t:
            violations.append(
                f"utterance_spans: spans end at {spans[-1][1]} but pool has {t} frames"
            )

    if len(pool.pitch) == pool.harmonics.frame_count == t and t > 0:
        unvoiced = ~pool.pitch.voiced_mask
        nonzero_rows = np.any(pool.harmonics.amplitudes != 0, axis=1)
        bad = np.nonzero(unvoiced & nonzero_rows)[0]
        if bad.size:
            violations.append(
                f"harmonics: nonzero amplitudes at unvoiced frame {int(bad[0])}"
            )

    return violations

"""Concatenative voice/singing conversion core engine.

Pipeline: analyze audio into frame-aligned features/pitch/harmonics,
match source frames against a reference pool (kNN over cosine
similarity), optionally repair concatenation smoothness (autoregressive
reselection + simplex-constrained blending weights), and render a
harmonic waveform by additive synthesis. The blended feature sequence is
written to a .ksvc file for any external vocoder to consume.
"""

from .types import (
    AudioConfig,
    CandidateSet,
    ConversionReport,
    FeatureSequence,
    HarmonicTable,
    PitchTrack,
    ReferencePool,
    Waveform,
    validate_pool,
)

__version__ = "0.1.0"

__all__ = [
    "AudioConfig",
    "CandidateSet",
    "ConversionReport",
    "FeatureSequence",
    "HarmonicTable",
    "PitchTrack",
    "ReferencePool",
    "Waveform",
    "validate_pool",
    "__version__",
]

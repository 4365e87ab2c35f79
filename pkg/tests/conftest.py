import numpy as np
import pytest

from ksvc.types import AudioConfig, FeatureSequence, HarmonicTable, PitchTrack, Waveform
from ksvc import matcher


@pytest.fixture
def config():
    return AudioConfig()


def sine(freq, duration=1.0, sr=16000, amp=0.6):
    t = np.arange(int(duration * sr)) / sr
    return Waveform(amp * np.sin(2 * np.pi * freq * t), sr)


def vibrato_voice(path, f0=220.0, duration=1.0, sr=16000, seed=0):
    """FM harmonic tone: every frame is distinct and none are silent."""
    from scipy.io import wavfile

    rng = np.random.default_rng(seed)
    n = int(duration * sr)
    t = np.arange(n) / sr
    inst = f0 * (1.0 + 0.03 * np.sin(2 * np.pi * 4.0 * t))
    phase = 2 * np.pi * np.cumsum(inst) / sr
    sig = np.zeros(n)
    for h, a in enumerate((0.5, 0.25, 0.12, 0.06), start=1):
        sig += a * np.sin(h * phase)
    sig += 0.003 * rng.normal(size=n)
    wavfile.write(path, sr, np.clip(sig, -1, 1).astype(np.float32))
    return path


def pool_from_rows(rows, pitch=None, harmonics=None, spans=None):
    """Single- or multi-span pool with zero pitch/harmonics by default."""
    rows = np.asarray(rows, dtype=np.float64)
    n = rows.shape[0]
    pitch = np.zeros(n) if pitch is None else np.asarray(pitch, dtype=np.float64)
    harmonics = np.zeros((n, 1)) if harmonics is None else np.asarray(harmonics)
    if spans is None:
        spans = [(0, n)]
    utterances = []
    for a, b in spans:
        utterances.append(
            (
                FeatureSequence(rows[a:b]),
                PitchTrack(pitch[a:b]),
                HarmonicTable(harmonics[a:b]),
            )
        )
    return matcher.build_pool(utterances)

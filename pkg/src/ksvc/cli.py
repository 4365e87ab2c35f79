"""Command-line pipeline: extract | convert | bench | inspect.

Config precedence is CLI flags > JSON config file > built-in defaults.
Exit codes: 0 success, 2 validation error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import dsp, fileio, matcher, smoother, synth
from .fileio import FormatError
from .smoother import SmootherConfig
from .types import (
    AudioConfig,
    CandidateSet,
    ConversionReport,
    FeatureSequence,
    HarmonicTable,
    PitchTrack,
    Waveform,
)

log = logging.getLogger("ksvc")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3


@dataclass(frozen=True)
class PipelineParams:
    """Everything a conversion run needs; field names double as the
    config-file schema."""

    sample_rate: int = 16000
    hop_size: int = 320
    fft_size: int = 1024
    n_mels: int = 80
    f_min: float = 50.0
    f_max: float = 1000.0
    k: int = 4
    kprime: int = 32
    harmonics: int = 50
    m: float = 0.3
    max_iters: int = 500
    step_size: float = 0.05
    tol: float = 1e-7

    @property
    def audio(self) -> AudioConfig:
        return AudioConfig(self.sample_rate, self.hop_size, self.fft_size)

    def smoother(self) -> SmootherConfig:
        return SmootherConfig(
            m=self.m, k=self.k, max_iters=self.max_iters,
            step_size=self.step_size, tol=self.tol,
        )


def load_params(config_path: Optional[str], overrides: dict) -> PipelineParams:
    values = dataclasses.asdict(PipelineParams())
    if config_path:
        try:
            loaded = json.loads(Path(config_path).read_text())
        except OSError as exc:
            raise FormatError(f"cannot read config {config_path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise FormatError(f"config {config_path} is not valid JSON: {exc}") from exc
        unknown = set(loaded) - set(values)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values.update(loaded)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return PipelineParams(**values)


def _load_audio(path: str, config: AudioConfig) -> Waveform:
    wave = fileio.read_wav(path)
    if wave.sample_rate != config.sample_rate:
        log.info(
            "%s: resampling %d Hz -> %d Hz", path, wave.sample_rate, config.sample_rate
        )
        wave = fileio.resample(wave, config.sample_rate)
    return wave


def _analyze(
    wave: Waveform, params: PipelineParams
) -> Tuple[FeatureSequence, PitchTrack, HarmonicTable]:
    spec = dsp.stft(wave, params.audio)
    pitch = dsp.detect_pitch(wave, params.audio, params.f_min, params.f_max)
    harm = dsp.extract_harmonics(spec, pitch, params.harmonics)
    feats = dsp.melspec_features(spec, params.n_mels)
    return feats, pitch, harm


def _reconcile(
    name: str,
    feats: FeatureSequence,
    pitch: PitchTrack,
    harm: HarmonicTable,
) -> Tuple[FeatureSequence, PitchTrack, HarmonicTable]:
    """Trim to a common frame count (external features may differ by +-1)."""
    t = min(feats.frame_count, len(pitch), harm.frame_count)
    if feats.frame_count != t or len(pitch) != t:
        log.info(
            "%s: trimming to %d frames (features %d, pitch %d)",
            name, t, feats.frame_count, len(pitch),
        )
    return (
        FeatureSequence(feats.frames[:t]),
        PitchTrack(pitch.f0[:t]),
        HarmonicTable(harm.amplitudes[:t]),
    )


def cmd_extract(args: argparse.Namespace) -> int:
    params = load_params(args.config, _param_overrides(args))
    wave = _load_audio(args.wav, params.audio)
    feats, pitch, harm = _analyze(wave, params)

    prefix = args.out_prefix
    fileio.write_features(f"{prefix}.feat.ksvc", feats, params.audio)
    fileio.write_pitch(f"{prefix}.f0.ksvc", pitch, params.audio)
    fileio.write_harmonics(f"{prefix}.harm.ksvc", harm, params.audio)
    print(
        f"extracted {feats.frame_count} frames "
        f"(features D={feats.dim}, harmonics N={harm.harmonic_count}) -> {prefix}.*.ksvc"
    )
    return EXIT_OK


def cmd_convert(args: argparse.Namespace) -> int:
    params = load_params(args.config, _param_overrides(args))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    timings: dict = {}
    report = ConversionReport()

    t0 = time.perf_counter()
    src_wave = _load_audio(args.source, params.audio)
    ref_waves = [_load_audio(p, params.audio) for p in args.references]
    timings["load"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    src_feats, src_pitch, src_harm = _analyze(src_wave, params)
    ref_products = [_analyze(w, params) for w in ref_waves]
    if args.features:
        if len(args.features) != 1 + len(args.references):
            raise ValueError(
                f"--features needs 1 source + {len(args.references)} reference files, "
                f"got {len(args.features)}"
            )
        src_feats = fileio.read_features(args.features[0])
        ref_products = [
            (fileio.read_features(path), p, h)
            for path, (_, p, h) in zip(args.features[1:], ref_products)
        ]
    src_feats, src_pitch, src_harm = _reconcile("source", src_feats, src_pitch, src_harm)
    ref_products = [
        _reconcile(args.references[n], f, p, h)
        for n, (f, p, h) in enumerate(ref_products)
    ]
    timings["analysis"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    pool = matcher.build_pool(ref_products)
    timings["pool"] = time.perf_counter() - t0

    if args.semitones is not None:
        shift = float(args.semitones)
    else:
        shift = float(dsp.infer_semitone_shift(src_pitch, pool.pitch))
    target_pitch = dsp.transpose_pitch(src_pitch, None, override_semitones=shift)

    t0 = time.perf_counter()
    knn_sets = matcher.knn_query(pool, src_feats, params.k)
    timings["match"] = time.perf_counter() - t0

    smoothing = not args.no_smooth and params.m > 0
    if smoothing:
        t0 = time.perf_counter()
        cfg = params.smoother()
        sets = smoother.reselect(pool, src_feats, knn_sets, cfg)
        report.objective_before = smoother.smoothing_objective(pool, sets)
        sets = smoother.optimize_weights(pool, sets, cfg)
        report.objective_after = smoother.smoothing_objective(pool, sets)
        timings["smooth"] = time.perf_counter() - t0
    else:
        sets = knn_sets

    t0 = time.perf_counter()
    blended = matcher.average_candidates(pool, sets)
    timings["blend"] = time.perf_counter() - t0

    wave_path = None
    if not args.no_as:
        t0 = time.perf_counter()
        matchable = int(pool.matchable.sum())
        kprime = min(params.kprime, matchable)
        if kprime < params.kprime:
            log.info("pool has %d matchable rows; clamping k' to %d", matchable, kprime)
        hsets: List[CandidateSet] = [
            matcher.select_harmonic_candidates(
                pool, src_feats.frames[t], float(target_pitch.f0[t]), kprime, params.k
            )
            for t in range(src_feats.frame_count)
        ]
        harm = synth.gather_harmonics(pool, hsets)
        render, scale = synth.render_harmonics(target_pitch, harm, params.audio)
        report.render_scale = scale
        wave_path = out_dir / "out.harmonic.wav"
        fileio.write_wav(wave_path, render)
        timings["render"] = time.perf_counter() - t0

    feat_path = out_dir / "out.feat.ksvc"
    fileio.write_features(feat_path, blended, params.audio)

    report.hyperparameters = {
        "k": params.k,
        "kprime": params.kprime,
        "harmonics": params.harmonics,
        "m": params.m,
        "n_mels": params.n_mels,
        "sample_rate": params.sample_rate,
        "hop_size": params.hop_size,
        "fft_size": params.fft_size,
        "smoothing": smoothing,
        "additive_synthesis": not args.no_as,
        "external_features": bool(args.features),
    }
    report.semitone_shift = shift
    report.timings = {k: round(v, 6) for k, v in timings.items()}
    if blended.frame_count >= 2:
        report.output_roughness = smoother.roughness(blended)
    report.validate()
    report_path = out_dir / "report.json"
    report_path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")

    outputs = [str(feat_path), str(report_path)] + ([str(wave_path)] if wave_path else [])
    print(f"converted {blended.frame_count} frames -> {', '.join(outputs)}")
    return EXIT_OK


def _brute_force_knn(rows: np.ndarray, query: np.ndarray, k: int) -> List[int]:
    """Exhaustive-scan oracle used by bench --oracle."""
    sims = []
    qn = np.linalg.norm(query)
    for i, row in enumerate(rows):
        rn = np.linalg.norm(row)
        if rn == 0:
            sims.append(float("-inf"))
        else:
            sims.append(float(np.dot(row, query) / (rn * qn)))
    order = sorted(range(len(rows)), key=lambda i: (-sims[i], i))
    return order[:k]


def cmd_bench(args: argparse.Namespace) -> int:
    if args.pool_size < 1 or args.dim < 1 or args.queries < 1:
        raise ValueError("pool size, dim and query count must be positive")
    rng = np.random.default_rng(args.seed)
    rows = rng.normal(size=(args.pool_size, args.dim)).astype(np.float32)
    pool = matcher.build_pool(
        [(
            FeatureSequence(rows),
            PitchTrack(np.zeros(args.pool_size)),
            HarmonicTable(np.zeros((args.pool_size, 1))),
        )]
    )
    queries = FeatureSequence(rng.normal(size=(args.queries, args.dim)))
    k = min(4, args.pool_size)

    t0 = time.perf_counter()
    sets = matcher.knn_query(pool, queries, k)
    dt = time.perf_counter() - t0
    digest = int(np.sum([s.indices for s in sets]) % 1_000_000_007)
    print(f"knn_query: {args.queries / dt:.1f} queries/s "
          f"({args.pool_size} x {args.dim} pool, k={k})")
    print(f"knn digest: {digest}")

    t_frames = min(64, args.queries)
    opt_sets = sets[:t_frames]
    cfg = SmootherConfig(k=k, max_iters=100, tol=1e-30)
    t0 = time.perf_counter()
    smoother.optimize_weights(pool, opt_sets, cfg)
    dt = time.perf_counter() - t0
    print(f"optimize_weights: {cfg.max_iters / dt:.1f} iterations/s "
          f"(T={t_frames}, k={k})")

    if args.oracle:
        exact = all(
            list(s.indices) == _brute_force_knn(rows, queries.frames[i], k)
            for i, s in enumerate(sets[: min(len(sets), 64)])
        )
        print("oracle: exact match" if exact else "oracle: MISMATCH")
        if not exact:
            return EXIT_VALIDATION
    return EXIT_OK


def cmd_inspect(args: argparse.Namespace) -> int:
    f = fileio.read_ksvc(args.file)
    kind = {0: "features", 1: "pitch", 2: "harmonics"}[f.kind]
    print(f"{args.file}: kind={kind} T={f.frame_count} D={f.dim} "
          f"sample_rate={f.sample_rate} hop_size={f.hop_size}")
    if f.data.size:
        print(f"  min={f.data.min():.6g} max={f.data.max():.6g} "
              f"mean={f.data.mean():.6g}")
    return EXIT_OK


def _param_overrides(args: argparse.Namespace) -> dict:
    keys = (
        "sample_rate", "hop_size", "fft_size", "n_mels", "f_min", "f_max",
        "k", "kprime", "harmonics", "m", "max_iters", "step_size", "tol",
    )
    return {key: getattr(args, key, None) for key in keys}


def _add_param_flags(p: argparse.ArgumentParser, matching: bool = True) -> None:
    p.add_argument("--config", help="JSON config file (CLI flags win)")
    p.add_argument("--sample-rate", dest="sample_rate", type=int)
    p.add_argument("--hop-size", dest="hop_size", type=int)
    p.add_argument("--fft-size", dest="fft_size", type=int)
    p.add_argument("--n-mels", dest="n_mels", type=int)
    p.add_argument("--f-min", dest="f_min", type=float)
    p.add_argument("--f-max", dest="f_max", type=float)
    p.add_argument("--harmonics", type=int, help="harmonic count N")
    if matching:
        p.add_argument("--k", type=int, help="neighbors blended per frame")
        p.add_argument("--kprime", type=int, help="similarity cutoff for pitch-aware selection")
        p.add_argument("--m", type=float, help="concatenation-cost multiplier")
        p.add_argument("--max-iters", dest="max_iters", type=int)
        p.add_argument("--step-size", dest="step_size", type=float)
        p.add_argument("--tol", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ksvc",
        description="Concatenative voice/singing conversion engine",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="analyze a WAV into .ksvc feature/pitch/harmonic files")
    p.add_argument("wav")
    p.add_argument("out_prefix")
    _add_param_flags(p, matching=False)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("convert", help="convert a source WAV using reference WAVs")
    p.add_argument("source")
    p.add_argument("references", nargs="+")
    p.add_argument("-o", "--out-dir", default=".", help="output directory")
    p.add_argument("--semitones", type=float,
                   help="pitch shift override (semitones, may be fractional)")
    p.add_argument("--features", nargs="+",
                   help="external .ksvc feature files: source first, then one per reference")
    p.add_argument("--no-smooth", action="store_true",
                   help="skip reselection + weight optimization")
    p.add_argument("--no-as", action="store_true",
                   help="skip harmonic selection and additive rendering")
    _add_param_flags(p)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("bench", help="throughput benchmark on random data")
    p.add_argument("--pool-size", dest="pool_size", type=int, default=10000)
    p.add_argument("--dim", type=int, default=1024)
    p.add_argument("--queries", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--oracle", action="store_true",
                   help="verify against an exhaustive-scan oracle")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("inspect", help="print a .ksvc file's header and stats")
    p.add_argument("file")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (FormatError, FileNotFoundError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_IO
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())

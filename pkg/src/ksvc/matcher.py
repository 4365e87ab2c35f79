"""Reference pool construction and nearest-neighbor queries.

Matching is brute-force cosine similarity as a normalized matrix
product; pools are minutes of audio (1e4..1e5 frames) so exact search is
fast enough and keeps oracle tests trivial. All ties break toward the
lower pool index, making every result deterministic.
"""

from __future__ import annotations

from typing import List, Sequence, Tuple

import numpy as np

from .types import CandidateSet, FeatureSequence, HarmonicTable, PitchTrack, ReferencePool

_QUERY_CHUNK = 256  # query rows per similarity block, bounds memory


def build_pool(
    utterances: Sequence[Tuple[FeatureSequence, PitchTrack, HarmonicTable]]
) -> ReferencePool:
    """Concatenate reference utterances into one matchable pool.

    Every utterance's features/pitch/harmonics must share a frame count;
    utterance boundaries are recorded so continuation lookups never cross
    them. Rows with zero norm are excluded from matching (no cosine
    direction) but keep their slot so indices stay stable.
    """
    if not utterances:
        raise ValueError("reference list is empty")

    feats, pitches, harms, spans = [], [], [], []
    cursor = 0
    for n, (f, p, h) in enumerate(utterances):
        if not (f.frame_count == len(p) == h.frame_count):
            raise ValueError(
                f"utterance {n}: features {f.frame_count}, pitch {len(p)}, "
                f"harmonics {h.frame_count} frame counts differ"
            )
        feats.append(f.frames)
        pitches.append(p.f0)
        harms.append(h.amplitudes)
        spans.append((cursor, cursor + f.frame_count))
        cursor += f.frame_count

    n_harm = {h.shape[1] for h in harms}
    if len(n_harm) != 1:
        raise ValueError(f"utterances disagree on harmonic count: {sorted(n_harm)}")
    dims = {f.shape[1] for f in feats}
    if len(dims) != 1:
        raise ValueError(f"utterances disagree on feature dim: {sorted(dims)}")

    return ReferencePool(
        features=FeatureSequence(np.concatenate(feats, axis=0)),
        pitch=PitchTrack(np.concatenate(pitches)),
        harmonics=HarmonicTable(np.concatenate(harms, axis=0)),
        utterance_spans=tuple(spans),
    )


def _normalized_rows(pool: ReferencePool) -> np.ndarray:
    """Pool rows scaled to unit norm (zero rows stay zero), float64."""
    rows = pool.features.frames.astype(np.float64)
    norms = np.where(pool.unit_norms > 0, pool.unit_norms, 1.0)
    return rows / norms[:, None]


def similarity_matrix(pool: ReferencePool, queries: np.ndarray) -> np.ndarray:
    """Cosine similarities (Q x pool_size); non-matchable pool rows get -inf.

    Zero-norm query rows have no direction; their similarities are 0
    against every matchable row.
    """
    q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if q.shape[1] != pool.features.dim:
        raise ValueError(f"query dim {q.shape[1]} != pool dim {pool.features.dim}")
    qn = np.linalg.norm(q, axis=1)
    q = q / np.where(qn > 0, qn, 1.0)[:, None]
    sims = q @ _normalized_rows(pool).T
    sims[:, ~pool.matchable] = -np.inf
    return sims


def _top_k_desc(sims: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest values, descending, ties to the lower index."""
    order = np.argsort(-sims, kind="stable")
    return order[:k]


def knn_query(pool: ReferencePool, source: FeatureSequence, k: int) -> List[CandidateSet]:
    """Top-k pool rows by cosine similarity for every source frame.

    Returns one CandidateSet per frame with uniform 1/k weights, indices
    in descending-similarity order.
    """
    matchable = int(pool.matchable.sum())
    if not (1 <= k <= matchable):
        raise ValueError(f"k={k} outside [1, {matchable}] matchable rows")
    if source.dim != pool.features.dim:
        raise ValueError(f"source dim {source.dim} != pool dim {pool.features.dim}")

    sets: List[CandidateSet] = []
    frames = source.frames
    for start in range(0, source.frame_count, _QUERY_CHUNK):
        sims = similarity_matrix(pool, frames[start : start + _QUERY_CHUNK])
        for row in sims:
            sets.append(CandidateSet.uniform(_top_k_desc(row, k).tolist()))
    return sets


def average_candidates(pool: ReferencePool, sets: Sequence[CandidateSet]) -> FeatureSequence:
    """Blend candidate rows by their weights, one output row per set.

    With uniform weights this is the plain k-nearest-neighbor mean; the
    same operation serves optimized weights.
    """
    if not sets:
        raise ValueError("no candidate sets")
    rows = pool.features.frames.astype(np.float64)
    out = np.empty((len(sets), rows.shape[1]), dtype=np.float64)
    if len({cs.k for cs in sets}) == 1:
        idx = np.array([cs.indices for cs in sets], dtype=np.int64)
        w = np.array([cs.weights for cs in sets], dtype=np.float64)
        for s in range(0, len(sets), _QUERY_CHUNK):
            e = s + _QUERY_CHUNK
            out[s:e] = np.einsum("tk,tkd->td", w[s:e], rows[idx[s:e]])
    else:
        for t, cs in enumerate(sets):
            idx = np.fromiter(cs.indices, dtype=np.int64)
            w = np.fromiter(cs.weights, dtype=np.float64)
            out[t] = w @ rows[idx]
    return FeatureSequence(out)


def select_harmonic_candidates(
    pool: ReferencePool,
    source_frame: np.ndarray,
    target_f0: float,
    k_prime: int,
    k: int,
) -> CandidateSet:
    """Pitch-aware candidate selection for additive synthesis.

    Take the top-k' rows by cosine similarity, then re-rank them by pitch
    proximity to target_f0 in octave (log2) space, unvoiced candidates
    last, and keep the top k. A stable sort keeps similarity order among
    equal pitch distances, so an unpitched target (or an all-unvoiced
    shortlist) falls back to plain similarity order.
    """
    matchable = int(pool.matchable.sum())
    if not (1 <= k <= k_prime <= matchable):
        raise ValueError(f"need 1 <= k={k} <= k'={k_prime} <= {matchable} matchable rows")

    sims = similarity_matrix(pool, np.asarray(source_frame))[0]
    shortlist = _top_k_desc(sims, k_prime)
    if target_f0 <= 0:
        return CandidateSet.uniform(shortlist[:k].tolist())

    cand_f0 = pool.pitch.f0[shortlist].astype(np.float64)
    with np.errstate(divide="ignore"):
        distance = np.where(
            cand_f0 > 0, np.abs(np.log2(cand_f0) - np.log2(target_f0)), np.inf
        )
    ranked = shortlist[np.argsort(distance, kind="stable")]
    return CandidateSet.uniform(ranked[:k].tolist())

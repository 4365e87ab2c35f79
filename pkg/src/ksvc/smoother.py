"""Inference-time concatenation smoothness optimization.

Two passes repair the trembling artifacts of frame-by-frame matching:

1. reselect: walk the sequence autoregressively, rescoring each frame's
   shortlist with a blend of source similarity and a concatenation term
   (median cosine similarity to the previous frame's picks). New
   candidates may only enter as same-utterance continuations of the
   previous picks, so selections drift toward temporally coherent runs.

2. optimize_weights: treat the per-frame blending weights as variables
   on the probability simplex and minimize the mismatch between each
   blended frame and the ideal temporal continuations of its neighbors,
   by projected gradient descent with step halving.

Both scores/objectives follow the candidate-frame geometry only; they
never touch pitch or harmonics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .types import CandidateSet, FeatureSequence, ReferencePool

_MIN_STEP = 1e-18


@dataclass(frozen=True)
class SmootherConfig:
    """Hyperparameters: m trades local fidelity against smoothness."""

    m: float = 0.3
    k: int = 4
    max_iters: int = 500
    step_size: float = 0.05
    tol: float = 1e-7

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("m must be >= 0")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def concat_score(
    candidate: np.ndarray,
    source_frame: np.ndarray,
    prev: CandidateSet,
    pool: ReferencePool,
    m: float,
) -> float:
    """Reselection score: cos(candidate, source) + m * median cos to prev picks.

    Higher is better; m=0 reduces to plain cosine similarity. A zero-norm
    candidate has no direction and scores -inf (never selected). The
    median of an even count is the mean of the two middle values.
    """
    cand = np.asarray(candidate, dtype=np.float64)
    if np.linalg.norm(cand) == 0.0:
        return float("-inf")
    src_sim = _cosine(cand, np.asarray(source_frame, dtype=np.float64))
    rows = pool.features.frames.astype(np.float64)
    prev_sims = [_cosine(cand, rows[i]) for i in prev.indices]
    return src_sim + m * float(np.median(prev_sims))


def continuation(pool: ReferencePool, index: int, direction: str) -> Optional[int]:
    """index +/- 1 when it stays inside the same utterance span, else None."""
    if direction not in ("left", "right"):
        raise ValueError(f"direction must be 'left' or 'right', got {direction!r}")
    if not (0 <= index < pool.size):
        raise ValueError(f"index {index} out of bounds for pool of {pool.size}")
    neighbor = index - 1 if direction == "left" else index + 1
    span = pool.span_of(index)
    if span is not None and span[0] <= neighbor < span[1]:
        return neighbor
    return None


def _continuation_masks(pool: ReferencePool):
    """(has_right, has_left) booleans per pool row, span-aware."""
    span_id = np.full(pool.size, -1, dtype=np.int64)
    for n, (a, b) in enumerate(pool.utterance_spans):
        span_id[a:b] = n
    has_right = np.zeros(pool.size, dtype=bool)
    has_left = np.zeros(pool.size, dtype=bool)
    if pool.size > 1:
        same = (span_id[:-1] == span_id[1:]) & (span_id[:-1] >= 0)
        has_right[:-1] = same
        has_left[1:] = same
    return has_right, has_left


def reselect(
    pool: ReferencePool,
    source: FeatureSequence,
    knn_sets: Sequence[CandidateSet],
    cfg: SmootherConfig,
) -> List[CandidateSet]:
    """Autoregressive candidate reselection under the concatenation score.

    Frame 0 keeps its kNN picks. At each later frame the shortlist is the
    kNN candidates plus the right continuations of the previous picks
    (deduplicated); the k best by concat_score survive, ties to the lower
    pool index. Keeping the kNN set in the shortlist preserves local
    fidelity and makes m=0 an exact no-op.
    """
    if len(knn_sets) != source.frame_count:
        raise ValueError(
            f"{len(knn_sets)} candidate sets for {source.frame_count} source frames"
        )
    for t, cs in enumerate(knn_sets):
        if cs.k != cfg.k:
            raise ValueError(f"set {t} has k={cs.k}, expected {cfg.k}")
    if not knn_sets:
        return []

    rows = pool.features.frames.astype(np.float64)
    norms = np.where(pool.unit_norms > 0, pool.unit_norms, 1.0)
    unit = rows / norms[:, None]
    src = source.frames.astype(np.float64)
    src_norms = np.linalg.norm(src, axis=1)
    src_unit = src / np.where(src_norms > 0, src_norms, 1.0)[:, None]

    has_right, _ = _continuation_masks(pool)
    out: List[CandidateSet] = [knn_sets[0]]
    for t in range(1, len(knn_sets)):
        prev = out[t - 1].indices
        shortlist = list(knn_sets[t].indices)
        seen = set(shortlist)
        for i in prev:
            if has_right[i] and i + 1 not in seen:
                shortlist.append(i + 1)
                seen.add(i + 1)

        cand = np.asarray(shortlist, dtype=np.int64)
        src_sim = unit[cand] @ src_unit[t]
        prev_sim = unit[cand] @ unit[np.asarray(prev, dtype=np.int64)].T
        scores = src_sim + cfg.m * np.median(prev_sim, axis=1)
        scores[pool.unit_norms[cand] == 0] = -np.inf

        order = np.lexsort((cand, -scores))[: cfg.k]
        out.append(CandidateSet.uniform(cand[order].tolist()))
    return out


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sorted-threshold rule)."""
    x = np.asarray(v, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("input must be a non-empty vector")
    u = np.sort(x)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, x.size + 1)
    rho = np.nonzero(u + (1.0 - css) / j > 0)[0][-1]
    theta = (css[rho] - 1.0) / (rho + 1)
    return np.maximum(x - theta, 0.0)


class _JoinObjective:
    """Quadratic join-mismatch objective over stacked per-frame weights.

    Frames are padded to a common candidate count with masked slots;
    candidates without a same-utterance continuation reuse their own row
    (zero-velocity extension), which keeps every term defined and adds no
    penalty at genuine utterance ends.
    """

    def __init__(self, pool: ReferencePool, sets: Sequence[CandidateSet]):
        rows = pool.features.frames.astype(np.float64)
        t_count = len(sets)
        kmax = max(cs.k for cs in sets)

        idx = np.zeros((t_count, kmax), dtype=np.int64)
        mask = np.zeros((t_count, kmax), dtype=bool)
        for t, cs in enumerate(sets):
            idx[t, : cs.k] = cs.indices
            mask[t, : cs.k] = True

        has_right, has_left = _continuation_masks(pool)
        succ = np.where(mask & has_right[idx], idx + 1, idx)
        pred = np.where(mask & has_left[idx], idx - 1, idx)

        self.mask = mask
        self.frames = rows[idx]       # (T, K, D) candidate rows C_i
        self.right = rows[succ]       # rows C_{i+1}
        self.left = rows[pred]        # rows C_{i-1}
        self.t_count = t_count
        self.kmax = kmax

    def uniform_weights(self) -> np.ndarray:
        w = self.mask.astype(np.float64)
        return w / w.sum(axis=1, keepdims=True)

    def value(self, w: np.ndarray) -> float:
        if self.t_count < 2:
            return 0.0
        v = np.einsum("tk,tkd->td", w, self.frames)
        r = np.einsum("tk,tkd->td", w, self.right)
        l = np.einsum("tk,tkd->td", w, self.left)
        e_left = l[1:] - v[:-1]
        e_right = r[:-1] - v[1:]
        return float(np.sum(e_left * e_left) + np.sum(e_right * e_right))

    def gradient(self, w: np.ndarray) -> np.ndarray:
        g = np.zeros_like(w)
        if self.t_count < 2:
            return g
        v = np.einsum("tk,tkd->td", w, self.frames)
        r = np.einsum("tk,tkd->td", w, self.right)
        l = np.einsum("tk,tkd->td", w, self.left)
        e_left = l[1:] - v[:-1]
        e_right = r[:-1] - v[1:]
        g[1:] += 2.0 * np.einsum("tkd,td->tk", self.left[1:], e_left)
        g[1:] -= 2.0 * np.einsum("tkd,td->tk", self.frames[1:], e_right)
        g[:-1] -= 2.0 * np.einsum("tkd,td->tk", self.frames[:-1], e_left)
        g[:-1] += 2.0 * np.einsum("tkd,td->tk", self.right[:-1], e_right)
        g[~self.mask] = 0.0
        return g

    def project(self, w: np.ndarray) -> np.ndarray:
        """Row-wise masked simplex projection (same sorted-threshold rule
        as project_simplex, vectorized over frames)."""
        neg = np.where(self.mask, w, -np.inf)
        u = -np.sort(-neg, axis=1)  # descending, padded slots last
        finite = np.isfinite(u)
        css = np.cumsum(np.where(finite, u, 0.0), axis=1)
        j = np.arange(1, self.kmax + 1, dtype=np.float64)[None, :]
        cond = finite & (u + (1.0 - css) / j > 0)
        rho = self.kmax - 1 - np.argmax(cond[:, ::-1], axis=1)
        rows = np.arange(self.t_count)
        theta = (css[rows, rho] - 1.0) / (rho + 1)
        out = np.maximum(w - theta[:, None], 0.0)
        out[~self.mask] = 0.0
        return out


def smoothing_objective(pool: ReferencePool, sets: Sequence[CandidateSet]) -> float:
    """Join-mismatch objective at the sets' own weights."""
    if not sets:
        raise ValueError("no candidate sets")
    obj = _JoinObjective(pool, sets)
    w = np.zeros((obj.t_count, obj.kmax), dtype=np.float64)
    for t, cs in enumerate(sets):
        w[t, : cs.k] = cs.weights
    return obj.value(w)


def optimize_weights(
    pool: ReferencePool,
    sets: Sequence[CandidateSet],
    cfg: SmootherConfig,
) -> List[CandidateSet]:
    """Re-weight each frame's candidates to minimize join mismatch.

    Projected gradient descent from uniform weights, jointly over all
    frames (the objective couples neighboring frames). The step is
    halved whenever a proposal would increase the objective, so the
    accepted objective sequence is non-increasing and uniform weights
    (the kNN baseline) are never made worse.
    """
    if not sets:
        raise ValueError("no candidate sets")
    obj = _JoinObjective(pool, sets)
    w = obj.uniform_weights()
    if obj.t_count < 2:
        return [CandidateSet(cs.indices, cs.weights) for cs in sets]

    f_curr = obj.value(w)
    step = cfg.step_size
    for _ in range(cfg.max_iters):
        g = obj.gradient(w)
        while True:
            proposal = obj.project(w - step * g)
            f_new = obj.value(proposal)
            if f_new <= f_curr or step < _MIN_STEP:
                break
            step *= 0.5
        if f_new > f_curr:
            break
        improved = f_curr - f_new
        w, f_curr = proposal, f_new
        if improved < cfg.tol:
            break

    out = []
    for t, cs in enumerate(sets):
        weights = w[t, : cs.k]
        total = weights.sum()
        weights = weights / total if total > 0 else np.full(cs.k, 1.0 / cs.k)
        out.append(CandidateSet(cs.indices, tuple(weights.tolist())))
    return out


def roughness(seq: FeatureSequence) -> float:
    """Mean consecutive-frame cosine distance; proxy for audible trembling.

    Pairs containing a zero-norm frame are skipped; returns 0.0 when no
    pair survives.
    """
    if seq.frame_count < 2:
        raise ValueError("need at least 2 frames")
    frames = seq.frames.astype(np.float64)
    norms = np.linalg.norm(frames, axis=1)
    a, b = frames[:-1], frames[1:]
    na, nb = norms[:-1], norms[1:]
    keep = (na > 0) & (nb > 0)
    if not np.any(keep):
        return 0.0
    sims = np.sum(a[keep] * b[keep], axis=1) / (na[keep] * nb[keep])
    return float(np.mean(1.0 - sims))

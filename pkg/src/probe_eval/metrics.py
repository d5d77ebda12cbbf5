"""Rank transformation, popularity weighting, and aggregation.

The rank transformer maps an integer rank r to a score r**(-alpha), where
alpha sets how severely non-top ranks are penalized (alpha=1 reproduces
the reciprocal-rank transform, alpha=-1 the raw rank).  The affine variant
rescales so rank 1 scores exactly 1 and rank |E| scores exactly 0, keeping
the full [0, 1] range regardless of alpha or entity count.  Aggregation is
a weighted mean with weights (epsilon + popularity)**(-beta), so beta > 0
down-weights queries whose gold entity was frequent in training.

All reductions use math.fsum (exactly rounded), so every metric here is
bit-identical under record permutation and under any parallel chunking of
the transform step.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .ranking import RankRecord

DEFAULT_HITS_KS = (1, 3, 10)

# Chunk size for optional threaded transforms; results are independent of it.
_CHUNK = 8192


@dataclass(frozen=True)
class MetricConfig:
    """Evaluation knobs: sharpness, bias robustness, and the affine switch.

    entity_count is required in affine mode (it is the rescaling anchor);
    alpha must be positive whenever scores are aggregated, in either mode.
    """

    alpha: float = 1.0
    beta: float = 0.0
    epsilon: float = 1.0
    affine: bool = True
    entity_count: int | None = None

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValidationError(
                f"alpha must be > 0 for aggregated scoring, got {self.alpha} "
                "(negative-alpha transforms are available through rt_raw)")
        if self.epsilon <= 0:
            raise ValidationError(f"epsilon must be > 0, got {self.epsilon}")
        if self.beta < 0:
            raise ValidationError(f"beta must be >= 0, got {self.beta}")
        if self.affine:
            if self.entity_count is None:
                raise ValidationError("affine mode requires entity_count")
            if self.entity_count < 2:
                raise ValidationError(
                    f"affine mode requires entity_count >= 2, got {self.entity_count}")

    def with_cell(self, alpha: float, beta: float) -> "MetricConfig":
        return replace(self, alpha=alpha, beta=beta)

    def to_json_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "epsilon": self.epsilon,
            "affine": self.affine,
            "entity_count": self.entity_count,
        }


def rt_raw(rank: int, alpha: float) -> float:
    """Transform a rank to rank**(-alpha).

    Accepts any alpha so the degenerate forms stay reachable (alpha=1:
    reciprocal rank; alpha=-1: the rank itself).
    """
    if rank < 1:
        raise ValidationError(f"rank must be >= 1, got {rank}")
    return float(rank) ** -alpha


def _affine_denominator(alpha: float, n_entities: int) -> float:
    if alpha <= 0:
        raise ValidationError(f"affine transform requires alpha > 0, got {alpha}")
    if n_entities < 2:
        raise ValidationError(f"affine transform requires n_entities >= 2, got {n_entities}")
    denom = 1.0 - float(n_entities) ** -alpha
    if denom == 0.0:
        raise ValidationError(
            f"alpha={alpha} underflows the affine denominator for n_entities={n_entities}")
    return denom


def rt_affine(rank: int, alpha: float, n_entities: int) -> float:
    """Affine-rescaled transform: exactly 1.0 at rank 1, exactly 0.0 at rank n."""
    denom = _affine_denominator(alpha, n_entities)
    if rank < 1 or rank > n_entities:
        raise ValidationError(f"rank must be in [1, {n_entities}], got {rank}")
    return (rt_raw(rank, alpha) - 1.0) / denom + 1.0


def weight(delta: int, beta: float, epsilon: float) -> float:
    """Popularity weight (epsilon + delta)**(-beta); strictly positive."""
    if epsilon <= 0:
        raise ValidationError(f"epsilon must be > 0, got {epsilon}")
    if beta < 0:
        raise ValidationError(f"beta must be >= 0, got {beta}")
    if delta < 0:
        raise ValidationError(f"popularity must be >= 0, got {delta}")
    return (epsilon + delta) ** -beta


@dataclass(frozen=True)
class ScoreSet:
    """Transformed scores and their positive weights, index-aligned."""

    scores: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        weights = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "weights", weights)
        if scores.shape != weights.shape or scores.ndim != 1:
            raise ValidationError(
                f"scores and weights must be 1-d and equal length, "
                f"got {scores.shape} vs {weights.shape}")


def aggregate(score_set: ScoreSet) -> float:
    """Weighted mean sum(w*c)/sum(w) with exactly-rounded summation."""
    if len(score_set.scores) == 0:
        raise ValidationError("cannot aggregate an empty score set")
    if not np.all(score_set.weights > 0):
        raise ValidationError("all weights must be > 0")
    return _weighted_mean(score_set.scores, score_set.weights)


def _weighted_mean(scores: np.ndarray, weights: np.ndarray) -> float:
    return math.fsum(weights * scores) / math.fsum(weights)


def _records_arrays(records: Sequence[RankRecord]) -> tuple[np.ndarray, np.ndarray]:
    ranks = np.fromiter((r.rank for r in records), dtype=np.int64, count=len(records))
    pops = np.fromiter((r.query.gold_popularity for r in records),
                       dtype=np.int64, count=len(records))
    return ranks, pops


def _chunked(fn, arr: np.ndarray, threads: int) -> np.ndarray:
    """Apply an elementwise transform, optionally across a thread pool.

    The output is a concatenation in input order of per-chunk results, so
    it is bit-identical for every thread count.
    """
    if threads <= 1 or len(arr) <= _CHUNK:
        return fn(arr)
    chunks = [arr[i:i + _CHUNK] for i in range(0, len(arr), _CHUNK)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return np.concatenate(list(pool.map(fn, chunks)))


def transform_ranks(ranks: np.ndarray, config: MetricConfig, threads: int = 1) -> np.ndarray:
    """Vectorized rank transform under the config's mode.

    Aggregated scoring requires alpha > 0 in both modes; use rt_raw
    directly for the degenerate negative-alpha forms.
    """
    if config.alpha <= 0:
        raise ValidationError(f"scoring requires alpha > 0, got {config.alpha}")
    if len(ranks) and int(ranks.min()) < 1:
        raise ValidationError(f"ranks must be >= 1, got {int(ranks.min())}")
    if config.affine:
        n = config.entity_count
        if len(ranks) and int(ranks.max()) > n:
            raise ValidationError(
                f"rank {int(ranks.max())} exceeds entity_count {n} in affine mode")
        denom = _affine_denominator(config.alpha, n)
        return _chunked(
            lambda a: (np.power(a.astype(np.float64), -config.alpha) - 1.0) / denom + 1.0,
            ranks, threads)
    return _chunked(
        lambda a: np.power(a.astype(np.float64), -config.alpha), ranks, threads)


def popularity_weights(pops: np.ndarray, config: MetricConfig, threads: int = 1) -> np.ndarray:
    if len(pops) and int(pops.min()) < 0:
        raise ValidationError("popularities must be >= 0")
    eps, beta = config.epsilon, config.beta
    return _chunked(lambda a: np.power(eps + a.astype(np.float64), -beta), pops, threads)


def probe_score(records: Sequence[RankRecord], config: MetricConfig,
                threads: int = 1) -> float:
    """Transform each record's rank, weight it by gold popularity, aggregate.

    Deterministic regardless of record order, thread count, and chunking.
    """
    if not records:
        raise ValidationError("cannot score an empty record list")
    ranks, pops = _records_arrays(records)
    return _probe_from_arrays(ranks, pops, config, threads)


def _probe_from_arrays(ranks: np.ndarray, pops: np.ndarray, config: MetricConfig,
                       threads: int = 1) -> float:
    scores = transform_ranks(ranks, config, threads)
    weights = popularity_weights(pops, config, threads)
    return _weighted_mean(scores, weights)


def mr(records: Sequence[RankRecord]) -> float:
    """Arithmetic mean of the ranks."""
    if not records:
        raise ValidationError("cannot compute mean rank of no records")
    return math.fsum(r.rank for r in records) / len(records)


def mrr(records: Sequence[RankRecord]) -> float:
    """Mean reciprocal rank."""
    if not records:
        raise ValidationError("cannot compute MRR of no records")
    return math.fsum(1.0 / r.rank for r in records) / len(records)


def hits_at_k(records: Sequence[RankRecord], k: int) -> float:
    """Fraction of records ranked within the top k."""
    if not records:
        raise ValidationError("cannot compute hits@k of no records")
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    return sum(1 for r in records if r.rank <= k) / len(records)


@dataclass(frozen=True)
class Stratum:
    """One popularity bucket [lo, hi) -- hi None means unbounded."""

    lo: int
    hi: int | None
    count: int
    score: float | None

    def to_json_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "count": self.count, "score": self.score}


def default_bucket_edges(delta_max: int) -> list[int]:
    """Power-of-two popularity edges: 0, 1, 2, 4, ... up to >= delta_max."""
    edges = [0]
    if delta_max >= 1:
        top = max(0, math.ceil(math.log2(delta_max))) if delta_max > 1 else 0
        edges.extend(2 ** k for k in range(top + 1))
    return edges


def stratified_breakdown(records: Sequence[RankRecord], bucket_edges: Sequence[int],
                         config: MetricConfig) -> list[Stratum]:
    """Per-popularity-bucket record counts and scores.

    Buckets are half-open [e0,e1), ..., [e_last, inf).  Scores inside each
    bucket are computed with beta forced to 0, so the breakdown shows the
    raw per-group accuracy rather than re-weighted values.  Empty buckets
    report score None.
    """
    edges = list(bucket_edges)
    if not edges or edges[0] != 0:
        raise ValidationError(f"bucket edges must start at 0, got {edges[:1]}")
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValidationError(f"bucket edges must be strictly ascending, got {edges}")

    unweighted = config.with_cell(config.alpha, 0.0)
    buckets: list[list[RankRecord]] = [[] for _ in edges]
    for rec in records:
        pop = rec.query.gold_popularity
        idx = int(np.searchsorted(edges, pop, side="right")) - 1
        buckets[idx].append(rec)

    out: list[Stratum] = []
    for i, bucket in enumerate(buckets):
        hi = edges[i + 1] if i + 1 < len(edges) else None
        score = probe_score(bucket, unweighted) if bucket else None
        out.append(Stratum(lo=edges[i], hi=hi, count=len(bucket), score=score))
    return out

"""Parametric synthetic rank-record sets and an independent scoring oracle.

Profiles either replay an explicit rank multiset or sample a two-part
mixture: rank 1 with probability p1, and a truncated geometric tail over
ranks 2..n_entities.  Sampling uses NumPy's PCG64 generator (named,
seedable, portable), so a (profile, n, seed) triple always reproduces the
same records.

oracle_probe re-derives the aggregate score in one naive pure-Python loop,
sharing no code with the metrics module; it exists to cross-check the main
implementation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import ValidationError
from .ranking import Direction, Query, RankRecord

_TAIL_SUM_TOL = 1e-9


@dataclass(frozen=True)
class PopularityRule:
    """Popularity draw for one rank stratum: a constant or an inclusive range."""

    constant: int | None = None
    low: int | None = None
    high: int | None = None

    def __post_init__(self):
        if self.constant is not None:
            if self.low is not None or self.high is not None:
                raise ValidationError("popularity rule is either constant or a range")
            if self.constant < 0:
                raise ValidationError(f"popularity must be >= 0, got {self.constant}")
        else:
            if self.low is None or self.high is None:
                raise ValidationError("range popularity rule needs low and high")
            if not (0 <= self.low <= self.high):
                raise ValidationError(f"bad popularity range [{self.low}, {self.high}]")

    def draw(self, rng: np.random.Generator) -> int:
        if self.constant is not None:
            return self.constant
        return int(rng.integers(self.low, self.high + 1))


@dataclass(frozen=True)
class PopularityStratum:
    """Rule applied to ranks <= max_rank (None = all remaining ranks)."""

    rule: PopularityRule
    max_rank: int | None = None


@dataclass(frozen=True)
class ExplicitProfile:
    """Replay an exact rank multiset with per-record popularities."""

    ranks: tuple[int, ...]
    popularities: tuple[int, ...] | None = None

    def __post_init__(self):
        if not self.ranks:
            raise ValidationError("explicit profile needs at least one rank")
        if any(r < 1 for r in self.ranks):
            raise ValidationError("explicit profile ranks must be >= 1")
        if self.popularities is not None:
            if len(self.popularities) != len(self.ranks):
                raise ValidationError(
                    f"popularities length {len(self.popularities)} != "
                    f"ranks length {len(self.ranks)}")
            if any(p < 0 for p in self.popularities):
                raise ValidationError("popularities must be >= 0")


@dataclass(frozen=True)
class MixtureProfile:
    """Rank 1 w.p. p1; truncated geometric tail over ranks 2..n_entities.

    The tail pmf is g*(1-g)**(r-2) normalized over the truncation window,
    scaled by (1 - p1); its total mass is checked against 1 - p1.
    """

    p1: float
    tail_rate: float
    n_entities: int
    popularity_model: tuple[PopularityStratum, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not 0.0 <= self.p1 <= 1.0:
            raise ValidationError(f"p1 must be in [0, 1], got {self.p1}")
        if not 0.0 < self.tail_rate <= 1.0:
            raise ValidationError(f"tail_rate must be in (0, 1], got {self.tail_rate}")
        if self.n_entities < 2:
            raise ValidationError(f"n_entities must be >= 2, got {self.n_entities}")
        strata = self.popularity_model
        bounded = [s.max_rank for s in strata if s.max_rank is not None]
        if any(b < 1 for b in bounded):
            raise ValidationError("stratum max_rank must be >= 1")
        if bounded != sorted(bounded):
            raise ValidationError("stratum max_rank values must ascend")

    def pmf(self) -> np.ndarray:
        """Probability of each rank 1..n_entities."""
        ranks = np.arange(2, self.n_entities + 1, dtype=np.float64)
        g = self.tail_rate
        tail = g * np.power(1.0 - g, ranks - 2.0)
        total = tail.sum()
        if total <= 0:  # g == 1 gives a point mass at rank 2
            tail = np.zeros_like(tail)
            tail[0] = 1.0
            total = 1.0
        tail = tail / total * (1.0 - self.p1)
        if abs(tail.sum() - (1.0 - self.p1)) > _TAIL_SUM_TOL:
            raise ValidationError(
                f"tail probabilities sum to {tail.sum()}, expected {1.0 - self.p1}")
        return np.concatenate(([self.p1], tail))

    def popularity_for(self, rank: int, rng: np.random.Generator) -> int:
        for stratum in self.popularity_model:
            if stratum.max_rank is None or rank <= stratum.max_rank:
                return stratum.rule.draw(rng)
        return 0


RankProfile = Union[ExplicitProfile, MixtureProfile]


def profile_from_dict(data: dict) -> RankProfile:
    kind = data.get("kind")
    if kind == "explicit":
        pops = data.get("popularities")
        return ExplicitProfile(ranks=tuple(data["ranks"]),
                               popularities=tuple(pops) if pops is not None else None)
    if kind == "mixture":
        strata = tuple(
            PopularityStratum(
                rule=PopularityRule(constant=entry.get("constant"),
                                    low=entry.get("low"), high=entry.get("high")),
                max_rank=entry.get("max_rank"))
            for entry in data.get("popularity_model", []))
        return MixtureProfile(p1=data["p1"], tail_rate=data["tail_rate"],
                              n_entities=data["n_entities"], popularity_model=strata)
    raise ValidationError(f"profile kind must be 'explicit' or 'mixture', got {kind!r}")


def load_profile(path: str | Path) -> RankProfile:
    with Path(path).open("r", encoding="utf-8") as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid profile JSON: {exc.msg}") from None
    return profile_from_dict(data)


def _record(i: int, rank: int, popularity: int) -> RankRecord:
    # deterministic query labels keyed by position so records from two
    # profiles with the same n match query-for-query in sweeps
    return RankRecord(
        query=Query(head=f"q{i:06d}", relation="synthetic", tail=f"e{i:06d}",
                    direction=Direction.TAIL, gold_popularity=popularity),
        rank=rank)


def generate(profile: RankProfile, n: int, seed: int) -> list[RankRecord]:
    """Sample n records from the profile; pure function of (profile, n, seed)."""
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    if seed < 0:
        raise ValidationError(f"seed must be >= 0, got {seed}")

    if isinstance(profile, ExplicitProfile):
        if n != len(profile.ranks):
            raise ValidationError(
                f"explicit profile has {len(profile.ranks)} ranks but n={n}")
        pops = profile.popularities or (0,) * n
        return [_record(i, rank, pop)
                for i, (rank, pop) in enumerate(zip(profile.ranks, pops))]

    rng = np.random.default_rng(seed)
    ranks = rng.choice(profile.n_entities, size=n, p=profile.pmf()) + 1
    return [_record(i, int(rank), profile.popularity_for(int(rank), rng))
            for i, rank in enumerate(ranks)]


def oracle_probe(records: Sequence[RankRecord], config) -> float:
    """Direct single-loop re-derivation of the aggregate score.

    Naive left-to-right summation on purpose: at the sizes tested, any
    disagreement with the main path beyond float noise flags a real bug.
    """
    if not records:
        raise ValidationError("cannot score an empty record list")
    alpha = config.alpha
    if alpha <= 0:
        raise ValidationError(f"scoring requires alpha > 0, got {alpha}")
    if config.epsilon <= 0:
        raise ValidationError(f"epsilon must be > 0, got {config.epsilon}")
    if config.affine:
        n = config.entity_count
        if n is None or n < 2:
            raise ValidationError("affine mode requires entity_count >= 2")
        denominator = 1.0 - n ** -alpha
        if denominator == 0.0:
            raise ValidationError("affine denominator underflowed")

    numerator = 0.0
    total_weight = 0.0
    for rec in records:
        if rec.rank < 1:
            raise ValidationError(f"rank must be >= 1, got {rec.rank}")
        score = float(rec.rank) ** -alpha
        if config.affine:
            if rec.rank > config.entity_count:
                raise ValidationError(
                    f"rank {rec.rank} exceeds entity_count {config.entity_count}")
            score = (score - 1.0) / denominator + 1.0
        w = (config.epsilon + rec.query.gold_popularity) ** -config.beta
        numerator += w * score
        total_weight += w
    return numerator / total_weight

"""Grid sweeps over (alpha, beta), ranking-flip detection, and exports.

A sweep scores every model at every grid cell, orders models per cell
(score descending, lexicographic on exact-within-tolerance ties), and
reports every model pair whose strict relative order at a cell is the
reverse of its strict order at the base cell.  Scores closer than
TIE_TOLERANCE are ties, never flips, to keep the report robust to float
noise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .metrics import MetricConfig, _probe_from_arrays, _records_arrays
from .ranking import RankRecord

TIE_TOLERANCE = 1e-12

DEFAULT_ALPHAS = (0.25, 0.5, 1.0, 2.0)
DEFAULT_BETAS = (0.0, 0.2, 0.4, 0.8)
DEFAULT_BASE = (1.0, 0.0)

DEFAULT_RANK_BINS = (1, 2, 6, 11, 101)

Cell = tuple[float, float]


@dataclass(frozen=True)
class SweepGrid:
    """The (alpha, beta) cells to evaluate, plus the reference cell."""

    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    betas: tuple[float, ...] = DEFAULT_BETAS
    base: Cell = DEFAULT_BASE

    def __post_init__(self):
        if not self.alphas or not self.betas:
            raise ValidationError("grid needs at least one alpha and one beta")
        if any(a <= 0 for a in self.alphas):
            raise ValidationError(f"alphas must be > 0, got {self.alphas}")
        if any(b < 0 for b in self.betas):
            raise ValidationError(f"betas must be >= 0, got {self.betas}")
        if list(self.alphas) != sorted(set(self.alphas)):
            raise ValidationError(f"alphas must be strictly ascending, got {self.alphas}")
        if list(self.betas) != sorted(set(self.betas)):
            raise ValidationError(f"betas must be strictly ascending, got {self.betas}")
        if self.base[0] not in self.alphas or self.base[1] not in self.betas:
            raise ValidationError(f"base cell {self.base} is outside the grid")

    def cells(self) -> list[Cell]:
        return [(a, b) for a in self.alphas for b in self.betas]


@dataclass(frozen=True)
class CellRanking:
    """Model order at one cell; tie groups flag indistinguishable scores."""

    cell: Cell
    order: tuple[str, ...]
    tie_groups: tuple[tuple[str, ...], ...] = ()

    def to_json_dict(self) -> dict:
        return {
            "alpha": self.cell[0],
            "beta": self.cell[1],
            "order": list(self.order),
            "ties": [list(group) for group in self.tie_groups],
        }


@dataclass(frozen=True)
class Flip:
    """A model pair whose strict order at `cell` reverses the base order."""

    cell: Cell
    pair: tuple[str, str]
    base_order: tuple[str, str]  # (winner, loser) at the base cell
    cell_order: tuple[str, str]

    def to_json_dict(self) -> dict:
        return {
            "alpha": self.cell[0],
            "beta": self.cell[1],
            "pair": list(self.pair),
            "base_order": list(self.base_order),
            "cell_order": list(self.cell_order),
        }


@dataclass
class SweepResult:
    models: list[str]
    grid: SweepGrid
    cells: dict[Cell, dict[str, float]]
    rankings: dict[Cell, CellRanking] = field(default_factory=dict)
    flips: list[Flip] = field(default_factory=list)

    def score(self, model: str, cell: Cell) -> float:
        return self.cells[cell][model]


def _rank_cell(cell: Cell, scores: Mapping[str, float]) -> CellRanking:
    order = sorted(scores, key=lambda m: (-scores[m], m))
    groups: list[tuple[str, ...]] = []
    current = [order[0]] if order else []
    for prev, name in zip(order, order[1:]):
        if abs(scores[prev] - scores[name]) <= TIE_TOLERANCE:
            current.append(name)
        else:
            if len(current) > 1:
                groups.append(tuple(current))
            current = [name]
    if len(current) > 1:
        groups.append(tuple(current))
    return CellRanking(cell=cell, order=tuple(order), tie_groups=tuple(groups))


def _strict_order(a: float, b: float) -> int:
    """-1, 0, +1 comparison with the tie tolerance applied."""
    if abs(a - b) <= TIE_TOLERANCE:
        return 0
    return 1 if a > b else -1


def find_flips(result: SweepResult) -> list[Flip]:
    """Pairs whose strict base-cell order strictly reverses at another cell."""
    base_scores = result.cells[result.grid.base]
    names = sorted(result.models)
    flips: list[Flip] = []
    for cell in result.grid.cells():
        if cell == result.grid.base:
            continue
        cell_scores = result.cells[cell]
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                at_base = _strict_order(base_scores[a], base_scores[b])
                at_cell = _strict_order(cell_scores[a], cell_scores[b])
                if at_base != 0 and at_cell != 0 and at_base != at_cell:
                    winner_base = a if at_base > 0 else b
                    winner_cell = a if at_cell > 0 else b
                    flips.append(Flip(
                        cell=cell, pair=(a, b),
                        base_order=(winner_base, b if winner_base == a else a),
                        cell_order=(winner_cell, b if winner_cell == a else a)))
    return flips


def run_sweep(models: Mapping[str, Sequence[RankRecord]], grid: SweepGrid,
              config: MetricConfig, threads: int = 1) -> SweepResult:
    """Score every model at every cell, then derive rankings and flips.

    All models must cover the same query set; only alpha and beta vary
    across cells, everything else comes from the base config.
    """
    if not models:
        raise ValidationError("sweep needs at least one model")
    _check_same_queries(models)

    arrays = {name: _records_arrays(records) for name, records in models.items()}
    cells: dict[Cell, dict[str, float]] = {}
    for cell in grid.cells():
        cell_config = config.with_cell(*cell)
        cells[cell] = {
            name: _probe_from_arrays(ranks, pops, cell_config, threads)
            for name, (ranks, pops) in sorted(arrays.items())
        }

    result = SweepResult(models=sorted(models), grid=grid, cells=cells)
    result.rankings = {cell: _rank_cell(cell, scores) for cell, scores in cells.items()}
    result.flips = find_flips(result)
    return result


def _check_same_queries(models: Mapping[str, Sequence[RankRecord]]) -> None:
    names = sorted(models)
    reference = names[0]
    ref_keys = sorted(r.query.key() for r in models[reference])
    for name in names[1:]:
        keys = sorted(r.query.key() for r in models[name])
        if len(keys) != len(ref_keys):
            raise ValidationError(
                f"model {name!r} has {len(keys)} records but {reference!r} "
                f"has {len(ref_keys)}")
        for ref_key, key in zip(ref_keys, keys):
            if ref_key != key:
                raise ValidationError(
                    f"models {reference!r} and {name!r} rank different query sets; "
                    f"first divergence: {ref_key} vs {key}")


@dataclass(frozen=True)
class RankBin:
    """Half-open rank bin [lo, hi); hi None means unbounded."""

    lo: int
    hi: int | None
    count: int


def rank_histogram(records: Sequence[RankRecord],
                   bins: Sequence[int] = DEFAULT_RANK_BINS) -> list[RankBin]:
    """Count records per rank bin; the final bin is [last edge, inf)."""
    edges = list(bins)
    if not edges or edges[0] != 1:
        raise ValidationError(f"rank bins must start at 1, got {edges[:1]}")
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValidationError(f"rank bins must be strictly ascending, got {edges}")
    counts = [0] * len(edges)
    for rec in records:
        counts[int(np.searchsorted(edges, rec.rank, side="right")) - 1] += 1
    out = []
    for i, count in enumerate(counts):
        hi = edges[i + 1] if i + 1 < len(edges) else None
        out.append(RankBin(lo=edges[i], hi=hi, count=count))
    return out


def surface_export(result: SweepResult, path: str | Path) -> None:
    """Write the long-format score surface: model,alpha,beta,score.

    Scores carry 17 significant digits so parsing the file reproduces the
    in-memory values exactly.
    """
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["model", "alpha", "beta", "score"])
        for model in result.models:
            for alpha in result.grid.alphas:
                for beta in result.grid.betas:
                    score = result.cells[(alpha, beta)][model]
                    writer.writerow([model, repr(alpha), repr(beta), f"{score:.17g}"])


def load_surface(path: str | Path) -> dict[tuple[str, float, float], float]:
    """Parse a surface CSV back into {(model, alpha, beta): score}."""
    out: dict[tuple[str, float, float], float] = {}
    with Path(path).open("r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        for row in reader:
            out[(row["model"], float(row["alpha"]), float(row["beta"]))] = \
                float(row["score"])
    return out


def histogram_export(per_model: Mapping[str, Sequence[RankBin]],
                     path: str | Path) -> None:
    """Write per-model rank histograms: model,lo,hi,count (hi empty = inf)."""
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["model", "lo", "hi", "count"])
        for model in sorted(per_model):
            for rank_bin in per_model[model]:
                hi = "" if rank_bin.hi is None else rank_bin.hi
                writer.writerow([model, rank_bin.lo, hi, rank_bin.count])

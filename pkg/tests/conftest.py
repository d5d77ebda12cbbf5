"""Shared fixtures, independent test oracles, and acceptance reporting."""

from __future__ import annotations

import numpy as np
import pytest

from probe_eval.ranking import Direction, Query, RankRecord


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call":
        print(f"[acceptance] {name}: {report.outcome.upper()}")
    elif report.when == "setup" and report.skipped:
        print(f"[acceptance] {name}: SKIPPED")


def make_record(rank: int, popularity: int = 0, index: int = 0,
                direction: Direction = Direction.TAIL) -> RankRecord:
    """A standalone rank record with deterministic query labels."""
    return RankRecord(
        query=Query(head=f"h{index}", relation="r", tail=f"t{index}",
                    direction=direction, gold_popularity=popularity),
        rank=rank)


def make_records(ranks, pops=None) -> list[RankRecord]:
    pops = pops if pops is not None else [0] * len(ranks)
    return [make_record(r, p, i) for i, (r, p) in enumerate(zip(ranks, pops))]


def brute_force_rank(scores: np.ndarray, gold: int, filter_ids: set[int],
                     policy: str, draw: int | None = None) -> int:
    """Full-sort rank oracle: sort allowed candidates, scan the tie block.

    Independent of the production path: no counting shortcut, just the
    positions the gold could occupy after a descending sort.
    """
    allowed = [i for i in range(len(scores))
               if i not in filter_ids and i != gold]
    ordered = sorted(allowed, key=lambda i: -scores[i])
    gold_score = scores[gold]
    first = 1
    for i in ordered:
        if scores[i] > gold_score:
            first += 1
    last = first
    for i in ordered:
        if scores[i] == gold_score:
            last += 1
    if policy == "optimistic":
        return first
    if policy == "pessimistic":
        return last
    if policy == "average":
        # midpoint of the tie block, rounded half-up
        twice = first + last
        return (twice + 1) // 2
    if policy == "random":
        assert draw is not None
        return first + draw
    raise AssertionError(policy)


@pytest.fixture
def toy_dataset(tmp_path):
    """Small three-split dataset on disk; returns its directory."""
    directory = tmp_path / "toyds"
    directory.mkdir()
    (directory / "train.txt").write_text(
        "a\tr1\tb\n"
        "a\tr1\tc\n"
        "b\tr2\tc\n"
        "c\tr1\tb\n",
        encoding="utf-8")
    (directory / "valid.txt").write_text("a\tr2\tb\n", encoding="utf-8")
    (directory / "test.txt").write_text("d\tr1\tb\na\tr2\tc\n", encoding="utf-8")
    return directory

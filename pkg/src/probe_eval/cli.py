"""Unified command line: stats, rank, eval, sweep, compare, synth.

Exit codes: 0 success, 1 validation/parse/usage errors, 2 I/O errors.
Diagnostics go to stderr with a single-line machine-parseable prefix
(``error[<category>]: message``); data goes to files or stdout.  Every
output file gets a sidecar ``*.manifest.json`` recording the command,
resolved configuration, input digests, tool version, and timestamp, so
reruns on identical inputs produce byte-identical data files and
manifests differing only in the timestamp.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from . import __version__
from .errors import ParseError, ValidationError
from .kg_data import (KnowledgeGraph, PopularityIndex, dataset_stats,
                      export_vocabulary, load_dataset)
from .metrics import (DEFAULT_HITS_KS, MetricConfig, default_bucket_edges,
                      hits_at_k, mr, mrr, probe_score, stratified_breakdown)
from .ranking import (RankRecord, TiePolicy, load_rank_file, rank_score_file,
                      write_rank_file)
from .sweep import (DEFAULT_RANK_BINS, SweepGrid, histogram_export,
                    rank_histogram, run_sweep, surface_export)
from .synthetic import generate, load_profile

PROG = "probe-eval"

logger = logging.getLogger(__name__)


class _UsageError(ValidationError):
    """Bad command line; prints usage before the error line."""

    def __init__(self, message: str, usage: str = ""):
        super().__init__(message)
        self.usage = usage


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); remap to exit 1
        raise _UsageError(message, usage=self.format_usage())


@dataclass
class RunManifest:
    """Reproducibility record accompanying every output file."""

    command: str
    argv: list[str]
    config: dict
    inputs: dict[str, str] = field(default_factory=dict)
    tool: str = PROG
    version: str = __version__

    def add_input(self, path: str | Path) -> None:
        digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
        self.inputs[str(path)] = f"sha256:{digest}"

    def write(self, path: str | Path) -> None:
        payload = {
            "tool": self.tool,
            "version": self.version,
            "command": self.command,
            "argv": self.argv,
            "config": self.config,
            "inputs": self.inputs,
            "created_utc": datetime.now(timezone.utc).isoformat(),
        }
        _write_json(payload, path)


def _write_json(payload, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _dump_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _parse_floats(text: str, flag: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError:
        raise ValidationError(f"{flag} expects comma-separated numbers, got {text!r}") \
            from None


def _parse_ints(text: str, flag: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise ValidationError(f"{flag} expects comma-separated integers, got {text!r}") \
            from None


def _parse_model_files(pairs: Sequence[str]) -> dict[str, Path]:
    models: dict[str, Path] = {}
    for pair in pairs:
        name, sep, path = pair.partition("=")
        if not sep or not name or not path:
            raise ValidationError(f"--ranks expects name=path entries, got {pair!r}")
        if name in models:
            raise ValidationError(f"duplicate model name {name!r}")
        models[name] = Path(path)
    return models


def _dataset_args(parser: _Parser, required: bool = True) -> None:
    parser.add_argument("--dataset", metavar="DIR", required=required,
                        help="directory holding the three split files")
    parser.add_argument("--train-file", default="train.txt", help="train split filename")
    parser.add_argument("--valid-file", default="valid.txt", help="valid split filename")
    parser.add_argument("--test-file", default="test.txt", help="test split filename")


def _metric_args(parser: _Parser) -> None:
    parser.add_argument("--alpha", type=float, default=1.0,
                        help="sharpness control factor (> 0)")
    parser.add_argument("--beta", type=float, default=0.0,
                        help="popularity-bias robustness factor (>= 0)")
    parser.add_argument("--epsilon", type=float, default=1.0,
                        help="division guard in the popularity weight (> 0)")
    parser.add_argument("--no-affine", action="store_true",
                        help="use the raw transform instead of the [0,1] affine form")
    parser.add_argument("--entities", type=int, default=None, metavar="N",
                        help="override the entity count (required without --dataset)")


def _load_dataset_from_args(args) -> tuple[KnowledgeGraph, PopularityIndex]:
    return load_dataset(args.dataset,
                        filenames=(args.train_file, args.valid_file, args.test_file))


def _resolve_entity_count(args, graph: KnowledgeGraph | None) -> int | None:
    if args.entities is not None:
        if args.entities < 2:
            raise ValidationError(f"--entities must be >= 2, got {args.entities}")
        return args.entities
    if graph is not None:
        return graph.n_entities
    if not args.no_affine:
        raise ValidationError("affine mode needs --dataset or --entities "
                              "to fix the entity count")
    return None


def _tie_policy(args) -> TiePolicy:
    return TiePolicy(args.tie, seed=args.seed)


def _strata_edges(choice: str, records: Sequence[RankRecord],
                  pop: PopularityIndex | None) -> list[int]:
    if choice == "auto":
        if pop is not None:
            delta_max = pop.max
        else:
            delta_max = max((r.query.gold_popularity for r in records), default=0)
        return default_bucket_edges(delta_max)
    return list(_parse_ints(choice, "--strata"))


def _eval_metrics(records: list[RankRecord], config: MetricConfig,
                  hits_ks: Sequence[int], strata_edges: Sequence[int],
                  threads: int) -> dict:
    return {
        "probe": probe_score(records, config, threads=threads),
        "mr": mr(records),
        "mrr": mrr(records),
        "hits": {str(k): hits_at_k(records, k) for k in hits_ks},
        "strata": [s.to_json_dict()
                   for s in stratified_breakdown(records, strata_edges, config)],
    }


def _metrics_csv(payload: dict) -> str:
    lines = ["metric,key,value"]
    for name in ("probe", "mr", "mrr"):
        lines.append(f"{name},,{payload[name]:.17g}")
    for k, value in payload["hits"].items():
        lines.append(f"hits,{k},{value:.17g}")
    for stratum in payload["strata"]:
        key = f"{stratum['lo']}-{stratum['hi'] if stratum['hi'] is not None else 'inf'}"
        lines.append(f"stratum_count,{key},{stratum['count']}")
        score = stratum["score"]
        lines.append(f"stratum_score,{key},{'' if score is None else format(score, '.17g')}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_stats(args, argv: list[str]) -> int:
    graph, pop = _load_dataset_from_args(args)
    stats = dataset_stats(graph, pop)
    if args.export_vocab:
        export_vocabulary(graph, args.export_vocab)
    text = (_dump_json(stats.to_json_dict()) if args.format == "json"
            else stats.to_text() + "\n")
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        manifest = RunManifest("stats", argv, config={"format": args.format})
        for name in (args.train_file, args.valid_file, args.test_file):
            manifest.add_input(Path(args.dataset) / name)
        manifest.write(f"{args.out}.manifest.json")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_rank(args, argv: list[str]) -> int:
    graph, pop = _load_dataset_from_args(args)
    tie = _tie_policy(args)
    records = rank_score_file(args.scores, graph, pop, tie, raw=args.raw,
                              threads=args.threads, allow_partial=args.allow_partial)
    write_rank_file(records, args.out)
    manifest = RunManifest("rank", argv, config={
        "tie": tie.policy, "seed": tie.seed, "raw": args.raw, "threads": args.threads,
    })
    manifest.add_input(args.scores)
    for name in (args.train_file, args.valid_file, args.test_file):
        manifest.add_input(Path(args.dataset) / name)
    manifest.write(f"{args.out}.manifest.json")
    return 0


def _echo_config(config: MetricConfig, args) -> dict:
    # no execution details here (e.g. --threads): data outputs must be
    # byte-identical across thread counts; the manifest carries those
    echoed = config.to_json_dict()
    echoed["tie"] = args.tie  # provenance only: ranks are precomputed
    if args.seed is not None:
        echoed["seed"] = args.seed
    return echoed


def _cmd_eval(args, argv: list[str]) -> int:
    graph = pop = None
    if args.dataset:
        graph, pop = _load_dataset_from_args(args)
    records = load_rank_file(args.ranks, graph=graph, popularity=pop)
    if not records:
        raise ValidationError(f"rank file {args.ranks} holds no records")
    config = MetricConfig(alpha=args.alpha, beta=args.beta, epsilon=args.epsilon,
                          affine=not args.no_affine,
                          entity_count=_resolve_entity_count(args, graph))
    hits_ks = _parse_ints(args.hits, "--hits")
    edges = _strata_edges(args.strata, records, pop)
    payload = _eval_metrics(records, config, hits_ks, edges, args.threads)
    payload["config"] = _echo_config(config, args)

    text = (_metrics_csv(payload) if args.format == "csv" else _dump_json(payload))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        manifest = RunManifest("eval", argv, config={
            **payload["config"], "threads": args.threads})
        manifest.add_input(args.ranks)
        if args.dataset:
            for name in (args.train_file, args.valid_file, args.test_file):
                manifest.add_input(Path(args.dataset) / name)
        manifest.write(f"{args.out}.manifest.json")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_sweep(args, argv: list[str]) -> int:
    model_files = _parse_model_files(args.ranks)
    graph = pop = None
    if args.dataset:
        graph, pop = _load_dataset_from_args(args)
    models = {name: load_rank_file(path, graph=graph, popularity=pop)
              for name, path in model_files.items()}
    base = _parse_floats(args.base, "--base")
    if len(base) != 2:
        raise ValidationError(f"--base expects alpha,beta, got {args.base!r}")
    grid = SweepGrid(alphas=_parse_floats(args.alphas, "--alphas"),
                     betas=_parse_floats(args.betas, "--betas"),
                     base=base)
    config = MetricConfig(alpha=grid.base[0], beta=grid.base[1], epsilon=args.epsilon,
                          affine=not args.no_affine,
                          entity_count=_resolve_entity_count(args, graph))
    result = run_sweep(models, grid, config, threads=args.threads)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    surface_export(result, out_dir / "surface.csv")
    _write_json({
        "base": {"alpha": grid.base[0], "beta": grid.base[1]},
        "cells": [result.rankings[cell].to_json_dict() for cell in grid.cells()],
    }, out_dir / "rankings.json")
    _write_json([flip.to_json_dict() for flip in result.flips],
                out_dir / "flips.json")
    bins = _parse_ints(args.bins, "--bins") if args.bins else DEFAULT_RANK_BINS
    histogram_export({name: rank_histogram(records, bins)
                      for name, records in models.items()},
                     out_dir / "histogram.csv")

    manifest = RunManifest("sweep", argv, config={
        "alphas": list(grid.alphas), "betas": list(grid.betas),
        "base": list(grid.base), "epsilon": args.epsilon,
        "affine": not args.no_affine, "entity_count": config.entity_count,
        "threads": args.threads, "bins": list(bins),
    })
    for path in model_files.values():
        manifest.add_input(path)
    if args.dataset:
        for name in (args.train_file, args.valid_file, args.test_file):
            manifest.add_input(Path(args.dataset) / name)
    manifest.write(out_dir / "manifest.json")
    return 0


def _cmd_compare(args, argv: list[str]) -> int:
    model_files = _parse_model_files(args.ranks)
    if len(model_files) != 2:
        raise ValidationError(f"compare needs exactly 2 models, got {len(model_files)}")
    graph = pop = None
    if args.dataset:
        graph, pop = _load_dataset_from_args(args)
    config = MetricConfig(alpha=args.alpha, beta=args.beta, epsilon=args.epsilon,
                          affine=not args.no_affine,
                          entity_count=_resolve_entity_count(args, graph))
    hits_ks = _parse_ints(args.hits, "--hits")

    per_model_records = {}
    for name, path in model_files.items():
        records = load_rank_file(path, graph=graph, popularity=pop)
        if not records:
            raise ValidationError(f"rank file {path} holds no records")
        per_model_records[name] = records

    # one shared bucket scheme so the per-stratum rows align across models
    all_records = [r for records in per_model_records.values() for r in records]
    edges = _strata_edges(args.strata, all_records, pop)
    per_model = {name: _eval_metrics(records, config, hits_ks, edges, args.threads)
                 for name, records in per_model_records.items()}

    if args.format == "json":
        payload = {"config": _echo_config(config, args), "models": per_model}
        sys.stdout.write(_dump_json(payload))
        return 0

    names = list(per_model)
    rows: list[tuple[str, list[str]]] = []
    for metric in ("probe", "mr", "mrr"):
        rows.append((metric, [f"{per_model[n][metric]:.6f}" for n in names]))
    for k in hits_ks:
        rows.append((f"hits@{k}", [f"{per_model[n]['hits'][str(k)]:.6f}" for n in names]))
    strata = per_model[names[0]]["strata"]
    for i, stratum in enumerate(strata):
        hi = stratum["hi"] if stratum["hi"] is not None else "inf"
        label = f"strata[{stratum['lo']},{hi})"
        cells = []
        for n in names:
            entry = per_model[n]["strata"][i]
            score = "-" if entry["score"] is None else f"{entry['score']:.6f}"
            cells.append(f"{score} (n={entry['count']})")
        rows.append((label, cells))

    width = max(len(label) for label, _ in rows)
    col = max(max(len(c) for c in cells) for _, cells in rows)
    col = max(col, *(len(n) for n in names))
    header = f"{'metric':<{width}}  " + "  ".join(f"{n:>{col}}" for n in names)
    lines = [header]
    for label, cells in rows:
        lines.append(f"{label:<{width}}  " + "  ".join(f"{c:>{col}}" for c in cells))
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


def _cmd_synth(args, argv: list[str]) -> int:
    profile = load_profile(args.profile)
    records = generate(profile, args.n, args.seed)
    write_rank_file(records, args.out)
    manifest = RunManifest("synth", argv,
                           config={"n": args.n, "seed": args.seed})
    manifest.add_input(args.profile)
    manifest.write(f"{args.out}.manifest.json")
    return 0


# ---------------------------------------------------------------------------
# Parser wiring


def build_parser() -> _Parser:
    parser = _Parser(prog=PROG, description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version",
                        version=f"{PROG} {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("stats", help="dataset statistics")
    _dataset_args(p)
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("--export-vocab", metavar="FILE",
                   help="also write the entity vocabulary as label<TAB>id")
    p.add_argument("--out", metavar="FILE", help="write the report here instead of stdout")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("rank", help="rank a score file into a rank file")
    p.add_argument("--scores", required=True, metavar="FILE",
                   help="JSON-lines score rows over the exported entity order")
    _dataset_args(p)
    p.add_argument("--tie", choices=TiePolicy.POLICIES, default="average")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--raw", action="store_true",
                   help="rank against all candidates (disable the filtered protocol)")
    p.add_argument("--allow-partial", action="store_true",
                   help="permit score files that do not cover every test query")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True, metavar="FILE")
    p.set_defaults(func=_cmd_rank)

    p = sub.add_parser("eval", help="score a rank file")
    p.add_argument("--ranks", required=True, metavar="FILE")
    _dataset_args(p, required=False)
    _metric_args(p)
    p.add_argument("--tie", choices=TiePolicy.POLICIES, default="average",
                   help="echoed for provenance; ranks are precomputed")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--hits", default=",".join(map(str, DEFAULT_HITS_KS)),
                   help="comma-separated Hits@K cutoffs")
    p.add_argument("--strata", default="auto",
                   help="'auto' or comma-separated popularity bucket edges from 0")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", metavar="FILE")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep", help="evaluate models over an (alpha, beta) grid")
    p.add_argument("--ranks", required=True, nargs="+", metavar="NAME=FILE")
    _dataset_args(p, required=False)
    p.add_argument("--entities", type=int, default=None, metavar="N")
    p.add_argument("--alphas", default="0.25,0.5,1,2")
    p.add_argument("--betas", default="0,0.2,0.4,0.8")
    p.add_argument("--base", default="1,0", help="reference cell alpha,beta")
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--no-affine", action="store_true")
    p.add_argument("--bins", default=None,
                   help="comma-separated rank histogram edges starting at 1")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True, metavar="DIR")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("compare", help="two models, one cell, per-metric table")
    p.add_argument("--ranks", required=True, nargs="+", metavar="NAME=FILE")
    _dataset_args(p, required=False)
    _metric_args(p)
    p.add_argument("--tie", choices=TiePolicy.POLICIES, default="average")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--hits", default=",".join(map(str, DEFAULT_HITS_KS)))
    p.add_argument("--strata", default="auto")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("synth", help="generate a synthetic rank file from a profile")
    p.add_argument("--profile", required=True, metavar="FILE")
    p.add_argument("--n", required=True, type=int)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--out", required=True, metavar="FILE")
    p.set_defaults(func=_cmd_synth)

    return parser


def dispatch(argv: Sequence[str]) -> int:
    """Route argv to a subcommand; map failures to exit codes."""
    argv = list(argv)
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise _UsageError("a subcommand is required", usage=parser.format_usage())
        if getattr(args, "threads", 1) < 1:
            raise ValidationError(f"--threads must be >= 1, got {args.threads}")
        return args.func(args, argv)
    except SystemExit as exc:  # argparse --help/--version
        return int(exc.code or 0)
    except _UsageError as exc:
        if exc.usage:
            sys.stderr.write(exc.usage)
        sys.stderr.write(f"error[usage]: {exc}\n")
        return 1
    except ParseError as exc:
        sys.stderr.write(f"error[parse]: {exc}\n")
        return 1
    except ValidationError as exc:
        sys.stderr.write(f"error[validation]: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"error[io]: {exc}\n")
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()

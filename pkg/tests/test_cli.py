"""Exit codes, output formats, manifests, and rerun determinism."""

from __future__ import annotations

import json
import subprocess
import sys

import pytest

from probe_eval.cli import dispatch


def run_cli(*argv) -> int:
    return dispatch(list(argv))


def write_profile(path, payload):
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


@pytest.fixture
def rankfile(tmp_path):
    path = tmp_path / "ranks.tsv"
    path.write_text(
        "d\tr1\tb\thead\t3\n"
        "d\tr1\tb\ttail\t1\n"
        "a\tr2\tc\thead\t2\n"
        "a\tr2\tc\ttail\t4\n",
        encoding="utf-8")
    return path


class TestStats:
    def test_json_to_stdout(self, toy_dataset, capsys):
        assert run_cli("stats", "--dataset", str(toy_dataset)) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["n_entities"] == 4
        assert payload["n_relations"] == 2
        assert payload["n_triples"] == 4

    def test_text_format(self, toy_dataset, capsys):
        assert run_cli("stats", "--dataset", str(toy_dataset),
                       "--format", "text") == 0
        out = capsys.readouterr().out
        assert "n_entities" in out and "delta_max" in out

    def test_out_file_and_manifest(self, toy_dataset, tmp_path):
        out = tmp_path / "stats.json"
        assert run_cli("stats", "--dataset", str(toy_dataset),
                       "--out", str(out)) == 0
        assert json.loads(out.read_text())["n_entities"] == 4
        manifest = json.loads((tmp_path / "stats.json.manifest.json").read_text())
        assert manifest["command"] == "stats"
        assert len(manifest["inputs"]) == 3
        assert all(digest.startswith("sha256:")
                   for digest in manifest["inputs"].values())

    def test_export_vocab(self, toy_dataset, tmp_path, capsys):
        vocab = tmp_path / "vocab.tsv"
        assert run_cli("stats", "--dataset", str(toy_dataset),
                       "--export-vocab", str(vocab)) == 0
        lines = vocab.read_text().splitlines()
        assert lines[0].split("\t") == ["a", "0"]

    def test_missing_dataset_is_io_error(self, tmp_path, capsys):
        code = run_cli("stats", "--dataset", str(tmp_path / "nope"))
        assert code == 2
        err = capsys.readouterr().err
        assert err.startswith("error[io]:")
        assert "nope" in err


class TestRank:
    @pytest.fixture
    def scores_file(self, toy_dataset, tmp_path):
        # toy test split: (d, r1, b) and (a, r2, c); entity order a,b,c,d
        rows = [
            {"head": "d", "relation": "r1", "tail": "b", "direction": "head",
             "scores": [0.1, 0.2, 0.3, 0.9]},
            {"head": "d", "relation": "r1", "tail": "b", "direction": "tail",
             "scores": [0.5, 0.4, 0.3, 0.2]},
            {"head": "a", "relation": "r2", "tail": "c", "direction": "head",
             "scores": [0.9, 0.1, 0.2, 0.3]},
            {"head": "a", "relation": "r2", "tail": "c", "direction": "tail",
             "scores": [0.2, 0.8, 0.4, 0.1]},
        ]
        path = tmp_path / "scores.jsonl"
        path.write_text("".join(json.dumps(r) + "\n" for r in rows),
                        encoding="utf-8")
        return path

    def test_rank_writes_rankfile_and_manifest(self, toy_dataset, scores_file,
                                               tmp_path):
        out = tmp_path / "out.tsv"
        assert run_cli("rank", "--scores", str(scores_file),
                       "--dataset", str(toy_dataset), "--out", str(out)) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 4
        assert lines[0].split("\t")[:4] == ["d", "r1", "b", "head"]
        assert (tmp_path / "out.tsv.manifest.json").exists()

    def test_random_tie_without_seed_fails(self, toy_dataset, scores_file,
                                           tmp_path, capsys):
        code = run_cli("rank", "--scores", str(scores_file),
                       "--dataset", str(toy_dataset), "--tie", "random",
                       "--out", str(tmp_path / "o.tsv"))
        assert code == 1
        assert "seed" in capsys.readouterr().err

    def test_partial_scores_rejected_by_default(self, toy_dataset, scores_file,
                                                tmp_path, capsys):
        trimmed = tmp_path / "partial.jsonl"
        trimmed.write_text(scores_file.read_text().splitlines()[0] + "\n",
                           encoding="utf-8")
        code = run_cli("rank", "--scores", str(trimmed),
                       "--dataset", str(toy_dataset),
                       "--out", str(tmp_path / "o.tsv"))
        assert code == 1
        err = capsys.readouterr().err
        assert err.startswith("error[validation]:")
        assert "first missing" in err


class TestEval:
    def test_json_output(self, toy_dataset, rankfile, capsys):
        assert run_cli("eval", "--ranks", str(rankfile),
                       "--dataset", str(toy_dataset)) == 0
        payload = json.loads(capsys.readouterr().out)
        assert set(payload) == {"probe", "mr", "mrr", "hits", "strata", "config"}
        assert payload["mr"] == 2.5
        assert payload["config"]["alpha"] == 1.0
        assert payload["config"]["entity_count"] == 4

    def test_entities_override_without_dataset(self, rankfile, capsys):
        assert run_cli("eval", "--ranks", str(rankfile), "--entities", "10") == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["config"]["entity_count"] == 10

    def test_affine_needs_entity_source(self, rankfile, capsys):
        assert run_cli("eval", "--ranks", str(rankfile)) == 1
        assert "entity count" in capsys.readouterr().err

    def test_negative_alpha_cites_requirement(self, toy_dataset, rankfile, capsys):
        code = run_cli("eval", "--ranks", str(rankfile),
                       "--dataset", str(toy_dataset), "--alpha", "-1")
        assert code == 1
        err = capsys.readouterr().err
        assert err.startswith("error[validation]:")
        assert "alpha must be > 0" in err

    def test_missing_rank_file_io_error(self, toy_dataset, capsys):
        code = run_cli("eval", "--ranks", "missing.tsv",
                       "--dataset", str(toy_dataset))
        assert code == 2
        err = capsys.readouterr().err
        assert err.startswith("error[io]:")
        assert "missing.tsv" in err

    def test_csv_format(self, toy_dataset, rankfile, capsys):
        assert run_cli("eval", "--ranks", str(rankfile),
                       "--dataset", str(toy_dataset), "--format", "csv") == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "metric,key,value"
        assert any(line.startswith("probe,,") for line in lines)
        assert any(line.startswith("hits,10,") for line in lines)

    def test_explicit_strata(self, toy_dataset, rankfile, capsys):
        assert run_cli("eval", "--ranks", str(rankfile),
                       "--dataset", str(toy_dataset), "--strata", "0,1,2") == 0
        payload = json.loads(capsys.readouterr().out)
        assert [s["lo"] for s in payload["strata"]] == [0, 1, 2]

    def test_rerun_byte_identical(self, toy_dataset, rankfile, tmp_path):
        out = tmp_path / "a.json"
        argv = ("eval", "--ranks", str(rankfile), "--dataset", str(toy_dataset),
                "--beta", "0.4", "--out", str(out))
        snapshots = []
        for _ in range(2):
            assert run_cli(*argv) == 0
            snapshots.append((
                out.read_bytes(),
                json.loads((tmp_path / "a.json.manifest.json").read_text())))
        first_data, first_manifest = snapshots[0]
        second_data, second_manifest = snapshots[1]
        assert first_data == second_data
        first_manifest.pop("created_utc")
        second_manifest.pop("created_utc")
        assert first_manifest == second_manifest  # only the timestamp may differ

    def test_threads_byte_identical(self, toy_dataset, rankfile, tmp_path):
        outs = []
        for threads in ("1", "4"):
            out = tmp_path / f"t{threads}.json"
            assert run_cli("eval", "--ranks", str(rankfile),
                           "--dataset", str(toy_dataset),
                           "--threads", threads, "--out", str(out)) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


class TestSweepCommand:
    def ranks_for(self, tmp_path, name, ranks):
        path = tmp_path / f"{name}.tsv"
        path.write_text("".join(f"q{i:05d}\tr\te{i:05d}\ttail\t{r}\n"
                                for i, r in enumerate(ranks)), encoding="utf-8")
        return path

    def test_outputs_and_flip_detection(self, tmp_path, capsys):
        sharp = self.ranks_for(tmp_path, "sharp", [1] * 6 + [100] * 4)
        steady = self.ranks_for(tmp_path, "steady", [2] * 10)
        out = tmp_path / "sweepout"
        assert run_cli("sweep", "--ranks", f"sharp={sharp}", f"steady={steady}",
                       "--entities", "10000", "--out", str(out)) == 0
        for name in ("surface.csv", "rankings.json", "flips.json",
                     "histogram.csv", "manifest.json"):
            assert (out / name).exists(), name
        flips = json.loads((out / "flips.json").read_text())
        assert any(set(f["pair"]) == {"sharp", "steady"} and f["alpha"] == 0.25
                   for f in flips)
        rankings = json.loads((out / "rankings.json").read_text())
        base_cell = next(c for c in rankings["cells"]
                         if c["alpha"] == 1.0 and c["beta"] == 0.0)
        assert base_cell["order"] == ["sharp", "steady"]
        surface = (out / "surface.csv").read_text().splitlines()
        assert len(surface) == 1 + 2 * 16

    def test_bad_ranks_argument(self, tmp_path, capsys):
        assert run_cli("sweep", "--ranks", "nofile.tsv",
                       "--entities", "10", "--out", str(tmp_path / "o")) == 1
        assert "name=path" in capsys.readouterr().err

    def test_mismatched_models_rejected(self, tmp_path, capsys):
        a = self.ranks_for(tmp_path, "a", [1, 2])
        b = self.ranks_for(tmp_path, "b", [1, 2, 3])
        assert run_cli("sweep", "--ranks", f"a={a}", f"b={b}",
                       "--entities", "10", "--out", str(tmp_path / "o")) == 1

    def test_threads_byte_identical(self, tmp_path):
        a = self.ranks_for(tmp_path, "a", list(range(1, 400)))
        b = self.ranks_for(tmp_path, "b", [2] * 399)
        outputs = {}
        for threads in ("1", "4"):
            out = tmp_path / f"out{threads}"
            assert run_cli("sweep", "--ranks", f"a={a}", f"b={b}",
                           "--entities", "10000", "--threads", threads,
                           "--out", str(out)) == 0
            outputs[threads] = {
                name: (out / name).read_bytes()
                for name in ("surface.csv", "rankings.json", "flips.json",
                             "histogram.csv")}
        assert outputs["1"] == outputs["4"]


class TestCompare:
    def test_text_table(self, tmp_path, capsys):
        a = tmp_path / "a.tsv"
        b = tmp_path / "b.tsv"
        a.write_text("q\tr\te\ttail\t1\nq2\tr\te2\ttail\t4\n", encoding="utf-8")
        b.write_text("q\tr\te\ttail\t2\nq2\tr\te2\ttail\t2\n", encoding="utf-8")
        assert run_cli("compare", "--ranks", f"a={a}", f"b={b}",
                       "--entities", "100") == 0
        out = capsys.readouterr().out
        assert "probe" in out and "mrr" in out and "hits@10" in out
        assert "a" in out.splitlines()[0] and "b" in out.splitlines()[0]

    def test_json_mode(self, tmp_path, capsys):
        a = tmp_path / "a.tsv"
        b = tmp_path / "b.tsv"
        a.write_text("q\tr\te\ttail\t1\n", encoding="utf-8")
        b.write_text("q\tr\te\ttail\t2\n", encoding="utf-8")
        assert run_cli("compare", "--ranks", f"a={a}", f"b={b}",
                       "--entities", "100", "--format", "json") == 0
        payload = json.loads(capsys.readouterr().out)
        assert set(payload["models"]) == {"a", "b"}

    def test_requires_exactly_two(self, tmp_path, capsys):
        a = tmp_path / "a.tsv"
        a.write_text("q\tr\te\ttail\t1\n", encoding="utf-8")
        assert run_cli("compare", "--ranks", f"a={a}",
                       "--entities", "100") == 1


class TestSynth:
    def test_deterministic_output(self, tmp_path):
        profile = write_profile(tmp_path / "p.json", {
            "kind": "mixture", "p1": 0.5, "tail_rate": 0.1, "n_entities": 100})
        outs = []
        for name in ("a.tsv", "b.tsv"):
            out = tmp_path / name
            assert run_cli("synth", "--profile", profile, "--n", "200",
                           "--seed", "5", "--out", str(out)) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_explicit_profile_through_pipeline(self, tmp_path, capsys):
        profile = write_profile(tmp_path / "p.json", {
            "kind": "explicit", "ranks": [1, 2, 4]})
        out = tmp_path / "r.tsv"
        assert run_cli("synth", "--profile", profile, "--n", "3",
                       "--seed", "0", "--out", str(out)) == 0
        assert run_cli("eval", "--ranks", str(out), "--entities", "10",
                       "--no-affine") == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["mrr"] == pytest.approx(7 / 12, rel=1e-12)

    def test_bad_profile_is_validation_error(self, tmp_path, capsys):
        profile = write_profile(tmp_path / "p.json", {"kind": "what"})
        assert run_cli("synth", "--profile", profile, "--n", "1",
                       "--seed", "0", "--out", str(tmp_path / "o.tsv")) == 1


class TestDispatch:
    def test_no_subcommand(self, capsys):
        assert run_cli() == 1
        err = capsys.readouterr().err
        assert "usage" in err.lower()
        assert "error[usage]:" in err

    def test_unknown_flag(self, toy_dataset, capsys):
        assert run_cli("stats", "--dataset", str(toy_dataset),
                       "--frobnicate") == 1
        assert "error[usage]:" in capsys.readouterr().err

    def test_unknown_subcommand(self, capsys):
        assert run_cli("transmogrify") == 1

    def test_threads_validated(self, toy_dataset, rankfile, capsys):
        assert run_cli("eval", "--ranks", str(rankfile),
                       "--dataset", str(toy_dataset), "--threads", "0") == 1

    def test_version_via_console_script(self):
        result = subprocess.run(
            [sys.executable, "-m", "probe_eval.cli", "--version"],
            capture_output=True, text=True)
        assert result.returncode == 0
        assert "probe-eval 0.1.0" in result.stdout

    def test_help_exits_zero(self):
        result = subprocess.run(
            [sys.executable, "-m", "probe_eval.cli", "eval", "--help"],
            capture_output=True, text=True)
        assert result.returncode == 0
        assert "--alpha" in result.stdout


class TestCompareStrataAlignment:
    def test_divergent_popularity_ranges_share_buckets(self, tmp_path, capsys):
        """Models whose gold popularities span different ranges must still
        render aligned per-stratum rows (one shared bucket scheme)."""
        g = tmp_path / "ds"
        g.mkdir()
        # popular entity 'hub' appears in many training triples; 'leaf' in one
        train = "".join(f"hub\tr\te{i}\n" for i in range(40)) + "leaf\tr\te0\n"
        (g / "train.txt").write_text(train, encoding="utf-8")
        (g / "valid.txt").write_text("e0\tr\te1\n", encoding="utf-8")
        (g / "test.txt").write_text("hub\tr\te1\nleaf\tr\te2\n", encoding="utf-8")

        a = tmp_path / "a.tsv"
        b = tmp_path / "b.tsv"
        # model a only ranks the popular-gold query, model b the rare one
        a.write_text("hub\tr\te1\thead\t1\n", encoding="utf-8")
        b.write_text("leaf\tr\te2\thead\t3\n", encoding="utf-8")
        assert run_cli("compare", "--ranks", f"a={a}", f"b={b}",
                       "--dataset", str(g)) == 0
        out = capsys.readouterr().out
        strata_rows = [line for line in out.splitlines()
                       if line.startswith("strata[")]
        assert strata_rows, out
        # every strata row carries a cell for both models
        for line in strata_rows:
            assert line.count("(n=") == 2


def test_dispatch_returns_zero_for_help_and_version(capsys):
    assert run_cli("--version") == 0
    assert "probe-eval" in capsys.readouterr().out
    assert run_cli("eval", "--help") == 0
    assert "--alpha" in capsys.readouterr().out
